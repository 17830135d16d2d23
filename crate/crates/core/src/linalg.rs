//! Cyclic banded matrices and the linear solvers used by Newton's method.
//!
//! A [`CyclicBandedMatrix`] stores, for every row `i`, the entries in columns
//! `i-hb ..= i+hb` taken modulo `n`. The wrapped entries are the corner blocks
//! produced by periodic boundary conditions.
//!
//! [`solve_linear`] factors the non-periodic band with partially pivoted band
//! LU and folds the corners back in with a rank-`2 hb` Woodbury correction.
//! If that route breaks down (singular band part, ill-conditioned capacitance
//! matrix) the system is solved by dense LU for small `n`, or for larger `n`
//! by band LU after an interleaved reordering `0, n-1, 1, n-2, ...` that turns
//! the cyclic band into an ordinary band of half-width `2 hb`.

use crate::error::{Error, Result};
use crate::grid::Field;
use crate::scalar::Scalar;

const DENSE_FALLBACK_MAX: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct CyclicBandedMatrix<T> {
    n: usize,
    hb: usize,
    data: Vec<T>,
}

impl<T: Scalar> CyclicBandedMatrix<T> {
    pub fn zeros(n: usize, half_bandwidth: usize) -> Result<Self> {
        if n < 2 * half_bandwidth + 1 {
            return Err(Error::invalid(format!(
                "cyclic band of half-width {half_bandwidth} needs n >= {}, got {n}",
                2 * half_bandwidth + 1
            )));
        }
        Ok(Self { n, hb: half_bandwidth, data: vec![T::zero(); n * (2 * half_bandwidth + 1)] })
    }

    pub fn identity(n: usize, half_bandwidth: usize) -> Result<Self> {
        let mut m = Self::zeros(n, half_bandwidth)?;
        for i in 0..n {
            m.set(i, i, T::one());
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_bandwidth(&self) -> usize {
        self.hb
    }

    /// Signed cyclic offset `j - i` if it lies inside the band.
    fn offset(&self, i: usize, j: usize) -> Option<usize> {
        let n = self.n as isize;
        let mut k = (j as isize - i as isize).rem_euclid(n);
        if k > n / 2 {
            k -= n;
        }
        (k.unsigned_abs() <= self.hb).then(|| (k + self.hb as isize) as usize)
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.offset(i, j).map_or(T::zero(), |k| self.data[i * (2 * self.hb + 1) + k])
    }

    /// Sets an in-band entry. Panics if `(i, j)` is outside the cyclic band.
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.offset(i, j).expect("entry outside cyclic band");
        self.data[i * (2 * self.hb + 1) + k] = v;
    }

    /// Adds to the entry at row `i`, column `(i + offset) mod n`.
    #[inline]
    pub fn add_at_offset(&mut self, i: usize, offset: isize, v: T) {
        debug_assert!(offset.unsigned_abs() <= self.hb);
        let k = (offset + self.hb as isize) as usize;
        let w = 2 * self.hb + 1;
        self.data[i * w + k] = self.data[i * w + k] + v;
    }

    /// Entry at row `i`, column `(i + offset) mod n`.
    #[inline]
    pub fn at_offset(&self, i: usize, offset: isize) -> T {
        self.data[i * (2 * self.hb + 1) + (offset + self.hb as isize) as usize]
    }

    fn col(&self, i: usize, offset: isize) -> usize {
        (i as isize + offset).rem_euclid(self.n as isize) as usize
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let hb = self.hb as isize;
        (0..self.n)
            .map(|i| (-hb..=hb).fold(T::zero(), |acc, k| acc + self.at_offset(i, k) * x[self.col(i, k)]))
            .collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let mut d = vec![vec![T::zero(); self.n]; self.n];
        let hb = self.hb as isize;
        for (i, row) in d.iter_mut().enumerate() {
            for k in -hb..=hb {
                row[self.col(i, k)] = self.at_offset(i, k);
            }
        }
        d
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Solves `J x = rhs`.
pub fn solve_linear<T: Scalar>(j: &CyclicBandedMatrix<T>, rhs: &Field<T>) -> Result<Field<T>> {
    if rhs.len() != j.n {
        return Err(Error::LengthMismatch { expected: j.n, got: rhs.len() });
    }
    let b = rhs.as_slice();
    let bnorm = b.iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if bnorm == T::zero() {
        return Ok(Field::constant(j.n, T::zero()));
    }
    let accept = |x: &[T]| {
        let r = j.matvec(x);
        let res = r.iter().zip(b).fold(T::zero(), |m, (a, c)| m.max((*a - *c).abs()));
        res.is_finite() && res <= T::lit(1e-10) * bnorm
    };
    if let Ok(x) = woodbury_solve(j, b) {
        if accept(&x) {
            return Ok(Field::new(x));
        }
    }
    let x = if j.n <= DENSE_FALLBACK_MAX {
        let mut a = j.to_dense();
        dense_solve(&mut a, b.to_vec())?
    } else {
        interleaved_solve(j, b)?
    };
    if x.iter().all(|v| v.is_finite()) {
        Ok(Field::new(x))
    } else {
        Err(Error::LinearSolve("non-finite solution".into()))
    }
}

fn woodbury_solve<T: Scalar>(j: &CyclicBandedMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    let n = j.n;
    let hb = j.hb as isize;
    let mut band = BandLu::zeros(n, j.hb, j.hb);
    // Rows holding corner entries, in order.
    let corner_rows: Vec<usize> = (0..j.hb).chain(n - j.hb..n).collect();
    let r = corner_rows.len();
    // w[c] = sparse row c of the corner part, as (column, value).
    let mut w: Vec<Vec<(usize, T)>> = vec![Vec::new(); r];
    for i in 0..n {
        for k in -hb..=hb {
            let v = j.at_offset(i, k);
            let c = i as isize + k;
            if (0..n as isize).contains(&c) {
                band.set(i, c as usize, v);
            } else if v != T::zero() {
                let slot = corner_rows.iter().position(|&row| row == i).expect("corner row");
                w[slot].push((j.col(i, k), v));
            }
        }
    }
    band.factor()?;
    let y = band.solve(b.to_vec());
    if w.iter().all(|row| row.is_empty()) {
        return Ok(y);
    }
    // Z = B^{-1} U with U = [e_row for row in corner_rows].
    let z: Vec<Vec<T>> = corner_rows
        .iter()
        .map(|&row| {
            let mut e = vec![T::zero(); n];
            e[row] = T::one();
            band.solve(e)
        })
        .collect();
    let dot = |row: &[(usize, T)], v: &[T]| row.iter().fold(T::zero(), |acc, &(c, x)| acc + x * v[c]);
    // Capacitance matrix I + W Z.
    let mut cap: Vec<Vec<T>> = (0..r)
        .map(|a| (0..r).map(|c| if a == c { T::one() } else { T::zero() } + dot(&w[a], &z[c])).collect())
        .collect();
    let wy: Vec<T> = (0..r).map(|a| dot(&w[a], &y)).collect();
    let coeff = dense_solve(&mut cap, wy)?;
    let mut x = y;
    for (c, zc) in z.iter().enumerate() {
        for (xi, zi) in x.iter_mut().zip(zc) {
            *xi = *xi - coeff[c] * *zi;
        }
    }
    Ok(x)
}

fn interleaved_solve<T: Scalar>(j: &CyclicBandedMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    let n = j.n;
    // position -> original index
    let order: Vec<usize> = (0..n).map(|q| if q % 2 == 0 { q / 2 } else { n - 1 - q / 2 }).collect();
    let mut pos = vec![0usize; n];
    for (q, &i) in order.iter().enumerate() {
        pos[i] = q;
    }
    let wide = 2 * j.hb;
    let mut band = BandLu::zeros(n, wide, wide);
    let hb = j.hb as isize;
    for i in 0..n {
        for k in -hb..=hb {
            band.set(pos[i], pos[j.col(i, k)], j.at_offset(i, k));
        }
    }
    band.factor()?;
    let pb: Vec<T> = order.iter().map(|&i| b[i]).collect();
    let px = band.solve(pb);
    let mut x = vec![T::zero(); n];
    for (q, &i) in order.iter().enumerate() {
        x[i] = px[q];
    }
    Ok(x)
}

/// Band LU with partial pivoting. Row `i` stores columns
/// `i-kl ..= i+ku+kl` to make room for pivoting fill-in.
#[derive(Debug, Clone)]
struct BandLu<T> {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Scalar> BandLu<T> {
    fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        Self { n, kl, ku, data: vec![T::zero(); n * (2 * kl + ku + 1)], piv: Vec::new() }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * (2 * self.kl + self.ku + 1) + (j + self.kl - i)
    }

    fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    #[inline]
    fn get(&self, i: usize, j: usize) -> T {
        self.data[self.idx(i, j)]
    }

    fn factor(&mut self) -> Result<()> {
        let n = self.n;
        self.piv = vec![0; n];
        let scale = self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        let tiny = scale * T::epsilon() * T::lit(n as f64);
        for k in 0..n {
            let last = (k + self.kl).min(n - 1);
            let mut p = k;
            let mut best = self.get(k, k).abs();
            for i in k + 1..=last {
                let v = self.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > tiny) || !best.is_finite() {
                return Err(Error::LinearSolve(format!("zero pivot at column {k}")));
            }
            self.piv[k] = p;
            let right = (k + self.kl + self.ku).min(n - 1);
            if p != k {
                for c in k..=right {
                    let a = self.idx(k, c);
                    let b = self.idx(p, c);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.get(k, k);
            for i in k + 1..=last {
                let l = self.get(i, k) / pivot;
                let ik = self.idx(i, k);
                self.data[ik] = l;
                if l != T::zero() {
                    for c in k + 1..=right {
                        let ic = self.idx(i, c);
                        self.data[ic] = self.data[ic] - l * self.get(k, c);
                    }
                }
            }
        }
        Ok(())
    }

    fn solve(&self, mut b: Vec<T>) -> Vec<T> {
        let n = self.n;
        for k in 0..n {
            let p = self.piv[k];
            b.swap(k, p);
            let bk = b[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                b[i] = b[i] - self.get(i, k) * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for c in i + 1..=(i + self.kl + self.ku).min(n - 1) {
                s = s - self.get(i, c) * b[c];
            }
            b[i] = s / self.get(i, i);
        }
        b
    }
}

/// Dense LU with partial pivoting; overwrites `a`.
pub(crate) fn dense_solve<T: Scalar>(a: &mut [Vec<T>], mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    let scale = a.iter().flatten().fold(T::zero(), |m, v| m.max(v.abs()));
    let tiny = scale * T::epsilon() * T::lit(n as f64);
    for k in 0..n {
        let p = (k..n)
            .max_by(|&x, &y| a[x][k].abs().partial_cmp(&a[y][k].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .expect("non-empty");
        if !(a[p][k].abs() > tiny) || !a[p][k].is_finite() {
            return Err(Error::LinearSolve(format!("singular matrix at column {k}")));
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let l = a[i][k] / a[k][k];
            if l != T::zero() {
                for c in k..n {
                    a[i][c] = a[i][c] - l * a[k][c];
                }
                b[i] = b[i] - l * b[k];
            }
        }
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for c in i + 1..n {
            s = s - a[i][c] * b[c];
        }
        b[i] = s / a[i][i];
    }
    Ok(b)
}
