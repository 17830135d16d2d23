//! Uniform periodic grid, film-thickness fields and difference operators.
//!
//! Nodes sit at `x_i = i * dx` for `i = 0..N`; node `N` is identified with
//! node `0`, so all index arithmetic wraps modulo `N`.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::model::PhysicalModel;
use crate::scalar::Scalar;

pub const MIN_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeriodicGrid<T> {
    n_points: usize,
    length: T,
    dx: T,
}

impl<T: Scalar> PeriodicGrid<T> {
    pub fn new(n_points: usize, length: T) -> Result<Self> {
        if n_points < MIN_POINTS {
            return Err(Error::invalid(format!("grid needs at least {MIN_POINTS} points, got {n_points}")));
        }
        if !(length > T::zero() && length.is_finite()) {
            return Err(Error::invalid(format!("domain length must be positive, got {length}")));
        }
        let dx = length / T::from_usize(n_points).expect("grid size representable");
        Ok(Self { n_points, length, dx })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn length(&self) -> T {
        self.length
    }

    pub fn dx(&self) -> T {
        self.dx
    }

    pub fn x(&self, i: usize) -> T {
        T::from_usize(i).expect("index representable") * self.dx
    }

    pub fn nodes(&self) -> impl Iterator<Item = T> + '_ {
        (0..self.n_points).map(move |i| self.x(i))
    }

    #[inline]
    pub fn next(&self, i: usize) -> usize {
        if i + 1 == self.n_points {
            0
        } else {
            i + 1
        }
    }

    #[inline]
    pub fn prev(&self, i: usize) -> usize {
        if i == 0 {
            self.n_points - 1
        } else {
            i - 1
        }
    }

    /// `(i + offset) mod N` for any signed offset.
    #[inline]
    pub fn wrap(&self, i: usize, offset: isize) -> usize {
        let n = self.n_points as isize;
        (i as isize + offset).rem_euclid(n) as usize
    }

    /// Samples `f(x_i)` on every node.
    pub fn sample(&self, f: impl Fn(T) -> T) -> Field<T> {
        Field::new(self.nodes().map(f).collect())
    }

    pub fn check(&self, f: &Field<T>) -> Result<()> {
        if f.len() != self.n_points {
            return Err(Error::LengthMismatch { expected: self.n_points, got: f.len() });
        }
        Ok(())
    }
}

/// Film thickness (or any nodal quantity) on a periodic grid.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Field<T>(Vec<T>);

impl<T: Scalar> Field<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self(values)
    }

    pub fn constant(n: usize, value: T) -> Self {
        Self(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.0.iter()
    }

    pub fn min(&self) -> T {
        self.0.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max(&self) -> T {
        self.0.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Index and value of the smallest entry.
    pub fn argmin(&self) -> Option<(usize, T)> {
        self.0
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, v)| match best {
                Some((_, b)) if b <= v => best,
                _ => Some((i, v)),
            })
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.0.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self(self.0.iter().map(|&v| f(v)).collect())
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Field<U> {
        Field(self.0.iter().map(|v| U::lit(v.as_f64())).collect())
    }
}

impl<T> Index<usize> for Field<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

impl<T> IndexMut<usize> for Field<T> {
    fn index_mut(&mut self, i: usize) -> &mut T {
        &mut self.0[i]
    }
}

impl<T> From<Vec<T>> for Field<T> {
    fn from(v: Vec<T>) -> Self {
        Self(v)
    }
}

/// `(f_{i+1} - f_i) / dx`.
pub fn diff_forward<T: Scalar>(grid: &PeriodicGrid<T>, f: &Field<T>) -> Result<Field<T>> {
    grid.check(f)?;
    let inv = grid.dx().recip();
    Ok(Field((0..grid.n_points()).map(|i| (f[grid.next(i)] - f[i]) * inv).collect()))
}

/// `(f_i - f_{i-1}) / dx`.
pub fn diff_backward<T: Scalar>(grid: &PeriodicGrid<T>, f: &Field<T>) -> Result<Field<T>> {
    grid.check(f)?;
    let inv = grid.dx().recip();
    Ok(Field((0..grid.n_points()).map(|i| (f[i] - f[grid.prev(i)]) * inv).collect()))
}

/// `(f_{i+1} - 2 f_i + f_{i-1}) / dx^2`.
pub fn second_difference<T: Scalar>(grid: &PeriodicGrid<T>, f: &Field<T>) -> Result<Field<T>> {
    grid.check(f)?;
    let inv2 = (grid.dx() * grid.dx()).recip();
    let two = T::lit(2.0);
    Ok(Field(
        (0..grid.n_points())
            .map(|i| (f[grid.next(i)] - two * f[i] + f[grid.prev(i)]) * inv2)
            .collect(),
    ))
}

/// Backward difference of the second difference,
/// `(f_{i+1} - 3 f_i + 3 f_{i-1} - f_{i-2}) / dx^3`.
pub fn third_difference<T: Scalar>(grid: &PeriodicGrid<T>, f: &Field<T>) -> Result<Field<T>> {
    diff_backward(grid, &second_difference(grid, f)?)
}

/// Discrete pressure `p_i = (D2 lap)_i - Z+(zp_i) - Z-(zm_i)`.
///
/// The three sources are separate so that a scheme can evaluate `Z-` at the
/// previous time level while keeping the other terms implicit.
pub fn discrete_pressure<T: Scalar>(
    grid: &PeriodicGrid<T>,
    model: &PhysicalModel<T>,
    lap_source: &Field<T>,
    z_plus_source: &Field<T>,
    z_minus_source: &Field<T>,
) -> Result<Field<T>> {
    grid.check(z_plus_source)?;
    grid.check(z_minus_source)?;
    let mut p = second_difference(grid, lap_source)?;
    for i in 0..grid.n_points() {
        let (zp, _) = model.z_plus(z_plus_source[i]).map_err(|e| at_index(e, i))?;
        let (zm, _) = model.z_minus(z_minus_source[i]).map_err(|e| at_index(e, i))?;
        p[i] = p[i] - zp - zm;
    }
    Ok(p)
}

pub(crate) fn at_index(e: Error, i: usize) -> Error {
    match e {
        Error::Positivity { index: None, value } => Error::Positivity { index: Some(i), value },
        Error::Domain { value, .. } => Error::Positivity { index: Some(i), value },
        other => other,
    }
}

/// Discrete L2 norm `sqrt(dx * sum f_i^2)`.
pub fn l2_norm<T: Scalar>(grid: &PeriodicGrid<T>, f: &Field<T>) -> T {
    (f.iter().map(|&v| v * v).sum::<T>() * grid.dx()).sqrt()
}
