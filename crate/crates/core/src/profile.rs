//! Turning a measured height profile into a periodic initial condition.
//!
//! The pipeline crops the samples to a window whose endpoint heights match,
//! smooths them with a circular moving average, fits a truncated Fourier
//! series by least squares and evaluates it on the target grid, mapping one
//! period of the data onto the grid's domain.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{Field, PeriodicGrid};
use crate::io::read_xy;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    /// Relative mismatch allowed between the two endpoint heights.
    pub endpoint_tolerance: f64,
    /// Smallest fraction of the samples a crop window may keep.
    pub min_fraction: f64,
    /// Odd moving-average window; 1 disables smoothing.
    pub window: usize,
    /// Number of Fourier modes; `None` means `min(n/4, 64)`.
    pub modes: Option<usize>,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self { endpoint_tolerance: 0.01, min_fraction: 0.5, window: 5, modes: None }
    }
}

/// Fitted series `c0 + sum_k a_k cos(2 pi k s) + b_k sin(2 pi k s)`, with
/// `s` the position as a fraction of the period.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileFit {
    pub mean: f64,
    pub cos: Vec<f64>,
    pub sin: Vec<f64>,
    /// Period of the cropped data in its own units.
    pub period: f64,
    /// Index range `[start, end)` of the samples kept by the crop.
    pub kept: (usize, usize),
}

impl ProfileFit {
    /// Series value at fraction `s` of the period.
    pub fn eval(&self, s: f64) -> f64 {
        let w = 2.0 * PI * s;
        self.cos
            .iter()
            .zip(&self.sin)
            .enumerate()
            .fold(self.mean, |acc, (k, (a, b))| {
                let kw = (k + 1) as f64 * w;
                acc + a * kw.cos() + b * kw.sin()
            })
    }

    /// Samples the series on `grid`, one period across the whole domain.
    pub fn sample<T: Scalar>(&self, grid: &PeriodicGrid<T>) -> Result<Field<T>> {
        let l = grid.length().as_f64();
        let mut out = Vec::with_capacity(grid.n_points());
        for (i, x) in grid.nodes().enumerate() {
            let v = self.eval(x.as_f64() / l);
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Profile(format!("fitted profile is not positive at node {i} ({v})")));
            }
            out.push(T::lit(v));
        }
        Ok(Field::new(out))
    }
}

/// Reads `path` (CSV `x,h` with a header) and returns the fitted initial
/// condition on `grid`.
pub fn load_profile<T: Scalar>(path: &Path, grid: &PeriodicGrid<T>, options: &ProfileOptions) -> Result<Field<T>> {
    let (xs, hs) = read_xy(path)?;
    fit_profile(&xs, &hs, options)?.sample(grid)
}

/// Runs crop, smoothing and least-squares fit on in-memory samples.
pub fn fit_profile(xs: &[f64], hs: &[f64], options: &ProfileOptions) -> Result<ProfileFit> {
    if xs.len() != hs.len() {
        return Err(Error::LengthMismatch { expected: xs.len(), got: hs.len() });
    }
    if xs.len() < 4 {
        return Err(Error::Profile("need at least 4 samples".into()));
    }
    if let Some(i) = xs.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(Error::Profile(format!("x is not strictly increasing at row {}", i + 1)));
    }
    if let Some(i) = hs.iter().position(|&h| !(h > 0.0) || !h.is_finite()) {
        return Err(Error::Profile(format!("nonpositive height {} at row {i}", hs[i])));
    }
    if options.window % 2 == 0 {
        return Err(Error::Profile(format!("moving-average window must be odd, got {}", options.window)));
    }
    let (start, end) = crop(hs, options)?;
    // The sample at `end` is the periodic image of the one at `start`.
    let period = xs[end] - xs[start];
    let s: Vec<f64> = xs[start..end].iter().map(|x| (x - xs[start]) / period).collect();
    let smooth = moving_average(&hs[start..end], options.window);
    let n = s.len();
    let modes = options.modes.unwrap_or((n / 4).min(64));
    if 2 * modes + 1 > n {
        return Err(Error::Profile(format!("{modes} modes need at least {} samples, got {n}", 2 * modes + 1)));
    }
    let cols = 2 * modes + 1;
    let a = DMatrix::from_fn(n, cols, |i, j| {
        if j == 0 {
            1.0
        } else {
            let k = j.div_ceil(2) as f64;
            let w = 2.0 * PI * k * s[i];
            if j % 2 == 1 {
                w.cos()
            } else {
                w.sin()
            }
        }
    });
    let b = DVector::from_vec(smooth);
    let coef = a
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::Profile(format!("least-squares fit failed: {e}")))?;
    Ok(ProfileFit {
        mean: coef[0],
        cos: (0..modes).map(|k| coef[2 * k + 1]).collect(),
        sin: (0..modes).map(|k| coef[2 * k + 2]).collect(),
        period,
        kept: (start, end),
    })
}

/// Longest `[i, j]` whose endpoint heights agree within the tolerance and
/// that keeps at least `min_fraction` of the samples.
fn crop(hs: &[f64], options: &ProfileOptions) -> Result<(usize, usize)> {
    let n = hs.len();
    let min_len = ((options.min_fraction * n as f64).ceil() as usize).max(4);
    for len in (min_len..n).rev() {
        for i in 0..n - len {
            let (a, b) = (hs[i], hs[i + len]);
            if (a - b).abs() <= options.endpoint_tolerance * a.max(b) {
                return Ok((i, i + len));
            }
        }
    }
    Err(Error::Profile(format!(
        "no window of at least {min_len} samples has endpoint heights within {}",
        options.endpoint_tolerance
    )))
}

/// Circular moving average.
fn moving_average(h: &[f64], window: usize) -> Vec<f64> {
    let n = h.len();
    let r = (window / 2) as isize;
    (0..n as isize)
        .map(|i| (-r..=r).map(|o| h[(i + o).rem_euclid(n as isize) as usize]).sum::<f64>() / window as f64)
        .collect()
}
