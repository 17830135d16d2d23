//! Plain Newton iteration for one time step.

use crate::assembly::{residual_and_jacobian_increment, residual_increment, SchemeConfig};
use crate::error::Result;
use crate::grid::{Field, PeriodicGrid};
use crate::linalg::solve_linear;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonConfig<T> {
    pub max_iterations: usize,
    /// Success threshold on `max |F|`.
    pub tolerance: T,
    /// Iteration stops early once `max |F| < tolerance / break_factor`.
    pub break_factor: T,
}

impl<T: Scalar> NewtonConfig<T> {
    pub fn with_tolerance(tolerance: T) -> Self {
        Self { max_iterations: 15, tolerance, break_factor: T::lit(10.0) }
    }
}

impl<T: Scalar> Default for NewtonConfig<T> {
    fn default() -> Self {
        Self::with_tolerance(T::lit(1e-8))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome<T> {
    pub success: bool,
    /// Number of linear solves performed.
    pub iterations: usize,
    /// `max |F|` at the last iterate; infinite if assembly failed there.
    pub final_residual_norm: T,
    pub solution: Option<Field<T>>,
    /// `solution - u_prev` before rounding into `solution`; present on success.
    pub increment: Option<Field<T>>,
    /// Why the iteration gave up, when it did so on an error.
    pub failure: Option<String>,
}

/// Solves `F(u) = 0` starting from `u_prev`.
///
/// The unknown is the increment `u - u_prev`, which keeps the attainable
/// residual well below the rounding granularity of `u` itself. Assembly and linear-solve errors end the iteration with `success = false`
/// and are never propagated.
pub fn newton_solve<T: Scalar>(
    config: &NewtonConfig<T>,
    scheme: &SchemeConfig<T>,
    grid: &PeriodicGrid<T>,
    u_prev: &Field<T>,
    dt: T,
) -> NewtonOutcome<T> {
    let mut delta = Field::constant(u_prev.len(), T::zero());
    let mut iterations = 0;
    let fail = |iterations, norm, why: String| NewtonOutcome {
        success: false,
        iterations,
        final_residual_norm: norm,
        solution: None,
        increment: None,
        failure: Some(why),
    };
    let break_at = config.tolerance / config.break_factor;
    let mut norm;
    loop {
        let (f, j) = match residual_and_jacobian_increment(scheme, grid, u_prev, &delta, dt) {
            Ok(v) => v,
            Err(e) => return fail(iterations, T::infinity(), e.to_string()),
        };
        norm = f.max_abs();
        if norm < break_at || iterations == config.max_iterations {
            break;
        }
        let step = match solve_linear(&j, &f) {
            Ok(d) => d,
            Err(e) => return fail(iterations, norm, e.to_string()),
        };
        for (di, si) in delta.as_mut_slice().iter_mut().zip(step.iter()) {
            *di = *di - *si;
        }
        iterations += 1;
    }
    if norm < config.tolerance {
        let u = Field::new(u_prev.iter().zip(delta.iter()).map(|(&w, &d)| w + d).collect());
        NewtonOutcome {
            success: true,
            iterations,
            final_residual_norm: norm,
            solution: Some(u),
            increment: Some(delta),
            failure: None,
        }
    } else {
        fail(iterations, norm, format!("residual {norm:e} not below {:e}", config.tolerance))
    }
}

/// `max |F(u_prev + delta)|` re-evaluated from scratch.
pub fn residual_norm<T: Scalar>(
    scheme: &SchemeConfig<T>,
    grid: &PeriodicGrid<T>,
    u_prev: &Field<T>,
    delta: &Field<T>,
    dt: T,
) -> Result<T> {
    Ok(residual_increment(scheme, grid, u_prev, delta, dt)?.max_abs())
}
