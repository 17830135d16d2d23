//! Per-step nonlinear residual and its Jacobian.
//!
//! With `u` the unknown new level and `w` the previous one,
//!
//! ```text
//! F_i = (1 + a (u_i + w_i) / 2) (u_i - w_i) / dt + (q_{i+1} - q_i) / dx
//! q_i = m(u_{i-1}, u_i) (1 + (p_i - p_{i-1}) / dx)
//! p_i = (u_{i-1} - 2 u_i + u_{i+1}) / dx^2 - Z+(u_i) - Z-(v_i)
//! ```
//!
//! where `v = w` for the semi-implicit scheme and `v = u` for the implicit
//! one. The time term is the exact increment of `u + a u^2 / 2`, and the
//! flux differences telescope, so `sum_i F_i dx` only sees the time term.

use crate::error::{Error, Result};
use crate::grid::{at_index, Field, PeriodicGrid};
use crate::linalg::CyclicBandedMatrix;
use crate::mobility::{MobilityDiscretization, MobilityVariant};
use crate::model::PhysicalModel;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeKind {
    /// Bounded entropy method: `Z-` lagged, integral-mean mobility by default.
    SemiImplicitBem,
    /// Generic method: fully implicit, midpoint mobility by default.
    ImplicitGm,
}

impl SchemeKind {
    pub fn default_mobility(self) -> MobilityVariant {
        match self {
            SchemeKind::SemiImplicitBem => MobilityVariant::IntegralMean,
            SchemeKind::ImplicitGm => MobilityVariant::Midpoint,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SchemeKind::SemiImplicitBem => "BEM",
            SchemeKind::ImplicitGm => "GM",
        }
    }
}

impl std::fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for SchemeKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "bem" | "semiimplicitbem" => Ok(SchemeKind::SemiImplicitBem),
            "gm" | "implicitgm" => Ok(SchemeKind::ImplicitGm),
            _ => Err(Error::invalid(format!("unknown scheme '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SchemeConfig<T> {
    pub scheme: SchemeKind,
    pub mobility: MobilityDiscretization<T>,
    pub model: PhysicalModel<T>,
}

impl<T: Scalar> SchemeConfig<T> {
    /// Scheme with its default mobility pairing.
    pub fn new(scheme: SchemeKind, model: PhysicalModel<T>) -> Self {
        Self { scheme, mobility: MobilityDiscretization::for_variant(scheme.default_mobility()), model }
    }

    pub fn bem(model: PhysicalModel<T>) -> Self {
        Self::new(SchemeKind::SemiImplicitBem, model)
    }

    pub fn gm(model: PhysicalModel<T>) -> Self {
        Self::new(SchemeKind::ImplicitGm, model)
    }

    pub fn with_mobility(mut self, mobility: MobilityDiscretization<T>) -> Self {
        self.mobility = mobility;
        self
    }

    fn z_minus_implicit(&self) -> bool {
        self.scheme == SchemeKind::ImplicitGm
    }
}

/// Edge mobilities, flux gradients and pressure diagonals shared by the
/// residual and the Jacobian.
#[derive(Debug, Clone, Default)]
struct Workspace<T> {
    dp_diag: Vec<T>,
    m: Vec<T>,
    dm_left: Vec<T>,
    dm_right: Vec<T>,
    grad: Vec<T>,
}

/// Builds the workspace at `u = u_prev + delta`.
///
/// Differences of `u` are formed as differences of `u_prev` plus differences
/// of `delta`, and pressure differences come from cancellation-free forms.
/// Evaluating `u_{i-1} - 2 u_i + u_{i+1}` on the rounded sum instead puts a
/// floor of roughly `M ulp(u) / dx^4` under the attainable residual.
fn prepare<T: Scalar>(
    config: &SchemeConfig<T>,
    grid: &PeriodicGrid<T>,
    u_prev: &Field<T>,
    delta: &Field<T>,
    dt: T,
) -> Result<Workspace<T>> {
    grid.check(u_prev)?;
    grid.check(delta)?;
    if !(dt > T::zero()) || !dt.is_finite() {
        return Err(Error::invalid(format!("time step must be positive, got {dt}")));
    }
    let n = grid.n_points();
    let dx = grid.dx();
    let inv_dx2 = (dx * dx).recip();
    let model = &config.model;
    let implicit_zm = config.z_minus_implicit();
    let two = T::lit(2.0);
    let u: Vec<T> = u_prev.iter().zip(delta.iter()).map(|(&w, &d)| w + d).collect();
    // du[i] = u_i - u_{i-1}, dw[i] = w_i - w_{i-1}
    let mut du = vec![T::zero(); n];
    let mut dw = vec![T::zero(); n];
    for i in 0..n {
        let im = grid.prev(i);
        dw[i] = u_prev[i] - u_prev[im];
        du[i] = dw[i] + (delta[i] - delta[im]);
    }
    let mut ws = Workspace {
        dp_diag: vec![T::zero(); n],
        m: vec![T::zero(); n],
        dm_left: vec![T::zero(); n],
        dm_right: vec![T::zero(); n],
        grad: vec![T::zero(); n],
    };
    for i in 0..n {
        let (_, dzp) = model.z_plus(u[i]).map_err(|e| at_index(e, i))?;
        let zm_src = if implicit_zm { u[i] } else { u_prev[i] };
        let (_, dzm) = model.z_minus(zm_src).map_err(|e| at_index(e, i))?;
        ws.dp_diag[i] = -two * inv_dx2 - dzp - if implicit_zm { dzm } else { T::zero() };
    }
    let v: &[T] = if implicit_zm { &u } else { u_prev.as_slice() };
    let dv = if implicit_zm { &du } else { &dw };
    for i in 0..n {
        let (im, ip) = (grid.prev(i), grid.next(i));
        // (D2 u)_i - (D2 u)_{i-1}, times dx^2
        let lap_diff = (du[ip] - du[i]) - (du[i] - du[im]);
        let zp = model.z_plus_difference(u[im], u[i], du[i]).map_err(|e| at_index(e, i))?;
        let zm = model.z_minus_difference(v[im], v[i], dv[i]).map_err(|e| at_index(e, i))?;
        ws.grad[i] = T::one() + (lap_diff * inv_dx2 - zp - zm) / dx;
        let mv = config.mobility.evaluate(model, u[im], u[i]).map_err(|e| {
            let bad = if u[im] < u[i] { im } else { i };
            at_index(e, bad)
        })?;
        ws.m[i] = mv.m;
        ws.dm_left[i] = mv.dm_ds1;
        ws.dm_right[i] = mv.dm_ds2;
    }
    Ok(ws)
}

fn residual_from<T: Scalar>(
    config: &SchemeConfig<T>,
    grid: &PeriodicGrid<T>,
    ws: &Workspace<T>,
    u_prev: &Field<T>,
    delta: &Field<T>,
    dt: T,
) -> Result<Field<T>> {
    let n = grid.n_points();
    let dx = grid.dx();
    let a = config.model.alpha();
    let half = T::lit(0.5);
    let mut f = Vec::with_capacity(n);
    for i in 0..n {
        let (w, d) = (u_prev[i], delta[i]);
        let ip = grid.next(i);
        let time = (T::one() + a * (w + half * d)) * d / dt;
        let div = (ws.m[ip] * ws.grad[ip] - ws.m[i] * ws.grad[i]) / dx;
        let v = time + div;
        if !v.is_finite() {
            return Err(Error::Domain { what: "residual", value: v.as_f64() });
        }
        f.push(v);
    }
    Ok(Field::new(f))
}

fn jacobian_from<T: Scalar>(
    config: &SchemeConfig<T>,
    grid: &PeriodicGrid<T>,
    ws: &Workspace<T>,
    u_prev: &Field<T>,
    delta: &Field<T>,
    dt: T,
) -> Result<CyclicBandedMatrix<T>> {
    let n = grid.n_points();
    let dx = grid.dx();
    let inv_dx = dx.recip();
    let inv_dx2 = inv_dx * inv_dx;
    let a = config.model.alpha();
    // dq_i/du_{i+k} for k = -2..=1, stored at [k + 2].
    let flux_derivative = |i: usize| -> [T; 4] {
        let c = ws.m[i] * inv_dx;
        let im = grid.prev(i);
        [
            -c * inv_dx2,
            c * (inv_dx2 - ws.dp_diag[im]) + ws.dm_left[i] * ws.grad[i],
            c * (ws.dp_diag[i] - inv_dx2) + ws.dm_right[i] * ws.grad[i],
            c * inv_dx2,
        ]
    };
    let mut j = CyclicBandedMatrix::zeros(n, 2)?;
    for i in 0..n {
        let (w, d) = (u_prev[i], delta[i]);
        // d/du of (1 + a (u + w)/2)(u - w)/dt
        j.add_at_offset(i, 0, (T::one() + a * (w + d)) / dt);
        let right = flux_derivative(grid.next(i));
        let left = flux_derivative(i);
        for k in 0..4 {
            j.add_at_offset(i, k as isize - 1, right[k] * inv_dx);
            j.add_at_offset(i, k as isize - 2, -left[k] * inv_dx);
        }
    }
    if !j.max_abs().is_finite() {
        return Err(Error::Domain { what: "jacobian", value: f64::NAN });
    }
    Ok(j)
}

fn increment<T: Scalar>(grid: &PeriodicGrid<T>, u_next: &Field<T>, u_prev: &Field<T>) -> Result<Field<T>> {
    grid.check(u_next)?;
    grid.check(u_prev)?;
    Ok(Field::new(u_next.iter().zip(u_prev.iter()).map(|(&u, &w)| u - w).collect()))
}

/// `F(u_next)` for the configured scheme.
pub fn residual<T: Scalar>(
    config: &SchemeConfig<T>,
    grid: &PeriodicGrid<T>,
    u_next: &Field<T>,
    u_prev: &Field<T>,
    dt: T,
) -> Result<Field<T>> {
    residual_increment(config, grid, u_prev, &increment(grid, u_next, u_prev)?, dt)
}

/// `F(u_prev + delta)`, without first rounding the sum.
pub fn residual_increment<T: Scalar>(
    config: &SchemeConfig<T>,
    grid: &PeriodicGrid<T>,
    u_prev: &Field<T>,
    delta: &Field<T>,
    dt: T,
) -> Result<Field<T>> {
    let ws = prepare(config, grid, u_prev, delta, dt)?;
    residual_from(config, grid, &ws, u_prev, delta, dt)
}

/// Analytic `dF_i/du_j` as a cyclic band of half-width 2.
pub fn jacobian<T: Scalar>(
    config: &SchemeConfig<T>,
    grid: &PeriodicGrid<T>,
    u_next: &Field<T>,
    u_prev: &Field<T>,
    dt: T,
) -> Result<CyclicBandedMatrix<T>> {
    let delta = increment(grid, u_next, u_prev)?;
    let ws = prepare(config, grid, u_prev, &delta, dt)?;
    jacobian_from(config, grid, &ws, u_prev, &delta, dt)
}

/// Residual and Jacobian at `u_prev + delta` from a single pass over the grid.
pub fn residual_and_jacobian_increment<T: Scalar>(
    config: &SchemeConfig<T>,
    grid: &PeriodicGrid<T>,
    u_prev: &Field<T>,
    delta: &Field<T>,
    dt: T,
) -> Result<(Field<T>, CyclicBandedMatrix<T>)> {
    let ws = prepare(config, grid, u_prev, delta, dt)?;
    Ok((
        residual_from(config, grid, &ws, u_prev, delta, dt)?,
        jacobian_from(config, grid, &ws, u_prev, delta, dt)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use rand::{rngs::StdRng, Rng, SeedableRng};
    use std::f64::consts::PI;

    fn fsm() -> PhysicalModel<f64> {
        PhysicalModel::fsm(ModelParams::new(5.0, 0.02, 1e-5)).unwrap()
    }

    fn unit() -> PhysicalModel<f64> {
        PhysicalModel::constant_mobility(ModelParams::new(0.0, 1.0, 0.0)).unwrap()
    }

    fn random_field(n: usize, rng: &mut StdRng) -> Field<f64> {
        Field::new((0..n).map(|_| rng.gen_range(0.3..1.5)).collect())
    }

    #[test]
    fn constant_state_is_fixed_point() {
        let g = PeriodicGrid::new(16, 2.0).unwrap();
        let u = Field::constant(16, 0.8);
        for s in [SchemeKind::SemiImplicitBem, SchemeKind::ImplicitGm] {
            let f = residual(&SchemeConfig::new(s, fsm()), &g, &u, &u, 1e-3).unwrap();
            assert!(f.max_abs() < 1e-12, "{s}: {}", f.max_abs());
        }
    }

    #[test]
    fn dense_operator_oracle() {
        // a = 0, M = 1, Z = 0: F = (u - w)/dt + D4 u with D4 the dense
        // circulant built from its own definition. Midpoint mobility since u
        // changes sign and M = 1 makes the choice irrelevant.
        let n = 16;
        let l = 3.0;
        let g = PeriodicGrid::new(n, l).unwrap();
        let dx = l / n as f64;
        let dt = 0.01;
        let mut d1 = vec![vec![0.0; n]; n]; // backward difference
        for i in 0..n {
            d1[i][i] = 1.0 / dx;
            d1[i][(i + n - 1) % n] -= 1.0 / dx;
        }
        let mut d2 = vec![vec![0.0; n]; n];
        for i in 0..n {
            d2[i][(i + n - 1) % n] += 1.0 / (dx * dx);
            d2[i][i] -= 2.0 / (dx * dx);
            d2[i][(i + 1) % n] += 1.0 / (dx * dx);
        }
        let mul = |a: &Vec<Vec<f64>>, b: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect()).collect()
        };
        // q = D1 p, divergence uses forward difference = -D1^T.
        let fwd: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| -d1[j][i]).collect()).collect();
        let op = mul(&fwd, &mul(&d1, &d2));
        let u = g.sample(|x| (2.0 * PI * x / l).sin());
        let w = g.sample(|x| 0.9 * (2.0 * PI * x / l).sin() + 0.05 * (4.0 * PI * x / l).cos());
        let f = residual(&SchemeConfig::gm(unit()), &g, &u, &w, dt).unwrap();
        for i in 0..n {
            let expect = (u[i] - w[i]) / dt + (0..n).map(|j| op[i][j] * u[j]).sum::<f64>();
            assert!((f[i] - expect).abs() < 1e-9 * expect.abs().max(1.0), "{i}");
        }
    }

    #[test]
    fn flux_telescopes() {
        let mut rng = StdRng::seed_from_u64(9);
        let g = PeriodicGrid::new(40, 1.0).unwrap();
        let dt = 3e-3;
        let model = fsm();
        for s in [SchemeKind::SemiImplicitBem, SchemeKind::ImplicitGm] {
            for _ in 0..5 {
                let u = random_field(40, &mut rng);
                let w = random_field(40, &mut rng);
                let f = residual(&SchemeConfig::new(s, model.clone()), &g, &u, &w, dt).unwrap();
                let dx = g.dx();
                let lhs: f64 = f.iter().sum::<f64>() * dx;
                let rhs: f64 = (0..40)
                    .map(|i| 5.0 / (2.0 * dt) * (u[i] * u[i] - w[i] * w[i]) * dx + (u[i] - w[i]) * dx / dt)
                    .sum();
                let scale: f64 = f.iter().map(|v| v.abs()).sum::<f64>() * dx;
                assert!((lhs - rhs).abs() <= 1e-12 * scale.max(1.0), "{}", lhs - rhs);
            }
        }
    }

    fn fd_check(config: &SchemeConfig<f64>, n: usize, seed: u64) -> f64 {
        let mut rng = StdRng::seed_from_u64(seed);
        let g = PeriodicGrid::new(n, 1.0).unwrap();
        let u = random_field(n, &mut rng);
        let w = random_field(n, &mut rng);
        let dt = 1e-3;
        let j = jacobian(config, &g, &u, &w, dt).unwrap().to_dense();
        let scale = j.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut worst = 0.0f64;
        for c in 0..n {
            let h = 1e-6 * u[c].abs();
            let mut up = u.clone();
            let mut dn = u.clone();
            up[c] += h;
            dn[c] -= h;
            let fp = residual(config, &g, &up, &w, dt).unwrap();
            let fm = residual(config, &g, &dn, &w, dt).unwrap();
            for r in 0..n {
                let fd = (fp[r] - fm[r]) / (2.0 * h);
                let err = (fd - j[r][c]).abs() / j[r][c].abs().max(1e-3 * scale);
                worst = worst.max(err);
            }
        }
        worst
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        for s in [SchemeKind::SemiImplicitBem, SchemeKind::ImplicitGm] {
            for v in [MobilityVariant::IntegralMean, MobilityVariant::Midpoint] {
                let cfg = SchemeConfig::new(s, fsm()).with_mobility(MobilityDiscretization::for_variant(v));
                let e = fd_check(&cfg, 16, 3);
                assert!(e < 1e-6, "{s} {v:?}: {e}");
            }
        }
    }

    #[test]
    fn biharmonic_stencil_at_constant_state() {
        let n = 12;
        let g = PeriodicGrid::new(n, 1.5).unwrap();
        let dx = g.dx();
        let dt = 0.2;
        let u = Field::constant(n, 0.7);
        let j = jacobian(&SchemeConfig::bem(unit()), &g, &u, &u, dt).unwrap();
        let stencil = [1.0, -4.0, 6.0, -4.0, 1.0];
        for i in 0..n {
            for k in -2..=2isize {
                let mut expect = stencil[(k + 2) as usize] / dx.powi(4);
                if k == 0 {
                    expect += 1.0 / dt;
                }
                let got = j.at_offset(i, k);
                assert!((got - expect).abs() < 1e-9 * expect.abs(), "{i} {k}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn jacobian_sparsity() {
        let mut rng = StdRng::seed_from_u64(5);
        let n = 20;
        let g = PeriodicGrid::new(n, 1.0).unwrap();
        let u = random_field(n, &mut rng);
        let w = random_field(n, &mut rng);
        let cfg = SchemeConfig::gm(fsm());
        let base = residual(&cfg, &g, &u, &w, 1e-2).unwrap();
        for c in 0..n {
            let mut v = u.clone();
            v[c] += 1e-3;
            let f = residual(&cfg, &g, &v, &w, 1e-2).unwrap();
            for r in 0..n {
                let d = r.abs_diff(c).min(n - r.abs_diff(c));
                if d > 2 {
                    assert_eq!(f[r], base[r], "row {r} col {c}");
                }
            }
        }
    }

    #[test]
    fn nonpositive_height_reports_index() {
        let g = PeriodicGrid::new(10, 1.0).unwrap();
        let mut u = Field::constant(10, 1.0);
        u[6] = -0.01;
        let w = Field::constant(10, 1.0);
        let err = residual(&SchemeConfig::bem(fsm()), &g, &u, &w, 1e-3).unwrap_err();
        assert!(matches!(err, Error::Positivity { index: Some(6), .. }), "{err:?}");
    }

    #[test]
    fn scheme_names_parse() {
        assert_eq!("bem".parse::<SchemeKind>().unwrap(), SchemeKind::SemiImplicitBem);
        assert_eq!("Implicit-GM".parse::<SchemeKind>().unwrap(), SchemeKind::ImplicitGm);
        assert!("cn".parse::<SchemeKind>().is_err());
    }
}
