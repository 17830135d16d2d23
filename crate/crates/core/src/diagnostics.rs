//! Run-time diagnostics: mass, entropy and its a-priori bound, positivity
//! and Lipschitz monitors, error norms and self-convergence studies.
//!
//! The entropy is
//!
//! ```text
//! G(h) = int_B^h (1 + a v) int_A^v ds / M(s) dv
//! ```
//!
//! and for a positive solution of the entropy-stable scheme
//! `sum G(u(T)) dx <= sum G(u(0)) dx + int_0^T sum (Z-(u)/2)^2 dx dt`.

use crate::assembly::SchemeConfig;
use crate::error::{Error, Result};
use crate::grid::{l2_norm, Field, PeriodicGrid};
use crate::model::PhysicalModel;
use crate::newton::NewtonConfig;
use crate::scalar::Scalar;
use crate::stepper::{RunObserver, RunStatus, Simulation, StepController, StepRecord};

/// One row of the diagnostics log.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord<T> {
    pub t: T,
    pub mass: T,
    /// `sum G(u) dx`; `None` if the state is not positive.
    pub entropy: Option<T>,
    /// `sum G(u0) dx` plus the accumulated `Z-` integral; `None` if the
    /// initial entropy is undefined.
    pub entropy_bound: Option<T>,
    pub min_height: T,
    pub lipschitz: T,
    /// Step that produced this state; zero for the initial record.
    pub dt: T,
    pub newton_iters: usize,
}

impl<T: Scalar> DiagnosticsRecord<T> {
    /// `bound - entropy` when both are defined.
    pub fn slack(&self) -> Option<T> {
        Some(self.entropy_bound? - self.entropy?)
    }
}

/// Base points and accuracy of the entropy integral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropySpec<T> {
    /// Lower limit `A` of the inner integral.
    pub base_point_a: T,
    /// Lower limit `B` of the outer integral.
    pub outer_base_b: T,
    /// Relative quadrature tolerance.
    pub tolerance: T,
}

impl<T: Scalar> Default for EntropySpec<T> {
    fn default() -> Self {
        Self { base_point_a: T::one(), outer_base_b: T::one(), tolerance: T::lit(1e-10) }
    }
}

impl<T: Scalar> EntropySpec<T> {
    pub fn validate(&self) -> Result<()> {
        if !(self.base_point_a > T::zero()) || !(self.outer_base_b > T::zero()) {
            return Err(Error::invalid("entropy base points must be positive"));
        }
        if !(self.tolerance > T::zero()) {
            return Err(Error::invalid("entropy tolerance must be positive"));
        }
        Ok(())
    }
}

/// `sum (u + a/2 u^2) dx`.
pub fn mass<T: Scalar>(grid: &PeriodicGrid<T>, u: &Field<T>, alpha: T) -> T {
    let half = T::lit(0.5);
    u.iter().map(|&v| v + half * alpha * v * v).sum::<T>() * grid.dx()
}

/// `max |u_{i+1} - u_i| / dx`.
pub fn lipschitz<T: Scalar>(grid: &PeriodicGrid<T>, u: &Field<T>) -> T {
    let n = u.len();
    (0..n).map(|i| (u[(i + 1) % n] - u[i]).abs()).fold(T::zero(), T::max) / grid.dx()
}

/// `sum (Z-(u)/2)^2 dx`.
pub fn z_minus_energy<T: Scalar>(model: &PhysicalModel<T>, grid: &PeriodicGrid<T>, u: &Field<T>) -> Result<T> {
    let half = T::lit(0.5);
    let mut acc = T::zero();
    for &v in u.iter() {
        let z = model.z_minus(v)?.0 * half;
        acc = acc + z * z;
    }
    Ok(acc * grid.dx())
}

/// Entropy density `G(h)`.
///
/// Integrating by parts with `P(v) = v + a v^2 / 2` gives
/// `G(h) = int_B^h (P(h) - P(v)) / M(v) dv + (P(h) - P(B)) int_A^B ds / M(s)`,
/// a single integral whose integrand has one sign. It is evaluated by
/// adaptive Simpson in `ln v`.
pub fn entropy_value<T: Scalar>(model: &PhysicalModel<T>, spec: &EntropySpec<T>, h: T) -> Result<T> {
    spec.validate()?;
    if !(h > T::zero()) {
        return Err(Error::Positivity { index: None, value: h.as_f64() });
    }
    let a = model.alpha();
    let half = T::lit(0.5);
    // P(h) - P(v) without cancellation.
    let dp = |v: T| (h - v) * (T::one() + half * a * (h + v));
    let b = spec.outer_base_b;
    let main = log_integral(|v| dp(v) * v / model.mobility_raw(v), b, h, spec.tolerance)?;
    let shift = if spec.base_point_a == b {
        T::zero()
    } else {
        dp(b) * log_integral(|v| v / model.mobility_raw(v), spec.base_point_a, b, spec.tolerance)?
    };
    Ok(main + shift)
}

/// `sum G(u_i) dx`.
pub fn entropy_sum<T: Scalar>(
    model: &PhysicalModel<T>,
    spec: &EntropySpec<T>,
    grid: &PeriodicGrid<T>,
    u: &Field<T>,
) -> Result<T> {
    let mut acc = T::zero();
    for (i, &v) in u.iter().enumerate() {
        acc = acc
            + entropy_value(model, spec, v).map_err(|e| match e {
                Error::Positivity { value, .. } => Error::Positivity { index: Some(i), value },
                other => other,
            })?;
    }
    Ok(acc * grid.dx())
}

/// `int_lo^hi f(v) dv / v` with the substitution `v = e^s`, signed.
fn log_integral<T: Scalar>(f: impl Fn(T) -> T, lo: T, hi: T, tol: T) -> Result<T> {
    if lo == hi {
        return Ok(T::zero());
    }
    let (s0, s1) = (lo.ln(), hi.ln());
    let g = |s: T| f(s.exp());
    let panels = 8;
    let w = (s1 - s0) / T::lit(panels as f64);
    let mut total = T::zero();
    for k in 0..panels {
        let a = s0 + w * T::lit(k as f64);
        let b = if k + 1 == panels { s1 } else { a + w };
        let (fa, fb) = (g(a), g(b));
        let m = T::lit(0.5) * (a + b);
        let fm = g(m);
        let whole = simpson(a, b, fa, fm, fb);
        total = total + adaptive_simpson(&g, a, b, fa, fm, fb, whole, tol, 48);
    }
    if total.is_finite() {
        Ok(total)
    } else {
        Err(Error::Domain { what: "entropy integral", value: hi.as_f64() })
    }
}

fn simpson<T: Scalar>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

// Per-panel relative tolerance. The integrands used here keep one sign, so
// the relative error of the sum is bounded by the same tolerance.
#[allow(clippy::too_many_arguments)]
fn adaptive_simpson<T: Scalar>(g: &impl Fn(T) -> T, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> T {
    let half = T::lit(0.5);
    let m = half * (a + b);
    let (lm, rm) = (half * (a + m), half * (m + b));
    let (flm, frm) = (g(lm), g(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::lit(15.0) * tol * (left + right).abs() || !delta.is_finite() {
        return left + right + delta / T::lit(15.0);
    }
    adaptive_simpson(g, a, m, fa, flm, fm, left, tol, depth - 1)
        + adaptive_simpson(g, m, b, fm, frm, fb, right, tol, depth - 1)
}

/// Average l2 error `(1/L) sum (u_i - u*_i)^2`.
///
/// This is the mean-of-squares quantity reported for the coarse/fine
/// comparison: there is no `dx` weight and no square root. Use
/// [`l2_distance`] for a conventional norm.
pub fn l2_error<T: Scalar>(u: &Field<T>, reference: &Field<T>, length: T) -> Result<T> {
    same_len(u, reference)?;
    if !(length > T::zero()) {
        return Err(Error::invalid("domain length must be positive"));
    }
    Ok(u.iter().zip(reference.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>() / length)
}

/// `sqrt(sum (u_i - v_i)^2 dx)`.
pub fn l2_distance<T: Scalar>(grid: &PeriodicGrid<T>, u: &Field<T>, v: &Field<T>) -> Result<T> {
    same_len(u, v)?;
    grid.check(u)?;
    let d = Field::new(u.iter().zip(v.iter()).map(|(&a, &b)| a - b).collect());
    Ok(l2_norm(grid, &d))
}

fn same_len<T>(a: &Field<T>, b: &Field<T>) -> Result<()>
where
    T: Scalar,
{
    if a.len() != b.len() {
        return Err(Error::LengthMismatch { expected: a.len(), got: b.len() });
    }
    Ok(())
}

/// Keeps the even-indexed samples of a field on a grid twice as fine.
pub fn restrict_fine_to_coarse<T: Scalar>(u_fine: &Field<T>) -> Result<Field<T>> {
    if u_fine.is_empty() || u_fine.len() % 2 != 0 {
        return Err(Error::LengthMismatch { expected: u_fine.len() + u_fine.len() % 2, got: u_fine.len() });
    }
    Ok(Field::new(u_fine.iter().step_by(2).copied().collect()))
}

/// Outcome of [`entropy_estimate_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct EntropyReport<T> {
    /// Smallest `bound - entropy` over the checked states.
    pub min_slack: T,
    /// `min_slack` relative to the bound at the same state.
    pub min_relative_slack: T,
    /// States whose slack is below `-tolerance * |bound|`.
    pub violations: usize,
    /// States where the entropy is undefined (nonpositive heights).
    pub undefined: usize,
    pub checked: usize,
}

impl<T: Scalar> EntropyReport<T> {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.undefined == 0
    }
}

/// Checks the discrete entropy estimate along a history of `(t, u)` pairs,
/// the first being the initial state. The `Z-` time integral uses the
/// trapezoid rule between consecutive entries.
pub fn entropy_estimate_check<T: Scalar>(
    history: &[(T, Field<T>)],
    model: &PhysicalModel<T>,
    spec: &EntropySpec<T>,
    grid: &PeriodicGrid<T>,
    tolerance: T,
) -> EntropyReport<T> {
    let mut report = EntropyReport {
        min_slack: T::infinity(),
        min_relative_slack: T::infinity(),
        violations: 0,
        undefined: 0,
        checked: 0,
    };
    let Some((t0, u0)) = history.first() else {
        return report;
    };
    let Ok(g0) = entropy_sum(model, spec, grid, u0) else {
        report.undefined = history.len();
        return report;
    };
    let mut acc = BoundAccumulator::new(*t0, z_minus_energy(model, grid, u0).ok());
    for (t, u) in history {
        acc.push(*t, z_minus_energy(model, grid, u).ok());
        match (entropy_sum(model, spec, grid, u), acc.integral) {
            (Ok(g), Some(z)) => {
                let bound = g0 + z;
                report.note(bound, g, tolerance);
            }
            _ => report.undefined += 1,
        }
    }
    report
}

impl<T: Scalar> EntropyReport<T> {
    fn note(&mut self, bound: T, entropy: T, tolerance: T) {
        let slack = bound - entropy;
        let scale = bound.abs().max(T::min_positive_value());
        self.checked += 1;
        self.min_slack = self.min_slack.min(slack);
        self.min_relative_slack = self.min_relative_slack.min(slack / scale);
        if slack < -tolerance * scale {
            self.violations += 1;
        }
    }
}

/// Trapezoid accumulation of `int sum (Z-/2)^2 dx dt`.
#[derive(Debug, Clone, PartialEq)]
struct BoundAccumulator<T> {
    t: T,
    last: Option<T>,
    integral: Option<T>,
}

impl<T: Scalar> BoundAccumulator<T> {
    fn new(t0: T, z0: Option<T>) -> Self {
        Self { t: t0, last: z0, integral: z0.map(|_| T::zero()) }
    }

    fn push(&mut self, t: T, z: Option<T>) {
        self.integral = match (self.integral, self.last, z) {
            (Some(i), Some(a), Some(b)) => Some(i + T::lit(0.5) * (t - self.t) * (a + b)),
            _ => None,
        };
        self.t = t;
        self.last = z;
    }
}

/// Observer that builds [`DiagnosticsRecord`]s during a run.
///
/// The mass, minimum, Lipschitz constant and `Z-` integral are updated on
/// every accepted step; a record (including the entropy, which costs one
/// quadrature per node) is stored every `stride` accepted steps and at the
/// first state with a negative height.
#[derive(Debug, Clone)]
pub struct DiagnosticsTracker<T> {
    model: PhysicalModel<T>,
    grid: PeriodicGrid<T>,
    spec: EntropySpec<T>,
    stride: usize,
    with_entropy: bool,
    steps: usize,
    initial_entropy: Option<T>,
    bound: Option<BoundAccumulator<T>>,
    records: Vec<DiagnosticsRecord<T>>,
    pending: Option<(T, Field<T>, T, usize)>,
    negative_seen: bool,
}

impl<T: Scalar> DiagnosticsTracker<T> {
    pub fn new(model: PhysicalModel<T>, grid: PeriodicGrid<T>) -> Self {
        Self {
            model,
            grid,
            spec: EntropySpec::default(),
            stride: 1,
            with_entropy: true,
            steps: 0,
            initial_entropy: None,
            bound: None,
            records: Vec::new(),
            pending: None,
            negative_seen: false,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride.max(1);
        self
    }

    pub fn with_spec(mut self, spec: EntropySpec<T>) -> Self {
        self.spec = spec;
        self
    }

    /// Skips the entropy quadrature; records then carry `None` entropies.
    pub fn without_entropy(mut self) -> Self {
        self.with_entropy = false;
        self
    }

    pub fn records(&self) -> &[DiagnosticsRecord<T>] {
        &self.records
    }

    pub fn into_records(mut self) -> Vec<DiagnosticsRecord<T>> {
        self.flush();
        self.records
    }

    /// Records the most recent accepted state if the stride skipped it.
    pub fn flush(&mut self) {
        if let Some((t, u, dt, iters)) = self.pending.take() {
            let r = self.record(t, &u, dt, iters);
            self.records.push(r);
        }
    }

    /// Smallest `(bound - entropy) / |bound|` over the records.
    pub fn min_relative_slack(&self) -> Option<T> {
        self.records
            .iter()
            .filter_map(|r| Some(r.slack()? / r.entropy_bound?.abs().max(T::min_positive_value())))
            .reduce(T::min)
    }

    /// Largest ratio of a record's Lipschitz constant to the median of all
    /// records up to it.
    pub fn lipschitz_growth(&self) -> T {
        let mut seen: Vec<T> = Vec::with_capacity(self.records.len());
        let mut worst = T::zero();
        for r in &self.records {
            seen.push(r.lipschitz);
            let mut sorted = seen.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            let med = sorted[sorted.len() / 2];
            if med > T::zero() {
                worst = worst.max(r.lipschitz / med);
            }
        }
        worst
    }

    fn record(&self, t: T, u: &Field<T>, dt: T, newton_iters: usize) -> DiagnosticsRecord<T> {
        let entropy = if self.with_entropy { entropy_sum(&self.model, &self.spec, &self.grid, u).ok() } else { None };
        let integral = self.bound.as_ref().and_then(|b| b.integral);
        let entropy_bound = match (self.with_entropy, self.initial_entropy, integral) {
            (true, Some(g0), Some(z)) => Some(g0 + z),
            _ => None,
        };
        DiagnosticsRecord {
            t,
            mass: mass(&self.grid, u, self.model.alpha()),
            entropy,
            entropy_bound,
            min_height: u.min(),
            lipschitz: lipschitz(&self.grid, u),
            dt,
            newton_iters,
        }
    }
}

impl<T: Scalar> RunObserver<T> for DiagnosticsTracker<T> {
    fn on_start(&mut self, t: T, state: &Field<T>) -> Result<()> {
        self.grid.check(state)?;
        if self.with_entropy {
            self.initial_entropy = entropy_sum(&self.model, &self.spec, &self.grid, state).ok();
        }
        self.bound = Some(BoundAccumulator::new(t, z_minus_energy(&self.model, &self.grid, state).ok()));
        let r = self.record(t, state, T::zero(), 0);
        self.records.push(r);
        Ok(())
    }

    fn on_accept(&mut self, t: T, state: &Field<T>, record: &StepRecord<T>) -> Result<()> {
        let z = z_minus_energy(&self.model, &self.grid, state).ok();
        if let Some(b) = self.bound.as_mut() {
            b.push(t, z);
        }
        self.steps += 1;
        let first_negative = !self.negative_seen && state.min() < T::zero();
        self.negative_seen |= first_negative;
        if self.steps % self.stride == 0 || first_negative {
            self.pending = None;
            let r = self.record(t, state, record.dt_used, record.newton_iterations);
            self.records.push(r);
        } else {
            self.pending = Some((t, state.clone(), record.dt_used, record.newton_iterations));
        }
        Ok(())
    }
}

/// Result of a self-convergence or exact-solution refinement study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport<T> {
    pub points: Vec<usize>,
    /// Distances between consecutive grids (self-convergence) or to the
    /// exact solution, one per grid.
    pub differences: Vec<T>,
    /// `log2` ratios of consecutive differences.
    pub orders: Vec<T>,
    /// Last entry of `orders`.
    pub observed_order: T,
    /// False if a run did not complete, a difference is not finite, or the
    /// differences fail to decrease.
    pub stable: bool,
    pub note: Option<String>,
}

/// Grid-refinement study with a fixed time step.
#[derive(Debug, Clone)]
pub struct ConvergenceStudy<T> {
    pub scheme: SchemeConfig<T>,
    pub length: T,
    /// Node counts, each twice the previous.
    pub points: Vec<usize>,
    pub dt: T,
    pub t_check: T,
    pub newton: NewtonConfig<T>,
}

impl<T: Scalar> ConvergenceStudy<T> {
    fn validate(&self, min_grids: usize) -> Result<()> {
        if self.points.len() < min_grids {
            return Err(Error::invalid(format!("need at least {min_grids} grids")));
        }
        if self.points.windows(2).any(|w| w[1] != 2 * w[0]) {
            return Err(Error::invalid("grids must refine by exactly 2"));
        }
        Ok(())
    }

    fn solve(&self, n: usize, ic: &dyn Fn(&PeriodicGrid<T>) -> Result<Field<T>>) -> Result<(Field<T>, Option<String>)> {
        let grid = PeriodicGrid::new(n, self.length)?;
        let u0 = ic(&grid)?;
        let mut sim = Simulation::new(self.scheme.clone(), grid, u0, StepController::fixed(self.dt), self.newton)?
            .with_log(false);
        let out = sim.advance(self.t_check, &mut crate::stepper::NoObserver)?;
        let note = match out.status {
            RunStatus::Completed if out.failed_attempts == 0 => None,
            RunStatus::Completed => Some(format!("N = {n}: {} Newton failures", out.failed_attempts)),
            s => Some(format!("N = {n}: {}", s.label())),
        };
        Ok((out.state, note))
    }

    /// Self-convergence: differences between each grid and the next finer
    /// one restricted onto it.
    pub fn run(&self, ic: impl Fn(&PeriodicGrid<T>) -> Result<Field<T>>) -> Result<ConvergenceReport<T>> {
        self.validate(3)?;
        let mut sols = Vec::new();
        let mut notes = Vec::new();
        for &n in &self.points {
            let (u, note) = self.solve(n, &ic)?;
            notes.extend(note);
            sols.push(u);
        }
        let mut diffs = Vec::new();
        for (k, w) in sols.windows(2).enumerate() {
            let grid = PeriodicGrid::new(self.points[k], self.length)?;
            diffs.push(l2_distance(&grid, &w[0], &restrict_fine_to_coarse(&w[1])?)?);
        }
        Ok(self.report(diffs, notes))
    }

    /// Errors against an exact solution sampled on each grid.
    pub fn run_against_exact(
        &self,
        ic: impl Fn(&PeriodicGrid<T>) -> Result<Field<T>>,
        exact: impl Fn(&PeriodicGrid<T>) -> Field<T>,
    ) -> Result<ConvergenceReport<T>> {
        self.validate(2)?;
        let mut diffs = Vec::new();
        let mut notes = Vec::new();
        for &n in &self.points {
            let (u, note) = self.solve(n, &ic)?;
            notes.extend(note);
            let grid = PeriodicGrid::new(n, self.length)?;
            diffs.push(l2_distance(&grid, &u, &exact(&grid))?);
        }
        Ok(self.report(diffs, notes))
    }

    fn report(&self, diffs: Vec<T>, mut notes: Vec<String>) -> ConvergenceReport<T> {
        let orders: Vec<T> = diffs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
        let observed_order = orders.last().copied().unwrap_or(T::nan());
        let decreasing = diffs.windows(2).all(|w| w[1] < w[0]);
        let finite = diffs.iter().chain(orders.iter()).all(|v| v.is_finite());
        if !decreasing {
            notes.push("differences do not decrease under refinement".into());
        }
        if !finite {
            notes.push("non-finite difference".into());
        }
        ConvergenceReport {
            points: self.points.clone(),
            differences: diffs,
            orders,
            observed_order,
            stable: notes.is_empty(),
            note: if notes.is_empty() { None } else { Some(notes.join("; ")) },
        }
    }
}

/// Observed spatial order from a self-convergence study.
pub fn convergence_order<T: Scalar>(
    study: &ConvergenceStudy<T>,
    ic: impl Fn(&PeriodicGrid<T>) -> Result<Field<T>>,
) -> Result<ConvergenceReport<T>> {
    study.run(ic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    fn power(n: f64, alpha: f64) -> PhysicalModel<f64> {
        PhysicalModel::power_law(ModelParams::new(alpha, 1.0, 0.0).with_mobility_order(n), false).unwrap()
    }

    #[test]
    fn entropy_vanishes_at_base_point() {
        let m = power(3.0, 2.0);
        assert_eq!(entropy_value(&m, &EntropySpec::default(), 1.0).unwrap(), 0.0);
    }

    #[test]
    fn entropy_matches_power_law_closed_forms() {
        let spec = EntropySpec::default();
        for &alpha in &[0.0, 0.7] {
            for &h in &[1e-3, 0.01, 0.3, 1.7, 5.0] {
                let g2 = (1.0 - alpha) * (h - 1.0) + alpha * (h * h - 1.0) / 2.0 - f64::ln(h);
                let g3 = 0.5 * ((h - 1.0) + (1.0 / h - 1.0) + alpha * (h * h - 1.0) / 2.0 - alpha * h.ln());
                let v2 = entropy_value(&power(2.0, alpha), &spec, h).unwrap();
                let v3 = entropy_value(&power(3.0, alpha), &spec, h).unwrap();
                assert!((v2 - g2).abs() <= 1e-9 * g2.abs().max(1.0), "n=2 a={alpha} h={h}: {v2} vs {g2}");
                assert!((v3 - g3).abs() <= 1e-9 * g3.abs().max(1.0), "n=3 a={alpha} h={h}: {v3} vs {g3}");
            }
        }
    }

    #[test]
    fn entropy_leading_terms() {
        let spec = EntropySpec::default();
        let h = 0.01;
        let g3 = entropy_value(&power(3.0, 0.0), &spec, h).unwrap();
        assert!((g3 / (0.5 / h) - 1.0).abs() < 0.02);
        for &h in &[1e-6, 1e-9] {
            let g2 = entropy_value(&power(2.0, 0.0), &spec, h).unwrap();
            assert!((g2 / -f64::ln(h) - 1.0).abs() < 0.1);
        }
    }

    #[test]
    fn entropy_rejects_nonpositive_height() {
        let m = power(2.0, 0.0);
        assert!(matches!(entropy_value(&m, &EntropySpec::default(), 0.0), Err(Error::Positivity { .. })));
        assert!(entropy_value(&m, &EntropySpec::default(), -1.0).is_err());
    }

    #[test]
    fn mass_and_lipschitz_of_simple_fields() {
        let g = PeriodicGrid::<f64>::new(10, 2.0).unwrap();
        let u = Field::constant(10, 0.5);
        assert!((mass(&g, &u, 4.0) - (0.5 + 2.0 * 0.25) * 2.0).abs() < 1e-14);
        assert!((mass(&g, &u, 0.0) - 1.0).abs() < 1e-14);
        assert_eq!(lipschitz(&g, &u), 0.0);
        let mut v = u.clone();
        v[9] = 0.7;
        assert!((lipschitz(&g, &v) - 0.2 / 0.2).abs() < 1e-12);
    }

    #[test]
    fn l2_error_is_mean_of_squares_over_length() {
        let u = Field::<f64>::constant(8, 1.0);
        let v = Field::constant(8, 1.25);
        assert_eq!(l2_error(&u, &u, 3.0).unwrap(), 0.0);
        assert!((l2_error(&u, &v, 2.0).unwrap() - 8.0 * 0.0625 / 2.0).abs() < 1e-15);
        assert!(l2_error(&u, &Field::constant(9, 1.0), 2.0).is_err());
    }

    #[test]
    fn restriction_keeps_even_samples() {
        let f = Field::new(vec![1.0, 2.0, 3.0, 4.0]);
        assert_eq!(restrict_fine_to_coarse(&f).unwrap().into_vec(), vec![1.0, 3.0]);
        assert!(restrict_fine_to_coarse(&Field::new(vec![1.0, 2.0, 3.0])).is_err());
    }

    #[test]
    fn bound_accumulator_is_trapezoid() {
        let mut b = BoundAccumulator::<f64>::new(0.0, Some(1.0));
        b.push(0.5, Some(3.0));
        b.push(1.5, Some(1.0));
        assert!((b.integral.unwrap() - (0.5 * 2.0 + 1.0 * 2.0)).abs() < 1e-15);
        b.push(2.0, None);
        assert_eq!(b.integral, None);
    }
}
