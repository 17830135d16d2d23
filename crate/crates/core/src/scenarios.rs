//! Built-in experiments, initial conditions and dimensional rescaling.

use std::path::PathBuf;

use crate::assembly::{SchemeConfig, SchemeKind};
use crate::diagnostics::restrict_fine_to_coarse;
use crate::error::{Error, Result};
use crate::grid::{Field, PeriodicGrid};
use crate::io::read_snapshot;
use crate::model::{ModelParams, PhysicalModel};
use crate::newton::NewtonConfig;
use crate::profile::{load_profile, ProfileOptions};
use crate::scalar::Scalar;
use crate::stepper::{NoObserver, RunObserver, Simulation, StepController};

pub use crate::profile::{fit_profile, ProfileFit};

/// Names accepted by [`builtin_scenario`].
pub const BUILTIN_NAMES: [&str; 8] = [
    "coarse_comparison",
    "rayleigh_plateau",
    "isolated_droplet",
    "adaptive_smooth",
    "adaptive_singular",
    "cpu_benchmark",
    "cpu_benchmark_200",
    "cpu_benchmark_400",
];

/// `h0(x_i) = hbar (1 + amplitude sin(pi x_i / L))`.
pub fn ic_perturbed_flat<T: Scalar>(grid: &PeriodicGrid<T>, hbar: T, amplitude: T) -> Result<Field<T>> {
    if !(hbar > T::zero()) {
        return Err(Error::invalid(format!("hbar must be positive, got {hbar}")));
    }
    if !(amplitude.abs() < T::one()) {
        return Err(Error::invalid(format!("perturbation amplitude must satisfy |a| < 1, got {amplitude}")));
    }
    let l = grid.length();
    Ok(grid.sample(|x| hbar * (T::one() + amplitude * (T::PI() * x / l).sin())))
}

/// Fine-grid run whose restricted end state seeds a coarse run.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinUp<T> {
    pub fine_points: usize,
    pub dt: T,
    pub t_end: T,
    pub scheme: SchemeKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition<T> {
    PerturbedFlat { hbar: T, amplitude: T },
    /// A snapshot file on the scenario grid.
    Snapshot(PathBuf),
    /// A measured profile fed through [`load_profile`].
    Profile { path: PathBuf, options: ProfileOptions },
    /// Perturbed flat state advanced on a finer grid, then restricted.
    SpinUp { hbar: T, amplitude: T, spin: SpinUp<T> },
    /// Needs a measured profile that is not bundled.
    ProfileRequired,
}

/// A fully specified run.
#[derive(Debug, Clone)]
pub struct Scenario<T> {
    pub name: String,
    pub model: PhysicalModel<T>,
    pub grid: PeriodicGrid<T>,
    pub initial_condition: InitialCondition<T>,
    pub scheme: SchemeConfig<T>,
    pub stepping: StepController<T>,
    pub newton: NewtonConfig<T>,
    pub t_start: T,
    pub t_end: T,
    /// Accepted steps between snapshots; 0 writes only the first and last.
    pub snapshot_stride: usize,
    pub stop_on_negative: bool,
    /// Free-form facts carried along for reports.
    pub metadata: Vec<(String, String)>,
}

impl<T: Scalar> Scenario<T> {
    /// Builds the initial field. Spin-up conditions are refused here because
    /// they are expensive; call [`Scenario::spin_up`] explicitly.
    pub fn initial_state(&self) -> Result<Field<T>> {
        let u = match &self.initial_condition {
            InitialCondition::PerturbedFlat { hbar, amplitude } => ic_perturbed_flat(&self.grid, *hbar, *amplitude)?,
            InitialCondition::Snapshot(path) => read_snapshot(path, &self.grid)?,
            InitialCondition::Profile { path, options } => load_profile(path, &self.grid, options)?,
            InitialCondition::SpinUp { spin, .. } => {
                return Err(Error::invalid(format!(
                    "scenario `{}` starts from a spin-up state ({} nodes, dt = {}, t = {}); run the spin-up \
                     command and pass the snapshot as the initial condition",
                    self.name, spin.fine_points, spin.dt, spin.t_end
                )))
            }
            InitialCondition::ProfileRequired => {
                return Err(Error::invalid(format!(
                    "scenario `{}` starts from a measured profile; supply a profile CSV",
                    self.name
                )))
            }
        };
        if let Some((i, v)) = u.argmin() {
            if !(v > T::zero()) {
                return Err(Error::Positivity { index: Some(i), value: v.as_f64() });
            }
        }
        Ok(u)
    }

    /// Runs the fine-grid spin-up and restricts its final state onto the
    /// scenario grid. The result corresponds to `t_start`.
    pub fn spin_up(&self, observer: &mut dyn RunObserver<T>) -> Result<Field<T>> {
        let InitialCondition::SpinUp { hbar, amplitude, spin } = &self.initial_condition else {
            return Err(Error::invalid(format!("scenario `{}` has no spin-up stage", self.name)));
        };
        if spin.fine_points != 2 * self.grid.n_points() {
            return Err(Error::invalid("spin-up grid must be exactly twice as fine"));
        }
        let fine = PeriodicGrid::new(spin.fine_points, self.grid.length())?;
        let u0 = ic_perturbed_flat(&fine, *hbar, *amplitude)?;
        let scheme = SchemeConfig::new(spin.scheme, self.model.clone());
        let mut sim = Simulation::new(scheme, fine, u0, StepController::fixed(spin.dt), self.newton)?.with_log(false);
        let out = sim.advance(spin.t_end, observer)?;
        if !out.status.is_completed() {
            return Err(Error::invalid(format!("spin-up ended early: {}", out.status.label())));
        }
        restrict_fine_to_coarse(&out.state)
    }

    /// A simulation positioned at the scenario's start.
    pub fn simulation(&self) -> Result<Simulation<T>> {
        self.simulation_from(self.initial_state()?)
    }

    pub fn simulation_from(&self, initial: Field<T>) -> Result<Simulation<T>> {
        Ok(Simulation::new(self.scheme.clone(), self.grid.clone(), initial, self.stepping.clone(), self.newton)?
            .with_start_time(self.t_start)
            .with_stop_on_negative(self.stop_on_negative))
    }

    /// Replaces the scheme, keeping the model. Benchmark scenarios stop GM
    /// runs at the first negative height.
    pub fn with_scheme(mut self, kind: SchemeKind) -> Self {
        self.scheme = SchemeConfig::new(kind, self.model.clone());
        if self.name.starts_with("cpu_benchmark") {
            self.stop_on_negative = kind == SchemeKind::ImplicitGm;
        }
        self
    }

    pub fn with_t_end(mut self, t_end: T) -> Self {
        self.t_end = t_end;
        self
    }

    /// Runs the scenario to `t_end` without observers.
    pub fn run(&self) -> Result<crate::stepper::RunOutcome<T>> {
        self.simulation()?.advance(self.t_end, &mut NoObserver)
    }

    fn note(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.push((key.to_string(), value.into()));
        self
    }
}

fn fsm<T: Scalar>(alpha: f64, eta: f64, a_h: f64) -> PhysicalModel<T> {
    PhysicalModel::fsm(ModelParams::new(T::lit(alpha), T::lit(eta), T::lit(a_h))).expect("built-in parameters are valid")
}

#[allow(clippy::too_many_arguments)]
fn flat<T: Scalar>(
    name: &str,
    model: PhysicalModel<T>,
    n: usize,
    length: f64,
    hbar: f64,
    kind: SchemeKind,
    stepping: StepController<T>,
    newton_tol: f64,
    t_end: f64,
) -> Scenario<T> {
    Scenario {
        name: name.to_string(),
        grid: PeriodicGrid::new(n, T::lit(length)).expect("built-in grid is valid"),
        initial_condition: InitialCondition::PerturbedFlat { hbar: T::lit(hbar), amplitude: T::lit(0.01) },
        scheme: SchemeConfig::new(kind, model.clone()),
        model,
        stepping,
        newton: NewtonConfig::with_tolerance(T::lit(newton_tol)),
        t_start: T::zero(),
        t_end: T::lit(t_end),
        snapshot_stride: 0,
        stop_on_negative: false,
        metadata: Vec::new(),
    }
}

/// Newton tolerance for fixed-step runs, which have no LTE tolerance to
/// pass down.
pub const FIXED_STEP_NEWTON_TOLERANCE: f64 = 1e-6;

/// One of the built-in experiments.
///
/// | name | model (a, eta, A_H) | grid | stepping |
/// |---|---|---|---|
/// | `coarse_comparison` | 10.6, 0.223227, 1e-3 | 3072 on [0, 24] | fixed 0.1, t in [610, 655] from a 6144-node spin-up |
/// | `rayleigh_plateau` | 5.8856, 0.2912, 1e-11 | 1000 on [0, 5] | adaptive, 1e-3 <= dt <= 1e-2, to 250.006 |
/// | `isolated_droplet` | 3.092621559, 0.123, 4e-2 | 1999 on [0, 39.338] | adaptive, 1e-3 <= dt <= 1e-2, to 827.807 (BEM) |
/// | `adaptive_smooth` | 5, 0.02, 1e-5 | 100 on [0, 1] | adaptive, dt0 = 1e-3, tol1 = 0.1, to 1 |
/// | `adaptive_singular` | 5, 0.005, 0 | 100 on [0, 1] | as above |
/// | `cpu_benchmark[_200/_400]` | 5, 0.005, 0 | 100/200/400 on [0, 1] | fixed 1e-3, to 3.5 |
pub fn builtin_scenario<T: Scalar>(name: &str) -> Result<Scenario<T>> {
    let s = match name {
        "coarse_comparison" => {
            let mut s = flat(
                name,
                fsm(10.6, 0.223227, 0.001),
                3072,
                24.0,
                1.471,
                SchemeKind::SemiImplicitBem,
                StepController::fixed(T::lit(0.1)),
                FIXED_STEP_NEWTON_TOLERANCE,
                655.0,
            );
            s.initial_condition = InitialCondition::SpinUp {
                hbar: T::lit(1.471),
                amplitude: T::lit(0.01),
                spin: SpinUp { fine_points: 6144, dt: T::lit(1e-4), t_end: T::lit(610.0), scheme: SchemeKind::ImplicitGm },
            };
            s.t_start = T::lit(610.0);
            s.note("gm_first_negative_time", "650.05")
                .note("gm_newton_failure_time", "650")
                .note("l2_error_bem", "2.0116")
                .note("l2_error_gm", "2.5999")
        }
        "rayleigh_plateau" => flat(
            name,
            fsm(5.8856, 0.2912, 1e-11),
            1000,
            5.0,
            0.9568,
            SchemeKind::SemiImplicitBem,
            adaptive_bounded(),
            1e-3,
            250.006,
        )
        .note("flow_rate_g_per_s", "0.08"),
        "isolated_droplet" => {
            let mut s = flat(
                name,
                fsm(3.092621559, 0.123, 4.0e-2),
                1999,
                39.338,
                1.0,
                SchemeKind::SemiImplicitBem,
                adaptive_bounded(),
                1e-3,
                827.8070,
            );
            s.initial_condition = InitialCondition::ProfileRequired;
            s.note("t_end_bem", "827.8070")
                .note("t_end_gm", "807.107")
                .note("flow_rate_g_per_s_text", "0.006")
                .note("flow_rate_g_per_s_caption", "0.06")
        }
        "adaptive_smooth" => flat(
            name,
            fsm(5.0, 0.02, 1e-5),
            100,
            1.0,
            0.95,
            SchemeKind::SemiImplicitBem,
            StepController::adaptive(T::lit(1e-3), T::lit(0.1)).with_count_max(3),
            0.1,
            1.0,
        ),
        "adaptive_singular" => flat(
            name,
            fsm(5.0, 0.005, 0.0),
            100,
            1.0,
            0.95,
            SchemeKind::SemiImplicitBem,
            StepController::adaptive(T::lit(1e-3), T::lit(0.1)).with_count_max(3),
            0.1,
            1.0,
        ),
        "cpu_benchmark" => cpu_benchmark(100, SchemeKind::SemiImplicitBem, false, 3.5),
        "cpu_benchmark_200" => cpu_benchmark(200, SchemeKind::SemiImplicitBem, false, 3.5),
        "cpu_benchmark_400" => cpu_benchmark(400, SchemeKind::SemiImplicitBem, false, 3.5),
        other => return Err(Error::UnknownScenario(other.to_string())),
    };
    Ok(s)
}

fn adaptive_bounded<T: Scalar>() -> StepController<T> {
    StepController::adaptive(T::lit(1e-3), T::lit(1e-3))
        .with_count_max(3)
        .with_dt_bounds(Some(T::lit(1e-3)), Some(T::lit(1e-2)))
}

/// The positivity benchmark: `h0 = 0.45 (1 + 0.01 sin(pi x))` on `[0, 1]`
/// with `a = 5, eta = 0.005, A_H = 0`. Fixed runs use `dt = 1e-3`; adaptive
/// runs start there with `tol1 = 1e-3`. GM runs stop at the first negative
/// height.
pub fn cpu_benchmark<T: Scalar>(n: usize, kind: SchemeKind, adaptive: bool, t_end: f64) -> Scenario<T> {
    let (stepping, tol) = if adaptive {
        (StepController::adaptive(T::lit(1e-3), T::lit(1e-3)).with_count_max(3), 1e-3)
    } else {
        (StepController::fixed(T::lit(1e-3)), FIXED_STEP_NEWTON_TOLERANCE)
    };
    let name = if n == 100 { "cpu_benchmark".to_string() } else { format!("cpu_benchmark_{n}") };
    let mut s = flat(&name, fsm(5.0, 0.005, 0.0), n, 1.0, 0.45, kind, stepping, tol, t_end);
    s.stop_on_negative = kind == SchemeKind::ImplicitGm;
    s
}

/// One row of the benchmark table.
#[derive(Debug, Clone)]
pub struct BenchCase<T> {
    pub label: String,
    pub scenario: Scenario<T>,
    /// Reported GM failure time for this grid, used as the BEM horizon.
    pub horizon: f64,
}

/// The nine benchmark rows: GM fixed, BEM fixed and BEM adaptive on each of
/// the three grids. GM rows run until their first negative height (at most
/// to `gm_limit`); BEM rows run to the reported GM failure time.
pub fn benchmark_cases<T: Scalar>(gm_limit: f64) -> Vec<BenchCase<T>> {
    let mut out = Vec::new();
    for (n, horizon) in [(100, 0.299), (200, 1.096), (400, 3.477)] {
        let dx = 1.0 / n as f64;
        out.push(BenchCase {
            label: format!("GM dx = {dx} fixed"),
            scenario: cpu_benchmark(n, SchemeKind::ImplicitGm, false, gm_limit),
            horizon,
        });
        out.push(BenchCase {
            label: format!("BEM dx = {dx} fixed"),
            scenario: cpu_benchmark(n, SchemeKind::SemiImplicitBem, false, horizon),
            horizon,
        });
        out.push(BenchCase {
            label: format!("BEM dx = {dx} adaptive"),
            scenario: cpu_benchmark(n, SchemeKind::SemiImplicitBem, true, horizon),
            horizon,
        });
    }
    out
}

/// Linear scales back to laboratory units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimensionalScaling {
    /// Axial length per dimensionless unit.
    pub length_scale: f64,
    /// Radial height per dimensionless unit.
    pub height_scale: f64,
    /// Time per dimensionless unit.
    pub time_scale: f64,
}

impl DimensionalScaling {
    pub fn new(length_scale: f64, height_scale: f64, time_scale: f64) -> Result<Self> {
        let s = Self { length_scale, height_scale, time_scale };
        for (what, v) in [("length", length_scale), ("height", height_scale), ("time", time_scale)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{what} scale must be positive, got {v}")));
            }
        }
        Ok(s)
    }

    pub fn identity() -> Self {
        Self { length_scale: 1.0, height_scale: 1.0, time_scale: 1.0 }
    }
}

/// A snapshot in laboratory units.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionalSnapshot {
    pub t: f64,
    pub x: Vec<f64>,
    pub h: Vec<f64>,
}

/// `x -> x L, h -> h H, t -> t T`.
pub fn dimensionalize<T: Scalar>(
    grid: &PeriodicGrid<T>,
    t: T,
    u: &Field<T>,
    scaling: &DimensionalScaling,
) -> Result<DimensionalSnapshot> {
    grid.check(u)?;
    Ok(DimensionalSnapshot {
        t: t.as_f64() * scaling.time_scale,
        x: grid.nodes().map(|x| x.as_f64() * scaling.length_scale).collect(),
        h: u.iter().map(|h| h.as_f64() * scaling.height_scale).collect(),
    })
}

/// Inverse of [`dimensionalize`].
pub fn nondimensionalize(snapshot: &DimensionalSnapshot, scaling: &DimensionalScaling) -> DimensionalSnapshot {
    DimensionalSnapshot {
        t: snapshot.t / scaling.time_scale,
        x: snapshot.x.iter().map(|x| x / scaling.length_scale).collect(),
        h: snapshot.h.iter().map(|h| h / scaling.height_scale).collect(),
    }
}
