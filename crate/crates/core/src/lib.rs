//! Finite-difference solver for a thin liquid film flowing down a vertical
//! fiber,
//!
//! ```text
//! d/dt (h + a/2 h^2) + d/dx [ M(h) (1 + p_x) ] = 0,   p = h_xx - Z+(h) - Z-(h),
//! ```
//!
//! on a periodic interval. Two schemes are provided: the semi-implicit
//! bounded-entropy method (BEM), which uses an integral-mean mobility and
//! keeps the discrete film thickness positive, and the fully implicit
//! generic method (GM) with a midpoint mobility, which does not.
//!
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64` or `f32`.
//!
//! ```
//! use fibercoat::{builtin_scenario, NoObserver};
//!
//! let scenario = builtin_scenario::<f64>("adaptive_smooth").unwrap().with_t_end(0.01);
//! let mut sim = scenario.simulation().unwrap();
//! let out = sim.advance(scenario.t_end, &mut NoObserver).unwrap();
//! assert!(out.status.is_completed());
//! assert!(out.min_height > 0.0);
//! ```

pub mod assembly;
pub mod diagnostics;
pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod mobility;
pub mod model;
pub mod newton;
pub mod profile;
pub mod scalar;
pub mod scenarios;
pub mod stepper;

pub use assembly::{SchemeConfig, SchemeKind};
pub use diagnostics::{
    convergence_order, entropy_estimate_check, entropy_sum, entropy_value, l2_distance, l2_error, lipschitz, mass,
    restrict_fine_to_coarse, ConvergenceReport, ConvergenceStudy, DiagnosticsRecord, DiagnosticsTracker,
    EntropyReport, EntropySpec,
};
pub use error::{Error, Result};
pub use grid::{Field, PeriodicGrid};
pub use mobility::{MobilityDiscretization, MobilityVariant, Quadrature};
pub use model::{ModelFamily, ModelParams, PhysicalModel};
pub use newton::{newton_solve, NewtonConfig, NewtonOutcome};
pub use profile::{load_profile, ProfileOptions};
pub use scalar::Scalar;
pub use scenarios::{
    benchmark_cases, builtin_scenario, cpu_benchmark, dimensionalize, ic_perturbed_flat, BenchCase,
    DimensionalScaling, InitialCondition, Scenario,
};
pub use stepper::{
    NoObserver, RunObserver, RunOutcome, RunStatus, Simulation, StepController, StepRecord, SteppingMode,
};

pub type Field64 = Field<f64>;
pub type Field32 = Field<f32>;
pub type Grid64 = PeriodicGrid<f64>;
pub type Grid32 = PeriodicGrid<f32>;
pub type Model64 = PhysicalModel<f64>;
pub type Model32 = PhysicalModel<f32>;
pub type Scheme64 = SchemeConfig<f64>;
pub type Scheme32 = SchemeConfig<f32>;
pub type Controller64 = StepController<f64>;
pub type Controller32 = StepController<f32>;
pub type Simulation64 = Simulation<f64>;
pub type Simulation32 = Simulation<f32>;
pub type Scenario64 = Scenario<f64>;
pub type Scenario32 = Scenario<f32>;
