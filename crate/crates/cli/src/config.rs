//! TOML run configuration.
//!
//! A config either names a built-in scenario and overrides parts of it, or
//! spells everything out. Every section is optional when `scenario` is set.
//!
//! ```toml
//! scenario = "adaptive_singular"
//!
//! [model]
//! family = "fsm"          # fsm | cm | power_law | constant
//! alpha = 5.0
//! eta = 0.005
//! a_h = 0.0
//! lambda = 0.0
//! mobility_order = 3.0
//!
//! [grid]
//! points = 100
//! length = 1.0
//!
//! [initial]
//! kind = "perturbed_flat" # perturbed_flat | snapshot | profile
//! hbar = 0.95
//! amplitude = 0.01
//! path = "profile.csv"    # snapshot and profile
//! window = 5              # profile only
//! modes = 32
//! endpoint_tolerance = 0.01
//!
//! [scheme]
//! kind = "bem"            # bem | gm
//! mobility = "integral_mean"
//!
//! [stepping]
//! mode = "adaptive"       # fixed | adaptive
//! dt = 1e-3
//! tol1 = 0.1
//! count_max = 3
//! dt_min = 1e-6
//! dt_max = 1e-2
//! t_start = 0.0
//! t_end = 1.0
//! newton_tolerance = 0.1
//! stop_on_negative = false
//! clamp_final = false
//!
//! [output]
//! dir = "out"
//! snapshot_every = 10
//! snapshot_interval = 0.1
//! diag_every = 1
//! seed = 0
//! ```

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use fibercoat::scenarios::InitialCondition;
use fibercoat::{
    builtin_scenario, MobilityDiscretization, MobilityVariant, ModelFamily, ModelParams, NewtonConfig, PeriodicGrid,
    PhysicalModel, ProfileOptions, Scenario, SchemeConfig, SchemeKind, StepController, SteppingMode,
};
use serde::Deserialize;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub scheme: SchemeSection,
    #[serde(default)]
    pub stepping: SteppingSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: Option<String>,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub a_h: Option<f64>,
    pub lambda: Option<f64>,
    pub mobility_order: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub points: Option<usize>,
    pub length: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub kind: Option<String>,
    pub hbar: Option<f64>,
    pub amplitude: Option<f64>,
    pub path: Option<PathBuf>,
    pub window: Option<usize>,
    pub modes: Option<usize>,
    pub endpoint_tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub kind: Option<String>,
    pub mobility: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteppingSection {
    pub mode: Option<String>,
    pub dt: Option<f64>,
    pub tol1: Option<f64>,
    pub count_max: Option<usize>,
    pub dt_min: Option<f64>,
    pub dt_max: Option<f64>,
    pub t_start: Option<f64>,
    pub t_end: Option<f64>,
    pub newton_tolerance: Option<f64>,
    pub stop_on_negative: Option<bool>,
    /// Shorten the last step to land exactly on `t_end`.
    pub clamp_final: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    /// Accepted steps between snapshots; 0 keeps only the first and last.
    pub snapshot_every: Option<usize>,
    /// Simulated time between snapshots.
    pub snapshot_interval: Option<f64>,
    /// Accepted steps between diagnostics rows.
    pub diag_every: Option<usize>,
    /// Reserved; the solver is deterministic.
    pub seed: Option<u64>,
}

/// Where and how often to write results.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputOptions {
    pub dir: PathBuf,
    pub snapshot_every: usize,
    pub snapshot_interval: Option<f64>,
    pub diag_every: usize,
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn for_scenario(name: &str) -> Self {
        Self { scenario: Some(name.to_string()), ..Default::default() }
    }

    /// Builds the scenario: the named base (if any) with every given field
    /// applied on top.
    pub fn resolve(&self) -> Result<(Scenario<f64>, OutputOptions)> {
        let base = match &self.scenario {
            Some(name) => {
                let b = builtin_scenario::<f64>(name)?;
                Some(match &self.scheme.kind {
                    Some(k) => b.with_scheme(k.parse::<SchemeKind>()?),
                    None => b,
                })
            }
            None => None,
        };
        let need = |what: &str| anyhow!("`{what}` is required when no scenario is named");

        let m = &self.model;
        let base_params = base.as_ref().map(|s| *s.model.params());
        let pick = |v: Option<f64>, b: Option<f64>, what: &str| v.or(b).ok_or_else(|| need(what));
        let family = match (&m.family, &base) {
            (Some(f), _) => f.parse::<ModelFamily>()?,
            (None, Some(s)) => s.model.family(),
            (None, None) => return Err(need("model.family")),
        };
        let mut params = ModelParams::new(
            pick(m.alpha, base_params.map(|p| p.alpha), "model.alpha")?,
            pick(m.eta, base_params.map(|p| p.eta), "model.eta")?,
            pick(m.a_h, base_params.map(|p| p.a_h), "model.a_h")?,
        );
        params.lambda = m.lambda.or(base_params.map(|p| p.lambda)).unwrap_or(0.0);
        params.mobility_order = m.mobility_order.or(base_params.map(|p| p.mobility_order)).unwrap_or(3.0);
        let model = match family {
            ModelFamily::PowerLaw => PhysicalModel::power_law(params, false)?,
            other => PhysicalModel::new(other, params)?,
        };

        let g = &self.grid;
        let grid = PeriodicGrid::new(
            g.points.or(base.as_ref().map(|s| s.grid.n_points())).ok_or_else(|| need("grid.points"))?,
            g.length.or(base.as_ref().map(|s| s.grid.length())).ok_or_else(|| need("grid.length"))?,
        )?;

        let initial = self.initial_condition(base.as_ref())?;

        let kind = match (&self.scheme.kind, &base) {
            (Some(k), _) => k.parse::<SchemeKind>()?,
            (None, Some(s)) => s.scheme.scheme,
            (None, None) => SchemeKind::SemiImplicitBem,
        };
        let mut scheme = SchemeConfig::new(kind, model.clone());
        if let Some(v) = &self.scheme.mobility {
            scheme = scheme.with_mobility(MobilityDiscretization::for_variant(v.parse::<MobilityVariant>()?));
        } else if let Some(s) = &base {
            scheme = scheme.with_mobility(s.scheme.mobility.clone());
        }

        let st = &self.stepping;
        let mode = match (&st.mode, &base) {
            (Some(m), _) => m.parse::<SteppingMode>()?,
            (None, Some(s)) => s.stepping.mode,
            (None, None) => return Err(need("stepping.mode")),
        };
        let base_ctrl = base.as_ref().map(|s| &s.stepping).filter(|c| c.mode == mode);
        let dt = st.dt.or(base_ctrl.map(|c| c.dt)).ok_or_else(|| need("stepping.dt"))?;
        let mut stepping = match mode {
            SteppingMode::Fixed => StepController::fixed(dt),
            SteppingMode::Adaptive => {
                let tol1 = st.tol1.or(base_ctrl.map(|c| c.tol1)).ok_or_else(|| need("stepping.tol1"))?;
                StepController::adaptive(dt, tol1)
            }
        };
        stepping = stepping.with_count_max(st.count_max.or(base_ctrl.map(|c| c.count_max)).unwrap_or(3));
        stepping = stepping.with_dt_bounds(
            st.dt_min.or(base_ctrl.and_then(|c| c.dt_min)),
            st.dt_max.or(base_ctrl.and_then(|c| c.dt_max)),
        );
        stepping = stepping.with_clamp_final(st.clamp_final.or(base_ctrl.map(|c| c.clamp_final)).unwrap_or(false));
        stepping.validate()?;
        let newton_tol = match st.newton_tolerance {
            Some(t) => t,
            None => match (mode, base.as_ref()) {
                (_, Some(s)) if s.stepping.mode == mode => s.newton.tolerance,
                (SteppingMode::Adaptive, _) => stepping.tol1,
                (SteppingMode::Fixed, _) => fibercoat::scenarios::FIXED_STEP_NEWTON_TOLERANCE,
            },
        };
        let t_start = st.t_start.or(base.as_ref().map(|s| s.t_start)).unwrap_or(0.0);
        let t_end = st.t_end.or(base.as_ref().map(|s| s.t_end)).ok_or_else(|| need("stepping.t_end"))?;
        if !(t_end > t_start) {
            bail!("t_end ({t_end}) must exceed t_start ({t_start})");
        }
        let stop_on_negative = st.stop_on_negative.or(base.as_ref().map(|s| s.stop_on_negative)).unwrap_or(false);

        let name = self.scenario.clone().unwrap_or_else(|| "custom".to_string());
        let scenario = Scenario {
            name,
            model,
            grid,
            initial_condition: initial,
            scheme,
            stepping,
            newton: NewtonConfig::with_tolerance(newton_tol),
            t_start,
            t_end,
            snapshot_stride: self.output.snapshot_every.unwrap_or(0),
            stop_on_negative,
            metadata: base.map(|s| s.metadata).unwrap_or_default(),
        };
        let out = OutputOptions {
            dir: self.output.dir.clone().unwrap_or_else(|| PathBuf::from("out")),
            snapshot_every: self.output.snapshot_every.unwrap_or(0),
            snapshot_interval: self.output.snapshot_interval.filter(|&v| v > 0.0),
            diag_every: self.output.diag_every.unwrap_or(1).max(1),
        };
        Ok((scenario, out))
    }

    fn initial_condition(&self, base: Option<&Scenario<f64>>) -> Result<InitialCondition<f64>> {
        let i = &self.initial;
        let kind = match (&i.kind, base) {
            (Some(k), _) => k.clone(),
            (None, Some(s)) => {
                if i.hbar.is_none() && i.amplitude.is_none() && i.path.is_none() {
                    return Ok(s.initial_condition.clone());
                }
                match &s.initial_condition {
                    InitialCondition::PerturbedFlat { .. } => "perturbed_flat".into(),
                    _ if i.path.is_some() => "snapshot".into(),
                    _ => "perturbed_flat".into(),
                }
            }
            (None, None) => "perturbed_flat".into(),
        };
        let base_flat = base.and_then(|s| match &s.initial_condition {
            InitialCondition::PerturbedFlat { hbar, amplitude } | InitialCondition::SpinUp { hbar, amplitude, .. } => {
                Some((*hbar, *amplitude))
            }
            _ => None,
        });
        match kind.as_str() {
            "perturbed_flat" => Ok(InitialCondition::PerturbedFlat {
                hbar: i.hbar.or(base_flat.map(|b| b.0)).ok_or_else(|| anyhow!("`initial.hbar` is required"))?,
                amplitude: i.amplitude.or(base_flat.map(|b| b.1)).unwrap_or(0.01),
            }),
            "snapshot" => Ok(InitialCondition::Snapshot(
                i.path.clone().ok_or_else(|| anyhow!("`initial.path` is required for a snapshot"))?,
            )),
            "profile" => {
                let d = ProfileOptions::default();
                Ok(InitialCondition::Profile {
                    path: i.path.clone().ok_or_else(|| anyhow!("`initial.path` is required for a profile"))?,
                    options: ProfileOptions {
                        endpoint_tolerance: i.endpoint_tolerance.unwrap_or(d.endpoint_tolerance),
                        window: i.window.unwrap_or(d.window),
                        modes: i.modes.or(d.modes),
                        ..d
                    },
                })
            }
            other => bail!("unknown initial condition kind `{other}`"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_scenario_resolves_unchanged() {
        let (s, out) = RunConfig::for_scenario("adaptive_smooth").resolve().unwrap();
        let b = builtin_scenario::<f64>("adaptive_smooth").unwrap();
        assert_eq!(s.model, b.model);
        assert_eq!(s.stepping, b.stepping);
        assert_eq!(s.newton, b.newton);
        assert_eq!(s.initial_condition, b.initial_condition);
        assert_eq!(out.diag_every, 1);
    }

    #[test]
    fn overrides_apply() {
        let cfg = RunConfig::from_toml(
            "scenario = \"cpu_benchmark\"\n[scheme]\nkind = \"gm\"\n[grid]\npoints = 200\n[stepping]\nt_end = 0.5\n",
        )
        .unwrap();
        let (s, _) = cfg.resolve().unwrap();
        assert_eq!(s.scheme.scheme, SchemeKind::ImplicitGm);
        assert_eq!(s.scheme.mobility.variant(), MobilityVariant::Midpoint);
        assert_eq!(s.grid.n_points(), 200);
        assert_eq!(s.t_end, 0.5);
        assert!(s.stop_on_negative);
    }

    #[test]
    fn inline_config_needs_all_fields() {
        let err = RunConfig::from_toml("[model]\nfamily = \"fsm\"\n").unwrap().resolve().unwrap_err();
        assert!(err.to_string().contains("required"), "{err}");
        assert!(RunConfig::from_toml("bogus = 1").is_err());
    }
}
