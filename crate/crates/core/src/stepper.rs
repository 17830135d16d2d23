//! Fixed and adaptive time stepping around [`newton_solve`].
//!
//! Both modes halve `dt` after a failed Newton solve and give up after more
//! than `bad_limit` consecutive failures. In adaptive mode every accepted
//! step grows `dt` by `growth_minor`; after `count_max` steps whose local
//! truncation error is below `tol1`, `dt` additionally grows by
//! `growth_major` and the counter restarts.

use crate::assembly::{SchemeConfig, SchemeKind};
use crate::error::{Error, Result};
use crate::grid::{Field, PeriodicGrid};
use crate::newton::{newton_solve, NewtonConfig};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SteppingMode {
    Fixed,
    Adaptive,
}

impl std::str::FromStr for SteppingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(SteppingMode::Fixed),
            "adaptive" => Ok(SteppingMode::Adaptive),
            _ => Err(Error::invalid(format!("unknown stepping mode '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepController<T> {
    pub dt: T,
    /// Step that produced the current state, once one has been accepted.
    pub dt_old: Option<T>,
    pub mode: SteppingMode,
    pub tol1: T,
    pub count: usize,
    pub count_max: usize,
    pub bad: usize,
    pub growth_minor: T,
    pub growth_major: T,
    pub shrink: T,
    pub bad_limit: usize,
    pub dt_min: Option<T>,
    pub dt_max: Option<T>,
    /// Shorten the last step so the run ends exactly at `t_end`.
    pub clamp_final: bool,
}

impl<T: Scalar> StepController<T> {
    pub fn fixed(dt: T) -> Self {
        Self::with_mode(SteppingMode::Fixed, dt, T::lit(0.1))
    }

    pub fn adaptive(dt0: T, tol1: T) -> Self {
        Self::with_mode(SteppingMode::Adaptive, dt0, tol1)
    }

    fn with_mode(mode: SteppingMode, dt: T, tol1: T) -> Self {
        Self {
            dt,
            dt_old: None,
            mode,
            tol1,
            count: 0,
            count_max: 3,
            bad: 0,
            growth_minor: T::lit(1.01),
            growth_major: T::lit(1.2),
            shrink: T::lit(0.5),
            bad_limit: 4,
            dt_min: None,
            dt_max: None,
            clamp_final: false,
        }
    }

    pub fn with_count_max(mut self, count_max: usize) -> Self {
        self.count_max = count_max;
        self
    }

    pub fn with_clamp_final(mut self, clamp: bool) -> Self {
        self.clamp_final = clamp;
        self
    }

    pub fn with_dt_bounds(mut self, dt_min: Option<T>, dt_max: Option<T>) -> Self {
        self.dt_min = dt_min;
        self.dt_max = dt_max;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.shrink > T::zero() && self.shrink < T::one()) {
            return Err(Error::invalid("shrink factor must lie in (0, 1)"));
        }
        if self.growth_minor < T::one() || self.growth_major < T::one() {
            return Err(Error::invalid("growth factors must be at least 1"));
        }
        if self.mode == SteppingMode::Adaptive && (self.count_max == 0 || !(self.tol1 > T::zero())) {
            return Err(Error::invalid("adaptive stepping needs count_max >= 1 and tol1 > 0"));
        }
        if let (Some(lo), Some(hi)) = (self.dt_min, self.dt_max) {
            if lo > hi {
                return Err(Error::invalid("dt_min exceeds dt_max"));
            }
        }
        Ok(())
    }

    fn clamp_growth(&mut self) {
        if let Some(hi) = self.dt_max {
            self.dt = self.dt.min(hi);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<T> {
    pub t_before: T,
    pub dt_used: T,
    pub newton_iterations: usize,
    pub residual: T,
    pub lte_max: Option<T>,
    pub accepted: bool,
    /// Whether this accepted step triggered the major growth factor.
    pub growth_event: bool,
    /// Minimum of the accepted state, or of the rejected attempt's start.
    pub min_height: T,
    /// `dt` the controller holds after this record.
    pub dt_after: T,
}

/// Relative-increment local truncation error
/// `|e_{k+1} - (dt / dt_old) e_k|` with `e_{k+1} = (u_next - u_curr) / u_curr`.
pub fn lte<T: Scalar>(u_next: &Field<T>, u_curr: &Field<T>, u_prev: &Field<T>, dt: T, dt_old: T) -> Result<Field<T>> {
    let n = u_next.len();
    for f in [u_curr, u_prev] {
        if f.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: f.len() });
        }
    }
    if !(dt > T::zero()) || !(dt_old > T::zero()) {
        return Err(Error::invalid("time steps must be positive"));
    }
    let ratio = dt / dt_old;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if !(u_curr[i] > T::zero()) {
            return Err(Error::Positivity { index: Some(i), value: u_curr[i].as_f64() });
        }
        if !(u_prev[i] > T::zero()) {
            return Err(Error::Positivity { index: Some(i), value: u_prev[i].as_f64() });
        }
        let e1 = (u_next[i] - u_curr[i]) / u_curr[i];
        let e0 = (u_curr[i] - u_prev[i]) / u_prev[i];
        out.push((e1 - ratio * e0).abs());
    }
    Ok(Field::new(out))
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus<T> {
    Completed,
    /// More than `bad_limit` consecutive Newton failures, or `dt` fell below `dt_min`.
    Aborted { reason: String },
    /// The positivity-preserving scheme accepted a nonpositive state.
    PositivityBreach { t: T, index: usize, value: T },
    /// `stop_on_negative` was set and a negative height was accepted.
    StoppedOnNegative { t: T },
}

impl<T> RunStatus<T> {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Aborted { .. } => "aborted (Newton)",
            RunStatus::PositivityBreach { .. } => "positivity breach",
            RunStatus::StoppedOnNegative { .. } => "stopped on negative height",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome<T> {
    pub status: RunStatus<T>,
    pub t: T,
    pub state: Field<T>,
    pub accepted_steps: usize,
    pub failed_attempts: usize,
    pub growth_events: usize,
    pub first_negative_time: Option<T>,
    pub min_height: T,
    pub max_newton_iterations: usize,
    pub final_dt: T,
}

/// Receives the initial state and every accepted step.
pub trait RunObserver<T: Scalar> {
    fn on_start(&mut self, _t: T, _state: &Field<T>) -> Result<()> {
        Ok(())
    }

    fn on_accept(&mut self, t: T, state: &Field<T>, record: &StepRecord<T>) -> Result<()>;
}

/// Observer that ignores everything.
pub struct NoObserver;

impl<T: Scalar> RunObserver<T> for NoObserver {
    fn on_accept(&mut self, _t: T, _state: &Field<T>, _record: &StepRecord<T>) -> Result<()> {
        Ok(())
    }
}

/// A running simulation that owns its state exclusively.
#[derive(Debug, Clone)]
pub struct Simulation<T> {
    scheme: SchemeConfig<T>,
    grid: PeriodicGrid<T>,
    newton: NewtonConfig<T>,
    controller: StepController<T>,
    state: Field<T>,
    previous: Option<Field<T>>,
    t: T,
    t_carry: T,
    log: Vec<StepRecord<T>>,
    last: Option<StepRecord<T>>,
    keep_log: bool,
    stop_on_negative: bool,
    first_negative_time: Option<T>,
    min_height: T,
    accepted: usize,
    failures: usize,
    growth_events: usize,
    max_iterations: usize,
    started: bool,
}

enum Attempt<T> {
    Accepted,
    Rejected,
    Finished(RunStatus<T>),
}

impl<T: Scalar> Simulation<T> {
    pub fn new(
        scheme: SchemeConfig<T>,
        grid: PeriodicGrid<T>,
        initial: Field<T>,
        controller: StepController<T>,
        newton: NewtonConfig<T>,
    ) -> Result<Self> {
        grid.check(&initial)?;
        controller.validate()?;
        if let Some((i, v)) = initial.argmin() {
            if !(v > T::zero()) {
                return Err(Error::Positivity { index: Some(i), value: v.as_f64() });
            }
        }
        if !initial.all_finite() {
            return Err(Error::invalid("initial state is not finite"));
        }
        let min_height = initial.min();
        Ok(Self {
            scheme,
            grid,
            newton,
            controller,
            state: initial,
            previous: None,
            t: T::zero(),
            t_carry: T::zero(),
            log: Vec::new(),
            last: None,
            keep_log: true,
            stop_on_negative: false,
            first_negative_time: None,
            min_height,
            accepted: 0,
            failures: 0,
            growth_events: 0,
            max_iterations: 0,
            started: false,
        })
    }

    pub fn with_start_time(mut self, t0: T) -> Self {
        self.t = t0;
        self
    }

    pub fn with_stop_on_negative(mut self, stop: bool) -> Self {
        self.stop_on_negative = stop;
        self
    }

    /// Keep every attempt in memory (default `true`).
    pub fn with_log(mut self, keep: bool) -> Self {
        self.keep_log = keep;
        self
    }

    pub fn t(&self) -> T {
        self.t
    }

    pub fn state(&self) -> &Field<T> {
        &self.state
    }

    pub fn grid(&self) -> &PeriodicGrid<T> {
        &self.grid
    }

    pub fn scheme(&self) -> &SchemeConfig<T> {
        &self.scheme
    }

    pub fn controller(&self) -> &StepController<T> {
        &self.controller
    }

    pub fn log(&self) -> &[StepRecord<T>] {
        &self.log
    }

    pub fn take_log(&mut self) -> Vec<StepRecord<T>> {
        std::mem::take(&mut self.log)
    }

    pub fn first_negative_time(&self) -> Option<T> {
        self.first_negative_time
    }

    fn done(&self, t_end: T) -> bool {
        // Guards against one extra sliver step from accumulated rounding in t.
        let slack = T::lit(1e-9) * self.controller.dt.min(T::one());
        self.t >= t_end - slack
    }

    /// Integrates until `t >= t_end` or the run stops.
    pub fn advance(&mut self, t_end: T, observer: &mut dyn RunObserver<T>) -> Result<RunOutcome<T>> {
        if !self.started {
            observer.on_start(self.t, &self.state)?;
            self.started = true;
        }
        let mut status = RunStatus::Completed;
        while !self.done(t_end) {
            match self.attempt(t_end) {
                Attempt::Accepted => {
                    let record = self.log_last();
                    observer.on_accept(self.t, &self.state, &record)?;
                    if let Some(s) = self.post_accept_check() {
                        status = s;
                        break;
                    }
                }
                Attempt::Rejected => {}
                Attempt::Finished(s) => {
                    status = s;
                    break;
                }
            }
        }
        Ok(self.outcome(status))
    }

    fn log_last(&self) -> StepRecord<T> {
        self.last.clone().expect("record of the accepted step")
    }

    fn outcome(&self, status: RunStatus<T>) -> RunOutcome<T> {
        RunOutcome {
            status,
            t: self.t,
            state: self.state.clone(),
            accepted_steps: self.accepted,
            failed_attempts: self.failures,
            growth_events: self.growth_events,
            first_negative_time: self.first_negative_time,
            min_height: self.min_height,
            max_newton_iterations: self.max_iterations,
            final_dt: self.controller.dt,
        }
    }

    fn post_accept_check(&mut self) -> Option<RunStatus<T>> {
        let (i, v) = self.state.argmin()?;
        if self.scheme.scheme == SchemeKind::SemiImplicitBem && !(v > T::zero()) {
            return Some(RunStatus::PositivityBreach { t: self.t, index: i, value: v });
        }
        if v < T::zero() && self.stop_on_negative {
            return Some(RunStatus::StoppedOnNegative { t: self.t });
        }
        None
    }

    fn push(&mut self, record: StepRecord<T>) {
        if self.keep_log {
            self.log.push(record.clone());
        }
        self.last = Some(record);
    }

    fn attempt(&mut self, t_end: T) -> Attempt<T> {
        let c = &self.controller;
        let mut dt = c.dt;
        if c.clamp_final && self.t + dt > t_end {
            dt = t_end - self.t;
        }
        if self.t + dt == self.t {
            return Attempt::Finished(RunStatus::Aborted { reason: format!("dt = {dt:e} no longer advances t = {}", self.t) });
        }
        let out = newton_solve(&self.newton, &self.scheme, &self.grid, &self.state, dt);
        self.max_iterations = self.max_iterations.max(out.iterations);
        let t_before = self.t;
        if !out.success {
            self.failures += 1;
            let c = &mut self.controller;
            c.bad += 1;
            c.dt = c.dt * c.shrink;
            let dt_after = c.dt;
            let (bad, limit, dt_min) = (c.bad, c.bad_limit, c.dt_min);
            let record = StepRecord {
                t_before,
                dt_used: dt,
                newton_iterations: out.iterations,
                residual: out.final_residual_norm,
                lte_max: None,
                accepted: false,
                growth_event: false,
                min_height: self.state.min(),
                dt_after,
            };
            self.push(record);
            if bad > limit {
                let why = out.failure.unwrap_or_default();
                return Attempt::Finished(RunStatus::Aborted {
                    reason: format!("{bad} consecutive Newton failures at t = {t_before}: {why}"),
                });
            }
            if dt_min.is_some_and(|m| dt_after < m) {
                return Attempt::Finished(RunStatus::Aborted {
                    reason: format!("dt = {dt_after:e} fell below dt_min at t = {t_before}"),
                });
            }
            return Attempt::Rejected;
        }
        let next = out.solution.expect("solution on success");
        let lte_max = match (self.controller.mode, &self.previous, self.controller.dt_old) {
            (SteppingMode::Adaptive, Some(prev), Some(dt_old)) => {
                lte(&next, &self.state, prev, dt, dt_old).ok().map(|e| e.max_abs())
            }
            _ => None,
        };
        let c = &mut self.controller;
        c.bad = 0;
        let mut growth_event = false;
        if c.mode == SteppingMode::Adaptive {
            c.dt = c.dt * c.growth_minor;
            if lte_max.is_some_and(|e| e < c.tol1) {
                c.count += 1;
                if c.count >= c.count_max {
                    c.dt = c.dt * c.growth_major;
                    c.count = 0;
                    growth_event = true;
                }
            }
            c.clamp_growth();
        }
        c.dt_old = Some(dt);
        let dt_after = c.dt;
        // Kahan-compensated time accumulation.
        let y = dt - self.t_carry;
        let t_new = self.t + y;
        self.t_carry = (t_new - self.t) - y;
        self.t = t_new;
        let prev = std::mem::replace(&mut self.state, next);
        if self.controller.mode == SteppingMode::Adaptive {
            self.previous = Some(prev);
        }
        self.accepted += 1;
        if growth_event {
            self.growth_events += 1;
        }
        let min_height = self.state.min();
        self.min_height = self.min_height.min(min_height);
        if min_height < T::zero() && self.first_negative_time.is_none() {
            self.first_negative_time = Some(self.t);
        }
        self.push(StepRecord {
            t_before,
            dt_used: dt,
            newton_iterations: out.iterations,
            residual: out.final_residual_norm,
            lte_max,
            accepted: true,
            growth_event,
            min_height,
            dt_after,
        });
        Attempt::Accepted
    }
}

/// Outcome plus the full attempt log.
#[derive(Debug, Clone)]
pub struct RunReport<T> {
    pub outcome: RunOutcome<T>,
    pub log: Vec<StepRecord<T>>,
}

fn run_with_mode<T: Scalar>(
    mode: SteppingMode,
    controller: StepController<T>,
    newton: NewtonConfig<T>,
    scheme: SchemeConfig<T>,
    grid: PeriodicGrid<T>,
    state: Field<T>,
    t_end: T,
) -> Result<RunReport<T>> {
    if controller.mode != mode {
        return Err(Error::invalid(format!("controller is in {:?} mode", controller.mode)));
    }
    let mut sim = Simulation::new(scheme, grid, state, controller, newton)?;
    let outcome = sim.advance(t_end, &mut NoObserver)?;
    Ok(RunReport { outcome, log: sim.take_log() })
}

/// Fixed stepping: `dt` only changes through failure halving.
pub fn step_fixed<T: Scalar>(
    controller: StepController<T>,
    newton: NewtonConfig<T>,
    scheme: SchemeConfig<T>,
    grid: PeriodicGrid<T>,
    state: Field<T>,
    t_end: T,
) -> Result<RunReport<T>> {
    run_with_mode(SteppingMode::Fixed, controller, newton, scheme, grid, state, t_end)
}

/// Adaptive stepping with LTE-driven growth.
pub fn step_adaptive<T: Scalar>(
    controller: StepController<T>,
    newton: NewtonConfig<T>,
    scheme: SchemeConfig<T>,
    grid: PeriodicGrid<T>,
    state: Field<T>,
    t_end: T,
) -> Result<RunReport<T>> {
    run_with_mode(SteppingMode::Adaptive, controller, newton, scheme, grid, state, t_end)
}

/// Replays the controller's `dt` sequence from a log.
pub fn replay_dt<T: Scalar>(controller: &StepController<T>, log: &[StepRecord<T>]) -> T {
    let mut dt = controller.dt;
    for r in log {
        if !r.accepted {
            dt = dt * controller.shrink;
            continue;
        }
        if controller.mode == SteppingMode::Adaptive {
            dt = dt * controller.growth_minor;
            if r.growth_event {
                dt = dt * controller.growth_major;
            }
            if let Some(hi) = controller.dt_max {
                dt = dt.min(hi);
            }
        }
    }
    dt
}
