use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use fibercoat::io::{format_exact, write_snapshot};
use fibercoat::scenarios::BUILTIN_NAMES;
use fibercoat::{
    benchmark_cases, builtin_scenario, ic_perturbed_flat, l2_distance, l2_error, mass, restrict_fine_to_coarse, ConvergenceStudy,
    DiagnosticsRecord, DiagnosticsTracker, Field, InitialCondition, NewtonConfig, PeriodicGrid, RunObserver,
    RunOutcome, RunStatus, Scenario, StepRecord,
};
use serde::Serialize;

use crate::config::{OutputOptions, RunConfig};
use crate::{BenchArgs, CompareArgs, ConvergenceArgs, RunArgs, Source, SpinupArgs};

/// Resolves `--config`/`--scenario` plus the override flags.
pub fn load(source: &Source) -> Result<(Scenario<f64>, OutputOptions)> {
    let mut cfg = match (&source.config, &source.scenario) {
        (Some(path), None) => RunConfig::from_path(path)?,
        (None, Some(name)) => RunConfig::for_scenario(name),
        (Some(path), Some(name)) => {
            let mut c = RunConfig::from_path(path)?;
            c.scenario = Some(name.clone());
            c
        }
        (None, None) => bail!("pass --config or --scenario"),
    };
    if let Some(s) = &source.scheme {
        cfg.scheme.kind = Some(s.clone());
    }
    if let Some(t) = source.t_end {
        cfg.stepping.t_end = Some(t);
    }
    if let Some(p) = &source.initial {
        cfg.initial.kind = Some("snapshot".into());
        cfg.initial.path = Some(p.clone());
    }
    cfg.resolve()
}

/// Scenario name or TOML path.
fn load_spec(spec: &str, scheme: Option<&String>) -> Result<Scenario<f64>> {
    let looks_like_file = spec.ends_with(".toml") || Path::new(spec).is_file();
    let source = Source {
        config: looks_like_file.then(|| PathBuf::from(spec)),
        scenario: (!looks_like_file).then(|| spec.to_string()),
        scheme: scheme.cloned(),
        ..Default::default()
    };
    Ok(load(&source)?.0)
}

/// Machine-readable result of `run`.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: String,
    pub scheme: String,
    pub points: usize,
    pub status: String,
    pub completed: bool,
    pub aborted: bool,
    pub reason: Option<String>,
    pub t_start: f64,
    pub t_end: f64,
    pub final_time: f64,
    pub accepted_steps: usize,
    pub newton_failures: usize,
    pub growth_events: usize,
    pub first_negative_time: Option<f64>,
    pub min_h: f64,
    pub max_newton_iterations: usize,
    pub final_dt: f64,
    pub mass_initial: f64,
    pub mass_final: f64,
    pub min_entropy_slack: Option<f64>,
    pub snapshots: usize,
    pub wall_clock_seconds: f64,
}

impl RunSummary {
    /// `key: value` lines.
    pub fn to_text(&self) -> String {
        let opt = |v: Option<f64>| v.map(format_exact).unwrap_or_else(|| "none".into());
        let rows: Vec<(&str, String)> = vec![
            ("scenario", self.scenario.clone()),
            ("scheme", self.scheme.clone()),
            ("points", self.points.to_string()),
            ("status", self.status.clone()),
            ("completed", self.completed.to_string()),
            ("aborted", self.aborted.to_string()),
            ("reason", self.reason.clone().unwrap_or_else(|| "none".into())),
            ("t_start", format_exact(self.t_start)),
            ("t_end", format_exact(self.t_end)),
            ("final_time", format_exact(self.final_time)),
            ("accepted_steps", self.accepted_steps.to_string()),
            ("newton_failures", self.newton_failures.to_string()),
            ("growth_events", self.growth_events.to_string()),
            ("first_negative_time", opt(self.first_negative_time)),
            ("min_h", format_exact(self.min_h)),
            ("max_newton_iterations", self.max_newton_iterations.to_string()),
            ("final_dt", format_exact(self.final_dt)),
            ("mass_initial", format_exact(self.mass_initial)),
            ("mass_final", format_exact(self.mass_final)),
            ("min_entropy_slack", opt(self.min_entropy_slack)),
            ("snapshots", self.snapshots.to_string()),
            ("wall_clock_seconds", format!("{:.6}", self.wall_clock_seconds)),
        ];
        rows.into_iter().fold(String::new(), |mut s, (k, v)| {
            let _ = writeln!(s, "{k}: {v}");
            s
        })
    }
}

/// Writes snapshots and collects diagnostics while a run advances.
struct RunWriter<'a> {
    tracker: DiagnosticsTracker<f64>,
    grid: &'a PeriodicGrid<f64>,
    dir: &'a Path,
    every: usize,
    interval: Option<f64>,
    next_snapshot: f64,
    steps: usize,
    snapshots: usize,
    last_written: Option<f64>,
    progress: Option<(f64, f64)>,
}

impl RunWriter<'_> {
    fn snapshot(&mut self, t: f64, u: &Field<f64>) -> fibercoat::Result<()> {
        if self.last_written == Some(t) {
            return Ok(());
        }
        write_snapshot(&self.dir.join(snapshot_name(t)), self.grid, u)?;
        self.snapshots += 1;
        self.last_written = Some(t);
        Ok(())
    }
}

impl RunObserver<f64> for RunWriter<'_> {
    fn on_start(&mut self, t: f64, state: &Field<f64>) -> fibercoat::Result<()> {
        self.tracker.on_start(t, state)?;
        if let Some(dt) = self.interval {
            self.next_snapshot = t + dt;
        }
        self.snapshot(t, state)
    }

    fn on_accept(&mut self, t: f64, state: &Field<f64>, record: &StepRecord<f64>) -> fibercoat::Result<()> {
        self.tracker.on_accept(t, state, record)?;
        self.steps += 1;
        if self.every > 0 && self.steps % self.every == 0 {
            self.snapshot(t, state)?;
        }
        if let Some(dt) = self.interval {
            if t >= self.next_snapshot {
                self.snapshot(t, state)?;
                while self.next_snapshot <= t {
                    self.next_snapshot += dt;
                }
            }
        }
        if let Some((next, step)) = &mut self.progress {
            if t >= *next {
                eprintln!("t = {t:.6}  dt = {:.3e}  min h = {:.4e}", record.dt_used, record.min_height);
                *next += *step;
            }
        }
        Ok(())
    }
}

/// `snapshot_<t>.csv` with `t` to six decimals.
pub fn snapshot_name(t: f64) -> String {
    format!("snapshot_{t:.6}.csv")
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(["t", "mass", "entropy", "entropy_bound", "min_h", "lipschitz", "dt", "newton_iters"])?;
    let opt = |v: Option<f64>| v.map(format_exact).unwrap_or_default();
    for r in records {
        w.write_record([
            format_exact(r.t),
            format_exact(r.mass),
            opt(r.entropy),
            opt(r.entropy_bound),
            format_exact(r.min_height),
            format_exact(r.lipschitz),
            format_exact(r.dt),
            r.newton_iters.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Runs a scenario and writes `snapshot_<t>.csv`, `diag.csv`,
/// `summary.txt` and `summary.json` under the output directory.
pub fn cmd_run(args: &RunArgs) -> Result<RunSummary> {
    let (scenario, mut out) = load(&args.source)?;
    if let Some(dir) = &args.out {
        out.dir = dir.clone();
    }
    if let Some(k) = args.snapshot_every {
        out.snapshot_every = k;
    }
    if let Some(v) = args.snapshot_interval {
        out.snapshot_interval = Some(v).filter(|&v| v > 0.0);
    }
    if let Some(k) = args.diag_every {
        out.diag_every = k.max(1);
    }
    run_scenario(&scenario, &out, args.no_entropy, args.quiet)
}

pub fn run_scenario(scenario: &Scenario<f64>, out: &OutputOptions, no_entropy: bool, quiet: bool) -> Result<RunSummary> {
    fs::create_dir_all(&out.dir).with_context(|| format!("creating {}", out.dir.display()))?;
    let mut sim = scenario.simulation()?.with_log(false);
    let mut tracker = DiagnosticsTracker::new(scenario.model.clone(), scenario.grid.clone()).with_stride(out.diag_every);
    if no_entropy {
        tracker = tracker.without_entropy();
    }
    let span = scenario.t_end - scenario.t_start;
    let mut writer = RunWriter {
        tracker,
        grid: &scenario.grid,
        dir: &out.dir,
        every: out.snapshot_every,
        interval: out.snapshot_interval,
        next_snapshot: f64::INFINITY,
        steps: 0,
        snapshots: 0,
        last_written: None,
        progress: (!quiet).then_some((scenario.t_start + span / 10.0, span / 10.0)),
    };
    let alpha = scenario.model.params().alpha;
    let mass_initial = mass(&scenario.grid, sim.state(), alpha);
    let clock = Instant::now();
    let outcome = sim.advance(scenario.t_end, &mut writer)?;
    let wall = clock.elapsed().as_secs_f64();
    writer.snapshot(outcome.t, &outcome.state)?;
    let snapshots = writer.snapshots;
    let min_entropy_slack = writer.tracker.min_relative_slack();
    let records = writer.tracker.into_records();
    write_diagnostics(&out.dir.join("diag.csv"), &records)?;

    let summary = summarize(scenario, &outcome, mass_initial, min_entropy_slack, snapshots, wall);
    fs::write(out.dir.join("summary.txt"), summary.to_text())?;
    fs::write(out.dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    if !quiet {
        print!("{}", summary.to_text());
    }
    Ok(summary)
}

fn summarize(
    scenario: &Scenario<f64>,
    outcome: &RunOutcome<f64>,
    mass_initial: f64,
    min_entropy_slack: Option<f64>,
    snapshots: usize,
    wall: f64,
) -> RunSummary {
    let reason = match &outcome.status {
        RunStatus::Aborted { reason } => Some(reason.clone()),
        RunStatus::PositivityBreach { t, index, value } => Some(format!("h[{index}] = {value:e} at t = {t}")),
        RunStatus::StoppedOnNegative { t } => Some(format!("negative height at t = {t}")),
        RunStatus::Completed => None,
    };
    RunSummary {
        scenario: scenario.name.clone(),
        scheme: scenario.scheme.scheme.to_string(),
        points: scenario.grid.n_points(),
        status: outcome.status.label().to_string(),
        completed: outcome.status.is_completed(),
        aborted: matches!(outcome.status, RunStatus::Aborted { .. }),
        reason,
        t_start: scenario.t_start,
        t_end: scenario.t_end,
        final_time: outcome.t,
        accepted_steps: outcome.accepted_steps,
        newton_failures: outcome.failed_attempts,
        growth_events: outcome.growth_events,
        first_negative_time: outcome.first_negative_time,
        min_h: outcome.min_height,
        max_newton_iterations: outcome.max_newton_iterations,
        final_dt: outcome.final_dt,
        mass_initial,
        mass_final: mass(&scenario.grid, &outcome.state, scenario.model.params().alpha),
        min_entropy_slack,
        snapshots,
        wall_clock_seconds: wall,
    }
}

/// One side of a comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CompareRun {
    pub scenario: String,
    pub scheme: String,
    pub points: usize,
    pub status: String,
    pub time: f64,
    pub min_h: f64,
    pub first_negative_time: Option<f64>,
    pub positive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub t_check: f64,
    /// Average l2 error of the coarser run against the finer one restricted
    /// onto its grid; `None` if either run stopped before `t_check`.
    pub l2_error: Option<f64>,
    /// `sqrt(sum d_i^2 dx)` on the coarser grid, for refinement studies.
    pub l2_distance: Option<f64>,
    pub a: CompareRun,
    pub b: CompareRun,
}

impl CompareReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "t_check: {}", format_exact(self.t_check));
        let opt = |v: Option<f64>| v.map(format_exact).unwrap_or_else(|| "none".into());
        let _ = writeln!(s, "l2_error: {}", opt(self.l2_error));
        let _ = writeln!(s, "l2_distance: {}", opt(self.l2_distance));
        for (k, r) in [("a", &self.a), ("b", &self.b)] {
            let verdict = match (r.positive, r.first_negative_time) {
                (true, _) => "positive".to_string(),
                (false, Some(t)) => format!("negative at t = {t}"),
                (false, None) => "not positive".to_string(),
            };
            let _ = writeln!(
                s,
                "{k}: {} {} N={} status={} t={} min_h={:e} {verdict}",
                r.scenario, r.scheme, r.points, r.status, r.time, r.min_h
            );
        }
        s
    }
}

/// Runs two configurations to `t_check` and compares their states. GM
/// runs are not stopped at negative heights here.
pub fn cmd_compare(args: &CompareArgs) -> Result<CompareReport> {
    let a = load_spec(&args.a, args.scheme_a.as_ref())?;
    let b = load_spec(&args.b, args.scheme_b.as_ref())?;
    compare(a, b, args.t_check, args.run_past)
}

pub fn compare(a: Scenario<f64>, b: Scenario<f64>, t_check: f64, run_past: Option<f64>) -> Result<CompareReport> {
    let (la, lb) = (a.grid.length(), b.grid.length());
    if (la - lb).abs() > 1e-12 * la.max(lb) {
        bail!("incompatible domains: L = {la} and L = {lb}");
    }
    let (na, nb) = (a.grid.n_points(), b.grid.n_points());
    if !(na == nb || na == 2 * nb || nb == 2 * na) {
        bail!("incompatible grids: {na} and {nb} nodes (need equal or 2:1)");
    }
    let mut sides = Vec::new();
    for mut s in [a, b] {
        if !(t_check > s.t_start) {
            bail!("t_check ({t_check}) must exceed the start time of `{}` ({})", s.name, s.t_start);
        }
        s.stop_on_negative = false;
        let mut sim = s.simulation()?.with_log(false);
        let mut out = sim.advance(t_check, &mut fibercoat::NoObserver)?;
        let state = out.state.clone();
        let reached = out.status.is_completed();
        if let Some(t_past) = run_past.filter(|&t| t > t_check && reached) {
            out = sim.advance(t_past, &mut fibercoat::NoObserver)?;
        }
        let first_negative_time = sim.first_negative_time();
        let run = CompareRun {
            scenario: s.name.clone(),
            scheme: s.scheme.scheme.to_string(),
            points: s.grid.n_points(),
            status: out.status.label().to_string(),
            time: out.t,
            min_h: out.min_height,
            first_negative_time,
            positive: first_negative_time.is_none() && out.min_height > 0.0,
        };
        sides.push((run, reached.then_some(state), s.grid.length()));
    }
    let (rb, sb, _) = sides.pop().expect("two runs");
    let (ra, sa, length) = sides.pop().expect("two runs");
    let (l2, dist) = match (sa, sb) {
        (Some(ua), Some(ub)) => {
            let (coarse, fine) = if ua.len() <= ub.len() { (ua, ub) } else { (ub, ua) };
            let reference = if fine.len() == coarse.len() { fine } else { restrict_fine_to_coarse(&fine)? };
            let grid = PeriodicGrid::new(coarse.len(), length)?;
            (Some(l2_error(&coarse, &reference, length)?), Some(l2_distance(&grid, &coarse, &reference)?))
        }
        _ => (None, None),
    };
    Ok(CompareReport { t_check, l2_error: l2, l2_distance: dist, a: ra, b: rb })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceTable {
    pub scheme: String,
    pub points: Vec<usize>,
    pub differences: Vec<f64>,
    pub orders: Vec<f64>,
    pub observed_order: f64,
    pub stable: bool,
    pub note: Option<String>,
}

impl ConvergenceTable {
    pub fn to_text(&self) -> String {
        let mut s = format!("scheme: {}\n{:>8}  {:>14}  {:>8}\n", self.scheme, "N", "l2 diff", "order");
        for (k, n) in self.points.iter().enumerate() {
            let d = self.differences.get(k).map(|d| format!("{d:.6e}")).unwrap_or_default();
            let o = k.checked_sub(1).and_then(|j| self.orders.get(j)).map(|o| format!("{o:.4}")).unwrap_or_default();
            let _ = writeln!(s, "{n:>8}  {d:>14}  {o:>8}");
        }
        let _ = writeln!(s, "observed order: {:.4}", self.observed_order);
        if !self.stable {
            let _ = writeln!(s, "order unstable: {}", self.note.as_deref().unwrap_or(""));
        }
        s
    }
}

/// Self-convergence study on the scenario's perturbed-flat initial state.
pub fn cmd_convergence(args: &ConvergenceArgs) -> Result<ConvergenceTable> {
    let (scenario, _) = load(&args.source)?;
    let (hbar, amplitude) = match scenario.initial_condition {
        InitialCondition::PerturbedFlat { hbar, amplitude } => (hbar, amplitude),
        _ => bail!("convergence studies need a perturbed-flat initial condition"),
    };
    if args.points.len() < 3 {
        bail!("need at least 3 grids, got {}", args.points.len());
    }
    let study = ConvergenceStudy {
        scheme: scenario.scheme.clone(),
        length: scenario.grid.length(),
        points: args.points.clone(),
        dt: args.dt,
        t_check: args.t_check,
        newton: NewtonConfig::with_tolerance(args.newton_tolerance),
    };
    let r = study.run(|g| ic_perturbed_flat(g, hbar, amplitude))?;
    // Differences are one fewer than grids; the last grid only serves as reference.
    Ok(ConvergenceTable {
        scheme: scenario.scheme.scheme.to_string(),
        points: r.points,
        differences: r.differences,
        orders: r.orders,
        observed_order: r.observed_order,
        stable: r.stable,
        note: r.note,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub label: String,
    pub points: usize,
    pub positivity: String,
    pub first_negative_time: Option<f64>,
    pub final_time: f64,
    pub wall_clock_seconds: f64,
}

pub fn bench_table(rows: &[BenchRow]) -> String {
    let mut s = String::from("| Method | Positivity | CPU time |\n|---|---|---|\n");
    for r in rows {
        let _ = writeln!(s, "| {} | {} | {:.3}s until t = {:.5} |", r.label, r.positivity, r.wall_clock_seconds, r.final_time);
    }
    s
}

/// Runs the benchmark rows for the selected grids, one after another so the
/// timings do not compete for cores.
pub fn cmd_bench(args: &BenchArgs) -> Result<Vec<BenchRow>> {
    let grids = args.grids.clone().unwrap_or_else(|| vec![100, 200, 400]);
    if let Some(n) = grids.iter().find(|n| ![100, 200, 400].contains(n)) {
        bail!("no benchmark rows for {n} nodes (choose from 100, 200, 400)");
    }
    let mut rows = Vec::new();
    for case in benchmark_cases::<f64>(args.gm_limit) {
        let n = case.scenario.grid.n_points();
        if !grids.contains(&n) {
            continue;
        }
        let clock = Instant::now();
        let out = case.scenario.run()?;
        let wall = clock.elapsed().as_secs_f64();
        let positivity = match (out.first_negative_time, &out.status) {
            (Some(t), _) => format!("Fails at t = {t:.5}"),
            (None, RunStatus::Completed) => "Success".into(),
            (None, s) => s.label().into(),
        };
        let row = BenchRow {
            label: case.label,
            points: n,
            positivity,
            first_negative_time: out.first_negative_time,
            final_time: out.t,
            wall_clock_seconds: wall,
        };
        if !args.quiet {
            eprintln!("{}: {} ({:.3}s)", row.label, row.positivity, row.wall_clock_seconds);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Runs a scenario's fine-grid spin-up and writes the restricted state.
pub fn cmd_spinup(args: &SpinupArgs) -> Result<PathBuf> {
    let scenario = builtin_scenario::<f64>(&args.scenario)?;
    let InitialCondition::SpinUp { spin, .. } = &scenario.initial_condition else {
        return Err(anyhow!("scenario `{}` has no spin-up stage", scenario.name));
    };
    let mut progress = Progress { next: spin.t_end / 100.0, step: spin.t_end / 100.0, quiet: args.quiet };
    let u = scenario.spin_up(&mut progress)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    write_snapshot(&args.out, &scenario.grid, &u)?;
    Ok(args.out.clone())
}

struct Progress {
    next: f64,
    step: f64,
    quiet: bool,
}

impl RunObserver<f64> for Progress {
    fn on_accept(&mut self, t: f64, _state: &Field<f64>, record: &StepRecord<f64>) -> fibercoat::Result<()> {
        if t >= self.next {
            if !self.quiet {
                eprintln!("spin-up t = {t:.3}  min h = {:.4e}", record.min_height);
            }
            self.next += self.step;
        }
        Ok(())
    }
}

pub fn cmd_list() -> String {
    BUILTIN_NAMES.iter().fold(String::new(), |mut s, n| {
        s.push_str(n);
        s.push('\n');
        s
    })
}
