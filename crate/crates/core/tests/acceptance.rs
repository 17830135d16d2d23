//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use fibercoat::assembly::{jacobian, residual};
use fibercoat::{
    benchmark_cases, builtin_scenario, cpu_benchmark, ic_perturbed_flat, mass, ConvergenceStudy, DiagnosticsTracker,
    Field, MobilityDiscretization, ModelParams, NewtonConfig, PeriodicGrid, PhysicalModel, RunStatus, Scenario,
    SchemeConfig, SchemeKind, StepRecord,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn run_criterion(id: usize, name: &str, budget: Duration, f: impl FnOnce() -> Verdict) -> bool {
    let clock = Instant::now();
    let v = f();
    let elapsed = clock.elapsed();
    let in_time = elapsed <= budget;
    let pass = v.pass && in_time;
    let budget_note = if in_time { String::new() } else { format!("; over the {:.0?} budget", budget) };
    println!(
        "{} criterion {id}: {name}: {}{budget_note} ({:.2}s)",
        if pass { "PASS" } else { "FAIL" },
        v.detail,
        elapsed.as_secs_f64()
    );
    pass
}

/// Closed-form mean of `h^n` over `[s1, s2]`, written out independently of
/// the library.
fn power_mean_oracle(n: f64, s1: f64, s2: f64) -> f64 {
    // (1/(s2-s1)) * integral 1/v^n dv = (s1^(1-n) - s2^(1-n)) / ((n-1)(s2-s1)),
    // and the integral mean mobility is the reciprocal of that mean.
    let inv_mean = (s1.powf(1.0 - n) - s2.powf(1.0 - n)) / ((n - 1.0) * (s2 - s1));
    1.0 / inv_mean
}

fn criterion_1() -> Verdict {
    let mut rng = StdRng::seed_from_u64(1);
    let disc = MobilityDiscretization::<f64>::integral_mean();
    let mut worst = 0.0f64;
    let mut count = 0;
    for n in [2.0, 2.5, 3.0, 4.0] {
        let model = PhysicalModel::power_law(ModelParams::new(0.0, 1.0, 0.0).with_mobility_order(n), false).unwrap();
        let mut pairs = 0;
        while pairs < 1000 {
            let (s1, s2) = (rng.gen_range(0.05..=5.0), rng.gen_range(0.05..=5.0));
            if f64::max(s1, s2) / f64::min(s1, s2) > 4.0 || s1 == s2 {
                continue;
            }
            pairs += 1;
            let got = disc.value(&model, s1, s2).unwrap();
            let want = power_mean_oracle(n, s1, s2);
            worst = worst.max((got - want).abs() / want.abs());
        }
        count += pairs;
    }
    verdict(worst <= 1e-6, format!("{count} pairs, max relative error {worst:.3e} (tolerance 1e-6)"))
}

fn criterion_2() -> Verdict {
    let model = PhysicalModel::fsm(ModelParams::new(5.0, 0.02, 1e-5)).unwrap();
    let grid = PeriodicGrid::new(32, 1.0).unwrap();
    let dt = 1e-3;
    let mut rng = StdRng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for kind in [SchemeKind::SemiImplicitBem, SchemeKind::ImplicitGm] {
        let config = SchemeConfig::new(kind, model.clone());
        for _ in 0..20 {
            let u = Field::<f64>::new((0..32).map(|_| rng.gen_range(0.3..1.5)).collect());
            let w = Field::<f64>::new((0..32).map(|_| rng.gen_range(0.3..1.5)).collect());
            let j = jacobian(&config, &grid, &u, &w, dt).unwrap().to_dense();
            for c in 0..32 {
                // Five-point central stencil: the residual is O(1e6) where the
                // entries are O(1e2), so the three-point stencil's rounding
                // error alone approaches the tolerance.
                let h = 1e-4 * u[c];
                let at = |k: f64| {
                    let mut v = u.clone();
                    v[c] += k * h;
                    residual(&config, &grid, &v, &w, dt).unwrap()
                };
                let (fp, fm, fp2, fm2) = (at(1.0), at(-1.0), at(2.0), at(-2.0));
                for r in 0..32 {
                    let fd: f64 = (8.0 * (fp[r] - fm[r]) - (fp2[r] - fm2[r])) / (12.0 * h);
                    let exact: f64 = j[r][c];
                    let err = if exact == 0.0 { fd.abs() } else { (fd - exact).abs() / exact.abs() };
                    worst = worst.max(err);
                }
            }
        }
    }
    verdict(worst <= 1e-6, format!("BEM and GM, 20 states each, max relative entry error {worst:.3e} (tolerance 1e-6)"))
}

/// Runs `scenario` with a diagnostics tracker and a full step log.
fn tracked_run(
    scenario: &Scenario<f64>,
    stride: usize,
) -> (fibercoat::RunOutcome<f64>, Vec<StepRecord<f64>>, DiagnosticsTracker<f64>) {
    let mut sim = scenario.simulation().unwrap().with_log(true);
    let mut tracker = DiagnosticsTracker::new(scenario.model.clone(), scenario.grid.clone()).with_stride(stride);
    let out = sim.advance(scenario.t_end, &mut tracker).unwrap();
    tracker.flush();
    (out, sim.log().to_vec(), tracker)
}

/// Entropy inequality over the tracker records of one BEM run.
struct EntropyCheck {
    records: usize,
    undefined: usize,
    min_relative_slack: f64,
    /// Same minimum over the records after the initial one, where the
    /// slack is zero by construction.
    min_later_slack: f64,
}

impl EntropyCheck {
    fn of(tracker: &DiagnosticsTracker<f64>) -> Self {
        let recs = tracker.records();
        Self {
            records: recs.len(),
            undefined: recs.iter().filter(|r| r.slack().is_none()).count(),
            min_relative_slack: tracker.min_relative_slack().unwrap_or(f64::NAN),
            min_later_slack: recs
                .iter()
                .skip(1)
                .filter_map(|r| Some(r.slack()? / r.entropy_bound?.abs()))
                .fold(f64::INFINITY, f64::min),
        }
    }

    fn holds(&self) -> bool {
        self.records > 0 && self.undefined == 0 && self.min_relative_slack >= -1e-6
    }
}

fn main() {
    let mut results = Vec::new();

    results.push(run_criterion(1, "integral-mean mobility matches h^n closed form", Duration::from_secs(1), criterion_1));
    results.push(run_criterion(2, "analytic Jacobian matches central differences", Duration::from_secs(5), criterion_2));

    let mut entropy_checks: Vec<(&str, EntropyCheck)> = Vec::new();

    results.push(run_criterion(3, "mass conservation on adaptive_smooth", Duration::from_secs(10), || {
        let mut s = builtin_scenario::<f64>("adaptive_smooth").unwrap();
        s.newton = NewtonConfig::with_tolerance(1e-9);
        let alpha = s.model.params().alpha;
        let m0 = mass(&s.grid, &s.initial_state().unwrap(), alpha);
        let (out, _, tracker) = tracked_run(&s, 1);
        let drift = (mass(&s.grid, &out.state, alpha) - m0).abs() / m0.abs();
        entropy_checks.push(("adaptive_smooth", EntropyCheck::of(&tracker)));
        verdict(
            out.status.is_completed() && out.t >= 1.0 && drift <= 1e-6,
            format!("{} to t = {:.4}, relative mass drift {drift:.3e} (tolerance 1e-6)", out.status.label(), out.t),
        )
    }));

    results.push(run_criterion(4, "BEM positivity on adaptive_singular", Duration::from_secs(30), || {
        let s = builtin_scenario::<f64>("adaptive_singular").unwrap();
        let (out, log, tracker) = tracked_run(&s, 1);
        let accepted: Vec<_> = log.iter().filter(|r| r.accepted).collect();
        let min_h = accepted.iter().map(|r| r.min_height).fold(f64::INFINITY, f64::min);
        let all_positive = accepted.iter().all(|r| r.min_height > 0.0);
        entropy_checks.push(("adaptive_singular", EntropyCheck::of(&tracker)));
        verdict(
            out.status.is_completed() && out.t >= 1.0 && all_positive && min_h >= 1e-5,
            format!(
                "{} to t = {:.4}, {} accepted steps, min h {min_h:.4e} (need > 0 at every step and >= 1e-5)",
                out.status.label(),
                out.t,
                accepted.len()
            ),
        )
    }));

    results.push(run_criterion(5, "GM goes negative, BEM stays positive (cpu_benchmark)", Duration::from_secs(120), || {
        let mut parts = Vec::new();
        let mut pass = true;
        for (n, lo, hi) in [(100, 0.1, 1.0), (200, 0.5, 2.0)] {
            let gm = cpu_benchmark::<f64>(n, SchemeKind::ImplicitGm, false, 5.0).run().unwrap();
            let t_neg = gm.first_negative_time;
            let inside = t_neg.is_some_and(|t| (lo..=hi).contains(&t));
            pass &= inside;
            parts.push(match t_neg {
                Some(t) => format!("GM dx = {}: negative at t = {t:.4} (window [{lo}, {hi}])", 1.0 / n as f64),
                None => format!("GM dx = {}: no negative height by t = {:.3}", 1.0 / n as f64, gm.t),
            });
            let bem = cpu_benchmark::<f64>(n, SchemeKind::SemiImplicitBem, false, 3.5);
            let (out, log, tracker) = tracked_run(&bem, 10);
            let min_h = log.iter().filter(|r| r.accepted).map(|r| r.min_height).fold(f64::INFINITY, f64::min);
            let ok = out.status.is_completed() && out.t >= 3.5 && min_h > 0.0;
            pass &= ok;
            parts.push(format!("BEM dx = {}: {} to t = {:.3}, min h {min_h:.3e}", 1.0 / n as f64, out.status.label(), out.t));
            entropy_checks.push((if n == 100 { "cpu_benchmark BEM dx = 0.01" } else { "cpu_benchmark BEM dx = 0.005" }, EntropyCheck::of(&tracker)));
        }
        verdict(pass, parts.join("; "))
    }));

    let entropy_pass = entropy_checks.len() == 4 && entropy_checks.iter().all(|(_, c)| c.holds());
    let entropy_detail = entropy_checks
        .iter()
        .map(|(name, c)| {
            format!(
                "{name}: {} records, {} undefined, min (bound - entropy)/|bound| {:.3e} ({:.3e} after t0)",
                c.records, c.undefined, c.min_relative_slack, c.min_later_slack
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    results.push(run_criterion(6, "entropy estimate in the BEM runs of criteria 3-5", Duration::MAX, || {
        verdict(entropy_pass, format!("{entropy_detail} (tolerance -1e-6)"))
    }));

    results.push(run_criterion(7, "second-order spatial self-convergence", Duration::from_secs(60), || {
        let base = builtin_scenario::<f64>("adaptive_smooth").unwrap();
        let mut parts = Vec::new();
        let mut pass = true;
        for kind in [SchemeKind::SemiImplicitBem, SchemeKind::ImplicitGm] {
            let study = ConvergenceStudy {
                scheme: SchemeConfig::new(kind, base.model.clone()),
                length: 1.0,
                points: vec![64, 128, 256],
                dt: 1e-5,
                t_check: 0.05,
                newton: NewtonConfig::with_tolerance(1e-8),
            };
            let r = study.run(|g: &PeriodicGrid<f64>| ic_perturbed_flat(g, 0.95, 0.01)).unwrap();
            let ok = r.stable && (1.8..=2.2).contains(&r.observed_order);
            pass &= ok;
            parts.push(format!("{kind} order {:.4}", r.observed_order));
        }
        verdict(pass, format!("{} (window [1.8, 2.2])", parts.join(", ")))
    }));

    results.push(run_criterion(8, "adaptive controller trace on adaptive_smooth", Duration::from_secs(10), || {
        let s = builtin_scenario::<f64>("adaptive_smooth").unwrap();
        let (out, log, _) = tracked_run(&s, usize::MAX);
        let accepted: Vec<_> = log.iter().filter(|r| r.accepted).collect();
        let factors_ok = accepted.iter().all(|r| {
            let want = if r.growth_event { 1.01 * 1.2 } else { 1.01 };
            ((r.dt_after / r.dt_used) - want).abs() <= 1e-12 * want
        });
        let growth_steps: Vec<usize> =
            accepted.iter().enumerate().filter(|(_, r)| r.growth_event).map(|(k, _)| k + 1).collect();
        let every_third = growth_steps.windows(2).all(|w| w[1] - w[0] == 3);
        let events = growth_steps.len();
        verdict(
            out.failed_attempts == 0 && factors_ok && every_third && (18..=22).contains(&events),
            format!(
                "{} Newton failures, per-step factors {}, growth at accepted steps {:?}, {events} events (want 20 +- 2)",
                out.failed_attempts,
                if factors_ok { "1.01 / 1.212" } else { "wrong" },
                growth_steps
            ),
        )
    }));

    results.push(run_criterion(9, "no growth events through the near-singular window", Duration::from_secs(30), || {
        let s = builtin_scenario::<f64>("adaptive_singular").unwrap();
        let (_, log, _) = tracked_run(&s, usize::MAX);
        let (lo, hi) = (0.03, 0.12);
        let mut marks = vec![lo];
        marks.extend(log.iter().filter(|r| r.growth_event).map(|r| r.t_before + r.dt_used).filter(|t| *t > lo && *t < hi));
        marks.push(hi);
        let (gap_start, gap_end) = marks
            .windows(2)
            .map(|w| (w[0], w[1]))
            .max_by(|a, b| (a.1 - a.0).total_cmp(&(b.1 - b.0)))
            .unwrap();
        // A single step without growth would trivially qualify; require a
        // sustained stretch of at least 0.02.
        let gap = gap_end - gap_start;
        verdict(gap >= 0.02, format!("longest stretch without growth in [0.03, 0.12]: [{gap_start:.5}, {gap_end:.5}] ({gap:.4}, need >= 0.02)"))
    }));

    results.push(run_criterion(10, "adaptive BEM faster than fixed BEM at dx = 0.0025", Duration::from_secs(120), || {
        let cases: Vec<_> = benchmark_cases::<f64>(5.0)
            .into_iter()
            .filter(|c| c.scenario.grid.n_points() == 400 && c.scenario.scheme.scheme == SchemeKind::SemiImplicitBem)
            .collect();
        let mut times = Vec::new();
        let mut ok = cases.len() == 2;
        for c in &cases {
            let clock = Instant::now();
            let out = c.scenario.run().unwrap();
            let secs = clock.elapsed().as_secs_f64();
            ok &= out.status.is_completed() && !matches!(out.status, RunStatus::PositivityBreach { .. });
            times.push((c.label.clone(), secs, out.t));
        }
        let (fixed, adaptive) = (times[0].1, times[1].1);
        verdict(
            ok && adaptive < fixed,
            times.iter().map(|(l, s, t)| format!("{l}: {s:.3}s until t = {t:.4}")).collect::<Vec<_>>().join(", "),
        )
    }));

    let failed = results.iter().filter(|p| !**p).count();
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
