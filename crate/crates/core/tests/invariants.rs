use fibercoat::io::{read_snapshot, write_snapshot};
use fibercoat::profile::fit_profile;
use fibercoat::scenarios::{nondimensionalize, DimensionalScaling};
use fibercoat::{dimensionalize, entropy_value, mass, EntropySpec, Field, ModelParams, PeriodicGrid, PhysicalModel, ProfileOptions};
use proptest::prelude::*;

fn scratch(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("fibercoat-invariants-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

/// Composite five-point Gauss-Legendre on `[a, b]`.
fn gauss(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    const X: [f64; 5] = [0.0, -0.538_469_310_105_683_1, 0.538_469_310_105_683_1, -0.906_179_845_938_664, 0.906_179_845_938_664];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|p| {
            let mid = a + (p as f64 + 0.5) * h;
            X.iter().zip(W).map(|(x, w)| w * f(mid + 0.5 * h * x)).sum::<f64>() * 0.5 * h
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mass_is_invariant_under_rotation(
        values in prop::collection::vec(0.01f64..3.0, 8..64),
        shift in 0usize..64,
        alpha in 0.0f64..10.0,
    ) {
        let n = values.len();
        let grid = PeriodicGrid::new(n, 2.5).unwrap();
        let mut rotated = values.clone();
        rotated.rotate_left(shift % n);
        let (m0, m1) = (mass(&grid, &Field::new(values), alpha), mass(&grid, &Field::new(rotated), alpha));
        prop_assert!((m0 - m1).abs() <= 1e-13 * m0.abs());
    }

    #[test]
    fn entropy_derivative_matches_inner_integral(
        h in 0.1f64..4.0,
        a in 0.2f64..3.0,
        alpha in 0.0f64..8.0,
        eta in 0.01f64..1.0,
    ) {
        let model = PhysicalModel::fsm(ModelParams::new(alpha, eta, 0.0)).unwrap();
        let spec = EntropySpec { base_point_a: a, outer_base_b: 1.0, tolerance: 1e-13 };
        let d = 1e-4 * h;
        let g = |v: f64| entropy_value(&model, &spec, v).unwrap();
        let fd = (g(h + d) - g(h - d)) / (2.0 * d);
        let inner = gauss(|v| 1.0 / model.mobility(v).unwrap(), a, h, 200);
        let want = (1.0 + alpha * h) * inner;
        prop_assert!((fd - want).abs() <= 1e-6 * want.abs().max(1e-3), "fd {fd} want {want}");
    }

    #[test]
    fn dimensionalize_preserves_order_and_sign(
        hs in prop::collection::vec(-2.0f64..5.0, 8..32),
        l in 0.1f64..10.0,
        hscale in 0.01f64..10.0,
        tscale in 0.01f64..10.0,
        t in 0.0f64..100.0,
    ) {
        let grid = PeriodicGrid::new(hs.len(), 1.0).unwrap();
        let scaling = DimensionalScaling::new(l, hscale, tscale).unwrap();
        let snap = dimensionalize(&grid, t, &Field::new(hs.clone()), &scaling).unwrap();
        for i in 0..hs.len() {
            prop_assert_eq!(snap.h[i].signum(), hs[i].signum());
            for j in 0..hs.len() {
                if hs[i] < hs[j] {
                    prop_assert!(snap.h[i] < snap.h[j]);
                }
            }
        }
        prop_assert!(snap.x.windows(2).all(|w| w[0] < w[1]));
        let back = nondimensionalize(&snap, &scaling);
        prop_assert!((back.t - t).abs() <= 1e-14 * t.max(1.0));
        for (b, h) in back.h.iter().zip(&hs) {
            prop_assert!((b - h).abs() <= 1e-14 * h.abs().max(1.0));
        }
    }

    #[test]
    fn snapshots_round_trip_bit_exactly(
        values in prop::collection::vec(prop_oneof![1e-300f64..1e-290, 1e-8f64..1e-6, -1.0f64..1.0, 1.0f64..1e12], 8..40),
        case in 0u32..u32::MAX,
    ) {
        let grid = PeriodicGrid::new(values.len(), 24.0).unwrap();
        let path = scratch(&format!("snap-{case}.csv"));
        let u = Field::new(values);
        write_snapshot(&path, &grid, &u).unwrap();
        let back = read_snapshot(&path, &grid).unwrap();
        std::fs::remove_file(&path).ok();
        prop_assert_eq!(back.as_slice(), u.as_slice());
    }

    #[test]
    fn fitted_profile_is_periodic(
        coef in prop::collection::vec(-0.05f64..0.05, 6),
        c in 0.5f64..2.0,
        n in 40usize..120,
    ) {
        let xs: Vec<f64> = (0..=n).map(|i| 3.0 * i as f64 / n as f64).collect();
        let hs: Vec<f64> = xs
            .iter()
            .map(|x| {
                let s = 2.0 * std::f64::consts::PI * x / 3.0;
                c + coef[0] * s.cos() + coef[1] * s.sin() + coef[2] * (2.0 * s).cos() + coef[3] * (2.0 * s).sin()
                    + coef[4] * (3.0 * s).cos() + coef[5] * (3.0 * s).sin()
            })
            .collect();
        let fit = fit_profile(&xs, &hs, &ProfileOptions { modes: Some(4), ..Default::default() }).unwrap();
        prop_assert!((fit.eval(0.0) - fit.eval(1.0)).abs() <= 1e-12);
        let grid = PeriodicGrid::new(32, 1.0).unwrap();
        let u = fit.sample(&grid).unwrap();
        prop_assert!((u[0] - fit.eval(1.0)).abs() <= 1e-12);
    }
}
