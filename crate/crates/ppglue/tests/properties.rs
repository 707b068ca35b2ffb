use approx::assert_relative_eq;
use proptest::prelude::*;

use ppglue::config::SweepConfig;
use ppglue::fit::fit_rate;
use ppglue::glue::{Cutoff, GluingConfig, MSide, WeightFunction, WeightKind};
use ppglue::grid::{richardson_order, sup_abs, RadialGrid};
use ppglue::lichnerowicz::{
    linearized_apply, n_residual, n_residual_eta, picard_solve, picard_solve_from, q_remainder, CurvaturePath,
    LichnerowiczProblem,
};
use ppglue::model::{ae_decay_constants, AeProfile, ScaledAe};
use ppglue::modes::{repair_momentum, RepairOptions};
use ppglue::norms::{weight_exponent, weighted_norm, FrameTensor, NormSpec};
use ppglue::radial::{divergence, CmcExtrinsicCurvature, RadialMetric, TraceFreeRadialTensor};
use ppglue::report::{csv_string, manifest_string};
use ppglue::sweep::{case_setup, run_sweep};

/// Smooth bump-free test profile: a + b sin(k r) + c r^2.
fn smooth(grid: &RadialGrid, a: f64, b: f64, k: f64, c: f64) -> Vec<f64> {
    grid.map(|r| a + b * (k * r).sin() + c * r * r)
}

fn small_problem(n: usize, amp: f64, mu_amp: f64, lambda: f64, tau: f64) -> LichnerowiczProblem {
    let g = RadialGrid::uniform(0.2, 0.6, n).unwrap();
    let f = g.map(|r| lambda / 3.0 * r * r + amp * r * (1.0 - r));
    let mu = TraceFreeRadialTensor::new(g.map(|r| mu_amp / (r * r * r)));
    LichnerowiczProblem::new(g, RadialMetric::from_f(f), mu, tau, lambda).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trace_free_and_constant_mean_curvature(m in prop::collection::vec(-1e6f64..1e6, 1..64), tau in -5.0f64..5.0) {
        let mu = TraceFreeRadialTensor::new(m.clone());
        prop_assert!(mu.trace().iter().all(|t| t.abs() <= 1e-14));
        let k = CmcExtrinsicCurvature { tau, mu };
        prop_assert!(k.trace().iter().all(|t| *t == tau));
    }

    #[test]
    fn divergence_is_linear(a in -3.0f64..3.0, b in -3.0f64..3.0, k in 0.5f64..4.0) {
        let g = RadialGrid::uniform(0.5, 2.0, 129).unwrap();
        let m1 = smooth(&g, 0.1, 1.0, k, 0.3);
        let m2 = smooth(&g, -0.4, 0.2, 2.0 * k, -0.1);
        let mix: Vec<f64> = m1.iter().zip(&m2).map(|(x, y)| a * x + b * y).collect();
        let d = divergence(&TraceFreeRadialTensor::new(mix), &g);
        let d1 = divergence(&TraceFreeRadialTensor::new(m1), &g);
        let d2 = divergence(&TraceFreeRadialTensor::new(m2), &g);
        let scale = 1.0 + sup_abs(&d1) + sup_abs(&d2);
        for i in 0..g.len() {
            prop_assert!((d[i] - a * d1[i] - b * d2[i]).abs() <= 1e-11 * scale * (1.0 + a.abs() + b.abs()));
        }
    }

    #[test]
    fn linearization_identity(amp in -0.3f64..0.3, mu_amp in 0.0f64..0.01, lambda in 0.0f64..3.0,
                              tau in -1.0f64..1.0, e in -0.3f64..0.3, k in 1.0f64..8.0) {
        let p = small_problem(65, amp, mu_amp, lambda, tau);
        let eta = p.grid.map(|r| e * (k * r).sin());
        let lhs = n_residual_eta(&p, &eta).unwrap();
        let n1 = n_residual_eta(&p, &vec![0.0; eta.len()]).unwrap();
        let lin = linearized_apply(&p, &eta);
        let q = q_remainder(&p, &eta).unwrap();
        for i in 0..eta.len() {
            let scale = 1.0 + lhs[i].abs() + lin[i].abs();
            prop_assert!((lhs[i] - n1[i] - lin[i] - q[i]).abs() <= 1e-12 * scale, "node {i}");
        }
    }

    #[test]
    fn q_is_quadratically_small(mu_amp in 0.0f64..0.05, lambda in 0.0f64..3.0, e in 0.05f64..0.3) {
        let p = small_problem(17, 0.0, mu_amp, lambda, 0.0);
        let eta = vec![e; 17];
        let half: Vec<f64> = eta.iter().map(|x| x / 2.0).collect();
        let (q1, q2) = (q_remainder(&p, &eta).unwrap(), q_remainder(&p, &half).unwrap());
        // Q(eta/2) ~ Q(eta)/4 up to a cubic correction
        for (a, b) in q1.iter().zip(&q2) {
            prop_assert!(b.abs() <= 0.25 * a.abs() * (1.0 + 10.0 * e) + 1e-15);
        }
    }

    #[test]
    fn restriction_is_monotone(lo in 0.3f64..0.9, len in 0.05f64..0.5, grow in 0.0f64..0.3, nu in 1.55f64..1.95) {
        let g = RadialGrid::log_uniform(1e-3, 1.0, 513).unwrap();
        let w = WeightFunction::new(WeightKind::Eps, 10.0, 2f64.powi(-12));
        let a = vec![1.0; g.len()];
        let t = FrameTensor::scalar(&g.map(|r| (7.0 * r).sin() / r));
        let (u0, u1) = (lo, (lo + len).min(1.0));
        let inner = weighted_norm(&t, &a, &w, &NormSpec::new(0, nu, 0, 0).on(u0, u1), &g).unwrap();
        let outer = weighted_norm(&t, &a, &w, &NormSpec::new(0, nu, 0, 0).on(u0 - grow * u0, 1.0), &g).unwrap();
        let whole = weighted_norm(&t, &a, &w, &NormSpec::new(0, nu, 0, 0), &g).unwrap();
        prop_assert!(inner <= outer && outer <= whole);
    }

    #[test]
    fn product_of_scalars(n1 in 1.5f64..2.0, n2 in -1.0f64..1.0, k in 1.0f64..9.0) {
        let g = RadialGrid::log_uniform(1e-3, 0.5, 257).unwrap();
        let w = WeightFunction::new(WeightKind::Eps, 10.0, 2f64.powi(-11));
        let a = vec![1.0; g.len()];
        let f1 = g.map(|r| (k * r).cos() + 0.1 / r);
        let f2 = g.map(|r| r * r - (k * r).sin());
        let prod: Vec<f64> = f1.iter().zip(&f2).map(|(x, y)| x * y).collect();
        let norm = |f: &[f64], nu: f64| weighted_norm(&FrameTensor::scalar(f), &a, &w, &NormSpec::new(0, nu, 0, 0), &g).unwrap();
        prop_assert!(norm(&prod, n1 + n2) <= norm(&f1, n1) * norm(&f2, n2) * (1.0 + 1e-12));
    }

    #[test]
    fn raising_an_index_adds_two(p in 1usize..3, q in 0usize..3, nu in -3.0f64..3.0, j in 0usize..3) {
        let raised = weight_exponent(p - 1, q + 1, nu, j);
        prop_assert!((raised - weight_exponent(p, q, nu, j) - 2.0).abs() <= 4.0 * f64::EPSILON * (1.0 + nu.abs()));
    }

    #[test]
    fn cutoff_plateaus_and_monotone(s in -5.0f64..10.0, ds in 1e-6f64..1.0) {
        let chi = Cutoff;
        let (a, b) = (chi.value(s), chi.value(s + ds));
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b <= a);
        if s <= 1.0 { prop_assert_eq!(a, 1.0); }
        if s >= 4.0 { prop_assert_eq!(a, 0.0); }
    }

    #[test]
    fn glued_weight_positive_and_monotone(k in 9i32..16, x in -12.0f64..0.0, dx in 1e-4f64..1.0) {
        let w = WeightFunction::new(WeightKind::Eps, 10.0, 2f64.powi(-k));
        let (r0, r1) = (2f64.powf(x), 2f64.powf(x + dx));
        let (a, b) = (w.eval(r0), w.eval(r1));
        prop_assert!(a > 0.0 && b >= a);
    }

    #[test]
    fn fit_recovers_power_laws(slope in -2.0f64..3.0, c in 0.01f64..100.0) {
        let eps: Vec<f64> = (10..16).map(|k| 2f64.powi(-k)).collect();
        let vals: Vec<f64> = eps.iter().map(|e| c * e.powf(slope)).collect();
        let f = fit_rate("x", &eps, &vals, slope, 0.2).unwrap();
        prop_assert!((f.slope - slope).abs() < 1e-9 && f.pass && f.r2 > 1.0 - 1e-9);
    }

    #[test]
    fn config_round_trips(c in 5.0f64..50.0, nu in 1.51f64..1.99, n in 64usize..4096, seed in 0..=i64::MAX as u64) {
        let mut cfg = SweepConfig { c, nu, seed, ..SweepConfig::default() };
        cfg.grid.n = n;
        let back = SweepConfig::from_toml_str(&cfg.to_toml().unwrap(), "roundtrip").unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn oversized_seed_rejected(seed in (i64::MAX as u64 + 1)..=u64::MAX) {
        let cfg = SweepConfig { seed, ..SweepConfig::default() };
        prop_assert!(cfg.validate().is_err());
        prop_assert!(cfg.to_toml().is_err());
    }
}

#[test]
fn scaled_decay_constants_scale_with_epsilon() {
    let ae = AeProfile::Analytic { mass: 1.0, c: 1.0 };
    for k in [3, 6, 10] {
        let eps = 2f64.powi(-k);
        let base = ae_decay_constants(&ae, 8.0, 4096.0, 0).unwrap();
        let scaled = ae_decay_constants(&ScaledAe { ae: &ae, epsilon: eps }, 8.0 * eps, 4096.0 * eps, 0).unwrap();
        assert_relative_eq!(scaled.c, eps * base.c, max_relative = 1e-10);
    }
}

#[test]
fn curvature_paths_agree_to_truncation() {
    let diff = |n: usize| {
        let g = RadialGrid::uniform(0.2, 0.6, n).unwrap();
        let f = g.map(|r| r * r + 0.02 / r + 0.1 * (3.0 * r).sin() * r * r);
        let mu = TraceFreeRadialTensor::new(g.map(|r| 0.01 / (r * r * r)));
        let make = |path| {
            LichnerowiczProblem::with_path(g.clone(), RadialMetric::from_f(f.clone()), mu.clone(), 0.0, 3.0, path).unwrap()
        };
        let (pf, pa) = (make(CurvaturePath::FForm), make(CurvaturePath::AForm));
        let phi = g.map(|r| 1.0 + 0.05 * r);
        let (nf, na) = (n_residual(&pf, &phi).unwrap(), n_residual(&pa, &phi).unwrap());
        (1..n - 1).map(|i| (nf[i] - na[i]).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (diff(257), diff(513));
    assert!(e1 < 1e-3 && richardson_order(e1, e2) >= 1.8, "{e1} {e2}");
}

#[test]
fn picard_is_independent_of_start() {
    let cfg = SweepConfig::default();
    let glued = case_setup(&cfg, cfg.epsilons[1], None).unwrap();
    let (mt, _, _) = repair_momentum(&glued, RepairOptions { tol: cfg.tol.linear }).unwrap();
    let p = LichnerowiczProblem::new(glued.grid.clone(), glued.metric(), mt, cfg.tau, cfg.lambda)
        .unwrap()
        .with_weight(glued.weight());
    let tol = cfg.tol.picard;
    let (phi0, rep) = picard_solve(&p, cfg.nu, tol, 50).unwrap();
    // half of the first iterate
    let (_, first) = picard_solve_from(&p, cfg.nu, f64::MAX, 1, &vec![0.0; p.grid.len()]).unwrap();
    let start: Vec<f64> = first.eta.iter().map(|e| 0.5 * e).collect();
    let (phi1, _) = picard_solve_from(&p, cfg.nu, tol, 50, &start).unwrap();
    let w = glued.weight();
    let d = (0..phi0.len()).map(|i| w[i].powf(cfg.nu - 1.0) * (phi0[i] - phi1[i]).abs()).fold(0.0, f64::max);
    assert!(d <= 10.0 * tol.max(rep.eta_norm * 1e-6), "{d}");
    assert!(rep.contraction_ratios.windows(2).skip(1).all(|w| w[1] <= w[0]), "{:?}", rep.contraction_ratios);
}

#[test]
fn glued_flat_background_keeps_structure() {
    // Lambda = 0 background and a mass-free AE end: still glues and repairs
    let cfg = GluingConfig { c: 10.0, epsilon: 2f64.powi(-12), nu: 1.75 };
    let grid = RadialGrid::log_uniform(5.0 * cfg.epsilon, 0.5, 2048).unwrap();
    let g = ppglue::glue::GluedData::build(cfg, MSide::new(0.0, 0.0), AeProfile::Analytic { mass: 0.0, c: 1.0 }, grid)
        .unwrap();
    let (_, _, rep) = repair_momentum(&g, RepairOptions::default()).unwrap();
    assert!(rep.relative_residual <= 1e-8);
}

#[test]
fn report_bytes_are_deterministic() {
    let mut cfg = SweepConfig::default();
    cfg.grid.n = 1024;
    cfg.epsilons = (10..14).map(|k| 2f64.powi(-k)).collect();
    let (a, b) = (run_sweep(&cfg).unwrap(), run_sweep(&cfg).unwrap());
    assert_eq!(csv_string(&a), csv_string(&b));
    assert_eq!(manifest_string(&a), manifest_string(&b));
    let dir = tempfile::tempdir().unwrap();
    ppglue::report::emit_report(&a, dir.path()).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(csv, csv_string(&a));
    let rows = ppglue::report::parse_csv(&csv, "results.csv").unwrap();
    // rows ordered by epsilon (descending, as configured) then quantity
    assert!(rows.windows(2).all(|w| w[0].epsilon > w[1].epsilon
        || (w[0].epsilon == w[1].epsilon && w[0].quantity < w[1].quantity)));
}
