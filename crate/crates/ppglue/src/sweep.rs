//! The epsilon sweep: glue -> measure -> repair -> measure -> solve ->
//! transform -> limit errors, one independent case per epsilon.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::SweepConfig;
use crate::error::{Error, ErrorClass, Result};
use crate::fit::{fit_rate, RateFit};
use crate::glue::{chart_rescaled_metric, GluedData, GluingConfig, MSide};
use crate::grid::RadialGrid;
use crate::lichnerowicz::{
    conformal_transform, n_residual, picard_solve, transformed_hamiltonian, transformed_hamiltonian_areal,
    transformed_momentum, LichnerowiczProblem,
};
use crate::model::{AeProfile, RadialProfile};
use crate::modes::{repair_momentum, RepairOptions};
use crate::norms::{weighted_norm_values, FrameTensor, NormSpec};
use crate::par;
use crate::radial::TraceFreeRadialTensor;

pub const MARGIN: f64 = 0.2;
pub const MAX_PICARD_ITER: usize = 50;
pub const CHART_SAMPLES: usize = 4;
/// Outer compact set, as fractions of grid.rmax.
pub const K_OUTER: (f64, f64) = (0.76, 0.9);
/// Inner compact set in the AE radius rho.
pub const K_INNER: (f64, f64) = (6.0, 10.0);
pub const K_MAX: usize = 1;

/// Expected epsilon exponent of a fitted quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Target {
    Bounded,
    Linear,
    HalfNuMinusOne,
    HalfNu,
    NuMinusOne,
    OneMinusHalfNu,
}

impl Target {
    pub fn exponent(self, nu: f64) -> f64 {
        match self {
            Target::Bounded => 0.0,
            Target::Linear => 1.0,
            Target::HalfNuMinusOne => nu / 2.0 - 1.0,
            Target::HalfNu => nu / 2.0,
            Target::NuMinusOne => nu - 1.0,
            Target::OneMinusHalfNu => 1.0 - nu / 2.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct QuantitySpec {
    pub name: &'static str,
    pub target: Target,
    /// counted by `sweep --check`
    pub gated: bool,
    pub description: &'static str,
}

const fn q(name: &'static str, target: Target, gated: bool, description: &'static str) -> QuantitySpec {
    QuantitySpec { name, target, gated, description }
}

/// Fitted quantities. Every other CSV quantity is a per-epsilon diagnostic.
pub const CATALOGUE: &[QuantitySpec] = &[
    q("mu_weight_minus1", Target::Bounded, false, "|mu| with weight exponent 1 (norm index -1)"),
    q("mu_weight_minus2_outer", Target::Bounded, false, "|mu| unweighted on U (norm index -2)"),
    q("mu_weight0_inner", Target::Linear, false, "|mu| with weight exponent 2 on V (norm index 0)"),
    q("div_mu", Target::HalfNuMinusOne, true, "(div mu)^sharp, norm index nu"),
    q("repair_x", Target::HalfNu, true, "repair field X, norm index nu"),
    q("repair_dmu", Target::HalfNu, true, "mu~ - mu, norm index nu - 2"),
    q("repair_dnorm2", Target::HalfNu, false, "|mu~|^2 - |mu|^2, norm index nu + 1"),
    q("repair_dnorm2_outer", Target::HalfNu, false, "|mu~|^2 - |mu|^2 on U, norm index nu"),
    q("mu_tilde_norm2", Target::Bounded, false, "|mu~|^2, norm index 2"),
    q("mu_tilde_norm2_outer", Target::Bounded, false, "|mu~|^2 on U, norm index 0"),
    q("mu_tilde_norm2_inner", Target::NuMinusOne, false, "|mu~|^2 on V, norm index nu + 1"),
    q("mu_tilde_norm2_band", Target::HalfNu, false, "|mu~|^2 on W, norm index nu"),
    q("lich_defect", Target::HalfNu, true, "N(1), norm index nu + 1"),
    q("lich_eta", Target::HalfNu, true, "phi - 1, norm index nu - 1"),
    q("limit_outer_metric_c0", Target::HalfNu, true, "phi^4 g - g on K_outer, C^0"),
    q("limit_outer_metric_c1", Target::HalfNu, true, "phi^4 g - g on K_outer, C^1"),
    q("limit_outer_curv_c0", Target::HalfNu, true, "K_new - K on K_outer, C^0"),
    q("limit_outer_curv_c1", Target::HalfNu, true, "K_new - K on K_outer, C^1"),
    q("limit_inner_metric_c0", Target::OneMinusHalfNu, true, "eps^-2 phi^4 g - g0 on K_inner, C^0"),
    q("limit_inner_metric_c1", Target::OneMinusHalfNu, true, "eps^-2 phi^4 g - g0 on K_inner, C^1"),
    q("limit_inner_curv_c0", Target::OneMinusHalfNu, true, "eps^-1 K_new - K0 on K_inner, C^0"),
    q("limit_inner_curv_c1", Target::OneMinusHalfNu, true, "eps^-1 K_new - K0 on K_inner, C^1"),
];

/// r^2 floor applied to the momentum-defect fit.
pub const DIV_MU_R2: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CaseStatus {
    Ok,
    Failed { numerical: bool, message: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub epsilon: f64,
    pub status: CaseStatus,
    pub values: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitOutcome {
    pub quantity: String,
    pub target: Target,
    pub gated: bool,
    pub fit: Option<RateFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRun {
    pub config: SweepConfig,
    pub cases: Vec<CaseResult>,
    pub fits: Vec<FitOutcome>,
}

/// Glued data for one epsilon: the analytic AE profile unless one is given.
pub fn case_setup(cfg: &SweepConfig, eps: f64, ae: Option<&AeProfile>) -> Result<GluedData> {
    let gc = GluingConfig { c: cfg.c, epsilon: eps, nu: cfg.nu };
    gc.validate()?;
    let grid = RadialGrid::log_uniform(cfg.grid.rmin * eps, cfg.grid.rmax, cfg.grid.n)?;
    let ae = ae.cloned().unwrap_or(AeProfile::Analytic { mass: cfg.mass, c: cfg.mu0.c });
    GluedData::build(gc, MSide::new(cfg.lambda, cfg.tau), ae, grid)
}

fn norm(t: &FrameTensor, a: &[f64], w: &[f64], spec: NormSpec, grid: &RadialGrid) -> Result<f64> {
    weighted_norm_values(t, a, w, &spec, grid)
}

fn scalar_norm(f: &[f64], a: &[f64], w: &[f64], nu: f64, sub: Option<(f64, f64)>, grid: &RadialGrid) -> Result<f64> {
    let mut s = NormSpec::new(0, nu, 0, 0);
    s.subset = sub;
    norm(&FrameTensor::scalar(f), a, w, s, grid)
}

fn tensor_norm(m: &[f64], a: &[f64], w: &[f64], nu: f64, sub: Option<(f64, f64)>, grid: &RadialGrid) -> Result<f64> {
    let mut s = NormSpec::new(0, nu, 0, 2);
    s.subset = sub;
    norm(&FrameTensor::trace_free(m), a, w, s, grid)
}

/// Run one epsilon through the whole pipeline and collect every quantity.
pub fn run_case(cfg: &SweepConfig, eps: f64) -> Result<BTreeMap<String, f64>> {
    let glued = case_setup(cfg, eps, None)?;
    let grid = &glued.grid;
    let (a, w) = (&glued.a, glued.weight());
    let nu = cfg.nu;
    let n = grid.len();
    let se = eps.sqrt();
    let wf = glued.cfg.weight();
    let (lo, hi) = (grid.r_min(), grid.r_max());
    let u_set = wf.preimage(se / 4.0, f64::INFINITY, lo, hi);
    let v_set = wf.preimage(0.0, 12.0 * se, lo, hi);
    let w_set = wf.preimage(se / 4.0, 12.0 * se, lo, hi);
    let mut out = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        out.insert(k.to_string(), v);
    };

    // glued data
    let m = &glued.m;
    put("mu_weight_minus1", tensor_norm(m, a, &w, -1.0, None, grid)?);
    put("mu_weight_minus2_outer", tensor_norm(m, a, &w, -2.0, Some(u_set), grid)?);
    put("mu_weight0_inner", tensor_norm(m, a, &w, 0.0, Some(v_set), grid)?);
    let div = crate::radial::divergence(&glued.mu(), grid);
    let div_sharp: Vec<f64> = div.iter().zip(a).map(|(d, a)| d / a).collect();
    put("div_mu", norm(&FrameTensor::radial_vector(&div_sharp, a), a, &w, NormSpec::new(0, nu, 1, 0), grid)?);

    // random charts in the gluing band; the band is empty for eps >= 1/(16 C^2)
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ eps.to_bits());
    let (blo, bhi) = (4.0 * cfg.c * eps, 1.0 / (4.0 * cfg.c));
    if blo < bhi {
        let (mut dev, mut sandwich, mut cut) = (0.0f64, 1.0, 0.0f64);
        for _ in 0..CHART_SAMPLES {
            let x_p = blo * (bhi / blo).powf(rng.gen_range(0.01..0.99));
            let s = chart_rescaled_metric(&glued, x_p, 65)?;
            dev = dev.max(s.deviation);
            if !s.weight_sandwich {
                sandwich = 0.0;
            }
            cut = cut.max(s.cutoff_derivs[2]);
        }
        put("diag_chart_deviation", dev);
        put("diag_chart_weight_sandwich", sandwich);
        put("diag_chart_cutoff_d2", cut);
    }
    put("diag_chart_count", if blo < bhi { CHART_SAMPLES as f64 } else { 0.0 });

    // momentum repair
    let (mu_t, _x, rep) = repair_momentum(&glued, RepairOptions { tol: cfg.tol.linear })?;
    put("diag_repair_residual", rep.relative_residual);
    put("diag_repair_pivot_ratio", rep.pivot_ratio);
    put("repair_x", rep.x_norm);
    let dm: Vec<f64> = mu_t.m.iter().zip(m).map(|(t, m)| t - m).collect();
    put("repair_dmu", tensor_norm(&dm, a, &w, nu - 2.0, None, grid)?);
    let n2_old = glued.mu().norm2();
    let n2_new = mu_t.norm2();
    let dn2: Vec<f64> = n2_new.iter().zip(&n2_old).map(|(a, b)| a - b).collect();
    put("repair_dnorm2", scalar_norm(&dn2, a, &w, nu + 1.0, None, grid)?);
    put("repair_dnorm2_outer", scalar_norm(&dn2, a, &w, nu, Some(u_set), grid)?);
    put("mu_tilde_norm2", scalar_norm(&n2_new, a, &w, 2.0, None, grid)?);
    put("mu_tilde_norm2_outer", scalar_norm(&n2_new, a, &w, 0.0, Some(u_set), grid)?);
    put("mu_tilde_norm2_inner", scalar_norm(&n2_new, a, &w, nu + 1.0, Some(v_set), grid)?);
    put("mu_tilde_norm2_band", scalar_norm(&n2_new, a, &w, nu, Some(w_set), grid)?);

    // Lichnerowicz
    let prob = LichnerowiczProblem::new(grid.clone(), glued.metric(), mu_t.clone(), cfg.tau, cfg.lambda)?
        .with_weight(w.clone());
    let n1 = n_residual(&prob, &vec![1.0; n])?;
    put("lich_defect", scalar_norm(&n1, a, &w, nu + 1.0, None, grid)?);
    let (phi, sr) = picard_solve(&prob, nu, cfg.tol.picard, MAX_PICARD_ITER)?;
    put("lich_eta", sr.eta_norm);
    put("diag_picard_iterations", sr.iterations as f64);
    put("diag_picard_max_ratio", sr.contraction_ratios.iter().copied().fold(0.0, f64::max));
    put("diag_lich_residual_w2", sr.final_residual);
    put("diag_lich_residual_sup", sr.residual_sup);
    put("diag_lich_pivot_ratio", sr.pivot_ratio);

    // transformed data, away from a two-node collar
    let t = conformal_transform(&prob, &phi)?;
    let collar = 2..n - 2;
    let h = transformed_hamiltonian(&prob, &sr.eta)?;
    put("diag_transformed_hamiltonian", collar.clone().map(|i| w[i] * w[i] * h[i].abs()).fold(0.0, f64::max));
    let mom = transformed_momentum(&prob, &t);
    put("diag_transformed_momentum", collar.clone().map(|i| mom[i].abs()).fold(0.0, f64::max) / rep.div_before);
    let ha = transformed_hamiltonian_areal(&prob, &t)?;
    put("diag_transformed_hamiltonian_areal", collar.clone().map(|i| w[i] * w[i] * ha[i].abs()).fold(0.0, f64::max));
    put("diag_mean_curvature_error", t.k.trace().iter().map(|tr| (tr - cfg.tau).abs()).fold(0.0, f64::max));

    for (k, v) in limit_errors(&glued, &mu_t, &phi, cfg.tau, K_MAX)? {
        put(&k, v);
    }
    Ok(out)
}

fn admissible(lo: f64, hi: f64, band_lo: f64, band_hi: f64, what: &str) -> Result<()> {
    if lo < band_lo || hi > band_hi {
        return Err(Error::NotAdmissible(format!("{what} [{lo:.4e}, {hi:.4e}] leaves [{band_lo:.4e}, {band_hi:.4e}]")));
    }
    Ok(())
}

/// Ordinary (identity on r) and scaled (r = eps rho) point-particle errors,
/// C^0 ..= C^k_max in the orthonormal frames of the respective backgrounds.
pub fn limit_errors(
    glued: &GluedData,
    mu_t: &TraceFreeRadialTensor,
    phi: &[f64],
    tau: f64,
    k_max: usize,
) -> Result<BTreeMap<String, f64>> {
    let grid = &glued.grid;
    let eps = glued.cfg.epsilon;
    let se = eps.sqrt();
    let mut out = BTreeMap::new();
    let n = grid.len();

    // outer: K_outer in r, beyond every transition band
    let ko = (K_OUTER.0 * grid.r_max(), K_OUTER.1 * grid.r_max());
    admissible(ko.0, ko.1, 8.0 * se, grid.r_max(), "K_outer")?;
    let am = glued.m_side_metric()?;
    let a = &glued.a;
    let p4: Vec<f64> = phi.iter().map(|p| p.powi(4)).collect();
    let pm2: Vec<f64> = phi.iter().map(|p| p.powi(-2)).collect();
    let g_rr: Vec<f64> = (0..n).map(|i| (p4[i] * a[i] - am[i]) / am[i]).collect();
    let g_tt: Vec<f64> = (0..n).map(|i| p4[i] - 1.0).collect();
    let k_rr: Vec<f64> = (0..n).map(|i| pm2[i] * 2.0 * mu_t.m[i] * a[i] / am[i] + tau / 3.0 * g_rr[i]).collect();
    let k_tt: Vec<f64> = (0..n).map(|i| -pm2[i] * mu_t.m[i] + tau / 3.0 * g_tt[i]).collect();
    let ones = vec![1.0; n];
    let pre_rr: Vec<f64> = (0..n).map(|i| (a[i] - am[i]) / am[i]).collect();
    let pre = weighted_norm_values(
        &FrameTensor::radial_sym2(&pre_rr, &vec![0.0; n]),
        &am,
        &ones,
        &NormSpec::new(0, 0.0, 0, 2).on(ko.0, ko.1),
        grid,
    )?;
    let pre_k = grid.index_range(ko.0, ko.1).map(|i| glued.m[i].abs()).fold(0.0, f64::max);
    out.insert("diag_pre_conformal_outer".into(), pre.max(pre_k));
    for k in 0..=k_max {
        let spec = NormSpec::new(k, 0.0, 0, 2).on(ko.0, ko.1);
        let gm = weighted_norm_values(&FrameTensor::radial_sym2(&g_rr, &g_tt), &am, &ones, &spec, grid)?;
        let km = weighted_norm_values(&FrameTensor::radial_sym2(&k_rr, &k_tt), &am, &ones, &spec, grid)?;
        out.insert(format!("limit_outer_metric_c{k}"), gm);
        out.insert(format!("limit_outer_curv_c{k}"), km);
    }

    // inner: K_inner in rho, inside the AE-exact region of both metric and mu
    let (rlo, rhi) = (K_INNER.0 * eps, K_INNER.1 * eps);
    admissible(rlo, rhi, grid.r_min(), 0.5 * se, "K_inner")?;
    let sgrid = grid.scaled(1.0 / eps)?;
    let rho = sgrid.nodes();
    let a0 = rho.iter().map(|&x| glued.ae.a(x)).collect::<Result<Vec<f64>>>()?;
    let m0 = rho.iter().map(|&x| glued.ae.m(x)).collect::<Result<Vec<f64>>>()?;
    let sk_rr: Vec<f64> = (0..n).map(|i| eps * pm2[i] * 2.0 * mu_t.m[i] - 2.0 * m0[i] + eps * tau / 3.0 * p4[i]).collect();
    let sk_tt: Vec<f64> = (0..n).map(|i| -eps * pm2[i] * mu_t.m[i] + m0[i] + eps * tau / 3.0 * p4[i]).collect();
    for k in 0..=k_max {
        let spec = NormSpec::new(k, 0.0, 0, 2).on(K_INNER.0, K_INNER.1);
        let gm = weighted_norm_values(&FrameTensor::radial_sym2(&g_tt, &g_tt), &a0, &ones, &spec, &sgrid)?;
        let km = weighted_norm_values(&FrameTensor::radial_sym2(&sk_rr, &sk_tt), &a0, &ones, &spec, &sgrid)?;
        out.insert(format!("limit_inner_metric_c{k}"), gm);
        out.insert(format!("limit_inner_curv_c{k}"), km);
    }
    Ok(out)
}

pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepRun> {
    cfg.validate()?;
    let cases = par::map(&cfg.epsilons, cfg.parallel, |&eps| match run_case(cfg, eps) {
        Ok(values) => CaseResult { epsilon: eps, status: CaseStatus::Ok, values },
        Err(e) => CaseResult {
            epsilon: eps,
            status: CaseStatus::Failed { numerical: e.class() == ErrorClass::Numerical, message: e.to_string() },
            values: BTreeMap::new(),
        },
    });
    let fits = fit_catalogue(&cases, cfg.nu);
    Ok(SweepRun { config: cfg.clone(), cases, fits })
}

pub fn fit_catalogue(cases: &[CaseResult], nu: f64) -> Vec<FitOutcome> {
    CATALOGUE
        .iter()
        .map(|spec| {
            let (e, v): (Vec<f64>, Vec<f64>) =
                cases.iter().filter_map(|c| c.values.get(spec.name).map(|v| (c.epsilon, *v))).unzip();
            let r = fit_rate(spec.name, &e, &v, spec.target.exponent(nu), MARGIN);
            FitOutcome {
                quantity: spec.name.into(),
                target: spec.target,
                gated: spec.gated,
                error: r.as_ref().err().map(|e| e.to_string()),
                fit: r.ok(),
            }
        })
        .collect()
}

impl SweepRun {
    pub fn fit(&self, name: &str) -> Option<&RateFit> {
        self.fits.iter().find(|f| f.quantity == name).and_then(|f| f.fit.as_ref())
    }

    fn per_case(&self, name: &str, ok: impl Fn(f64) -> bool) -> (bool, String) {
        let mut pass = !self.cases.is_empty();
        let mut worst = Vec::new();
        for c in &self.cases {
            match c.values.get(name) {
                Some(v) => {
                    pass &= ok(*v);
                    worst.push(format!("{v:.2e}"));
                }
                None => pass = false,
            }
        }
        (pass, worst.join(" "))
    }

    /// Per-run acceptance: every case succeeded, the gated fits pass, and
    /// the per-epsilon closure checks hold.
    pub fn checks(&self) -> Vec<Check> {
        let cfg = &self.config;
        let mut out = Vec::new();
        let failed: Vec<String> = self
            .cases
            .iter()
            .filter_map(|c| match &c.status {
                CaseStatus::Failed { message, .. } => Some(format!("{:e}: {message}", c.epsilon)),
                CaseStatus::Ok => None,
            })
            .collect();
        out.push(Check { name: "all cases completed".into(), pass: failed.is_empty(), detail: failed.join("; ") });
        for f in self.fits.iter().filter(|f| f.gated) {
            let (pass, detail) = match &f.fit {
                Some(r) => {
                    let mut pass = r.pass;
                    if f.quantity == "div_mu" {
                        pass &= r.r2 >= DIV_MU_R2;
                    }
                    (pass, format!("slope {:.3} (target {:.3} - {MARGIN}), r2 {:.3}", r.slope, r.target, r.r2))
                }
                None => (false, f.error.clone().unwrap_or_default()),
            };
            out.push(Check { name: format!("rate {}", f.quantity), pass, detail });
        }
        let tl = cfg.tol.linear;
        let tp = cfg.tol.picard;
        let mut per = |name: &str, label: &str, ok: &dyn Fn(f64) -> bool| {
            let (pass, detail) = self.per_case(name, ok);
            out.push(Check { name: label.into(), pass, detail });
        };
        per("diag_repair_residual", "repair divergence <= tol.linear", &|v| v <= tl);
        per("diag_picard_max_ratio", "contraction ratios < 1", &|v| v < 1.0);
        per("diag_pre_conformal_outer", "pre-conformal outer error == 0", &|v| v == 0.0);
        per("diag_transformed_hamiltonian", "transformed hamiltonian <= 10 tol.picard", &|v| v <= 10.0 * tp);
        per("diag_transformed_momentum", "transformed momentum <= 10 tol.linear", &|v| v <= 10.0 * tl);
        out
    }

    pub fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.pass)
    }
}
