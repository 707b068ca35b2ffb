//! Cutoffs, weight functions, dilation charts and the glued family
//! (g_eps, mu_eps) built from a compact side and a scaled AE end.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::model::{AeProfile, RadialProfile, ScaledAe};
use crate::radial::{RadialMetric, TraceFreeRadialTensor};

pub const CUTOFF_ORDER: usize = 4;

// Truncated Taylor series in one variable, enough for four derivatives.
#[derive(Debug, Clone, Copy)]
struct Jet([f64; CUTOFF_ORDER + 1]);

impl Jet {
    fn var(x: f64, dx: f64) -> Jet {
        let mut c = [0.0; CUTOFF_ORDER + 1];
        c[0] = x;
        c[1] = dx;
        Jet(c)
    }
    fn zero() -> Jet {
        Jet([0.0; CUTOFF_ORDER + 1])
    }
    fn add(self, o: Jet) -> Jet {
        let mut c = self.0;
        c.iter_mut().zip(o.0).for_each(|(a, b)| *a += b);
        Jet(c)
    }
    fn mul(self, o: Jet) -> Jet {
        let mut c = [0.0; CUTOFF_ORDER + 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate().take(CUTOFF_ORDER + 1 - i) {
                c[i + j] += a * b;
            }
        }
        Jet(c)
    }
    fn recip(self) -> Jet {
        let a = self.0;
        let mut c = [0.0; CUTOFF_ORDER + 1];
        c[0] = 1.0 / a[0];
        for k in 1..=CUTOFF_ORDER {
            let s: f64 = (1..=k).map(|j| a[j] * c[k - j]).sum();
            c[k] = -s / a[0];
        }
        Jet(c)
    }
    fn exp(self) -> Jet {
        let a = self.0;
        let mut c = [0.0; CUTOFF_ORDER + 1];
        c[0] = a[0].exp();
        for k in 1..=CUTOFF_ORDER {
            let s: f64 = (1..=k).map(|j| j as f64 * a[j] * c[k - j]).sum();
            c[k] = s / k as f64;
        }
        Jet(c)
    }
    fn scale(self, s: f64) -> Jet {
        Jet(self.0.map(|v| v * s))
    }
}

// psi(t) = exp(-1/t) for t > 0, else 0
fn psi(t: Jet) -> Jet {
    if t.0[0] <= 1.0 / 700.0 {
        return Jet::zero();
    }
    t.recip().scale(-1.0).exp()
}

/// chi(s) = psi((4-s)/3) / (psi((4-s)/3) + psi((s-1)/3)): 1 on (-inf, 1],
/// 0 on [4, inf), symmetric about 5/2.
#[derive(Debug, Clone, Copy, Default)]
pub struct Cutoff;

impl Cutoff {
    pub fn eval(&self, s: f64, deriv: usize) -> Result<f64> {
        if deriv > CUTOFF_ORDER {
            return Err(Error::DerivativeOrder(deriv));
        }
        Ok(self.jet(s)[deriv])
    }

    /// Value and derivatives 0..=4 at s.
    pub fn jet(&self, s: f64) -> [f64; CUTOFF_ORDER + 1] {
        let mut out = [0.0; CUTOFF_ORDER + 1];
        if s <= 1.0 {
            out[0] = 1.0;
            return out;
        }
        if s >= 4.0 {
            return out;
        }
        let a = psi(Jet::var((4.0 - s) / 3.0, -1.0 / 3.0));
        let b = psi(Jet::var((s - 1.0) / 3.0, 1.0 / 3.0));
        let chi = a.mul(a.add(b).recip());
        let mut fact = 1.0;
        for (k, o) in out.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *o = chi.0[k] * fact;
        }
        out
    }

    pub fn value(&self, s: f64) -> f64 {
        self.jet(s)[0]
    }
}

/// Quintic smoothstep clamped to [0, 1].
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WeightKind {
    /// glued manifold
    Eps,
    /// compact side minus the gluing point
    M,
    /// AE end, in its own radius rho
    Zero,
    /// flat space
    R,
    /// constant 1, turning weighted norms into plain C^k norms
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightFunction {
    pub kind: WeightKind,
    pub c: f64,
    pub epsilon: f64,
}

impl WeightFunction {
    pub fn new(kind: WeightKind, c: f64, epsilon: f64) -> Self {
        WeightFunction { kind, c, epsilon }
    }

    pub fn eval(&self, r: f64) -> f64 {
        let c = self.c;
        match self.kind {
            WeightKind::R => r,
            WeightKind::Unit => 1.0,
            WeightKind::M => w_m(r, c),
            WeightKind::Zero => w_0(r, c),
            WeightKind::Eps => {
                if r >= 2.0 * c * self.epsilon {
                    w_m(r, c)
                } else {
                    self.epsilon * w_0(r / self.epsilon, c)
                }
            }
        }
    }

    pub fn on(&self, grid: &RadialGrid) -> Vec<f64> {
        grid.map(|r| self.eval(r))
    }

    /// Radius interval {r in [lo, hi] : a < w(r) < b} for a monotone weight.
    pub fn preimage(&self, a: f64, b: f64, lo: f64, hi: f64) -> (f64, f64) {
        let first_above = |level: f64| {
            if self.eval(lo) > level {
                return lo;
            }
            if self.eval(hi) <= level {
                return hi;
            }
            let (mut x0, mut x1) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (x0 + x1);
                if self.eval(mid) > level {
                    x1 = mid;
                } else {
                    x0 = mid;
                }
            }
            x1
        };
        let r_a = first_above(a);
        let r_b = if b.is_finite() { first_above(b) } else { hi };
        (r_a, r_b.max(r_a))
    }
}

fn w_m(s: f64, c: f64) -> f64 {
    let (s0, s1) = (0.5 / c, 2.0 / (3.0 * c));
    if s <= s0 {
        s
    } else if s >= s1 {
        1.0 / c
    } else {
        let t = smoothstep((s - s0) / (s1 - s0));
        s * (1.0 - t) + t / c
    }
}

fn w_0(s: f64, c: f64) -> f64 {
    let (s0, s1) = (1.5 * c, 2.0 * c);
    if s <= s0 {
        c
    } else if s >= s1 {
        s
    } else {
        let t = smoothstep((s - s0) / (s1 - s0));
        c * (1.0 - t) + s * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GluingConfig {
    pub c: f64,
    pub epsilon: f64,
    pub nu: f64,
}

impl GluingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 1.0) {
            return Err(Error::Config(format!("C = {} must exceed 1", self.c)));
        }
        let cap = 1.0 / (4.0 * self.c * self.c);
        if !(self.epsilon > 0.0 && self.epsilon <= cap) {
            return Err(Error::Config(format!("epsilon = {} outside (0, (2C)^-2 = {cap}]", self.epsilon)));
        }
        if !(self.nu > 1.5 && self.nu < 2.0) {
            return Err(Error::Config(format!("nu = {} outside (3/2, 2)", self.nu)));
        }
        Ok(())
    }

    pub fn sqrt_eps(&self) -> f64 {
        self.epsilon.sqrt()
    }

    pub fn weight(&self) -> WeightFunction {
        WeightFunction::new(WeightKind::Eps, self.c, self.epsilon)
    }
}

/// Compact side: the time-symmetric slice of (anti-)de Sitter with
/// effective constant Lambda - tau^2/3, so that it solves the constraints
/// with mu = 0 and constant mean curvature tau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MSide {
    pub lambda_eff: f64,
}

impl MSide {
    pub fn new(lambda: f64, tau: f64) -> Self {
        MSide { lambda_eff: lambda - tau * tau / 3.0 }
    }
}

impl RadialProfile for MSide {
    fn a(&self, r: f64) -> Result<f64> {
        let f = self.lambda_eff * r * r / 3.0;
        if !(f < 1.0) {
            return Err(Error::Horizon { r });
        }
        Ok(1.0 / (1.0 - f))
    }
    fn m(&self, _r: f64) -> Result<f64> {
        Ok(0.0)
    }
    fn range(&self) -> (f64, f64) {
        if self.lambda_eff > 0.0 { (0.0, (3.0 / self.lambda_eff).sqrt()) } else { (0.0, f64::INFINITY) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MetricRegime {
    AeExact,
    Transition,
    MExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MuRegime {
    AeExact,
    InnerTransition,
    Silent,
    OuterTransition,
    MExact,
}

pub fn region_classify(cfg: &GluingConfig, r: f64) -> (MetricRegime, MuRegime) {
    let s = cfg.sqrt_eps();
    let metric = if r <= s {
        MetricRegime::AeExact
    } else if r >= 4.0 * s {
        MetricRegime::MExact
    } else {
        MetricRegime::Transition
    };
    let mu = if r <= 0.5 * s {
        MuRegime::AeExact
    } else if r < s {
        MuRegime::InnerTransition
    } else if r <= 4.0 * s {
        MuRegime::Silent
    } else if r < 8.0 * s {
        MuRegime::OuterTransition
    } else {
        MuRegime::MExact
    };
    (metric, mu)
}

/// Minimum number of nodes required inside every transition band.
pub const MIN_BAND_NODES: usize = 32;

#[derive(Debug, Clone)]
pub struct GluedData {
    pub cfg: GluingConfig,
    pub grid: RadialGrid,
    pub a: Vec<f64>,
    pub m: Vec<f64>,
    pub mside: MSide,
    pub ae: AeProfile,
    pub chi: Cutoff,
}

impl GluedData {
    pub fn build(cfg: GluingConfig, mside: MSide, ae: AeProfile, grid: RadialGrid) -> Result<Self> {
        cfg.validate()?;
        let s = cfg.sqrt_eps();
        for (lo, hi) in [(s, 4.0 * s), (0.5 * s, s), (4.0 * s, 8.0 * s)] {
            let (a, b) = (lo.max(grid.r_min()), hi.min(grid.r_max()));
            if b > a {
                let k = grid.index_range(a, b).len();
                // bands cut by the domain only need proportional coverage
                let need = ((MIN_BAND_NODES as f64) * ((b / a).ln() / (hi / lo).ln())).floor() as usize;
                if k < need {
                    return Err(Error::Config(format!(
                        "only {k} nodes in transition band [{lo:.3e}, {hi:.3e}], need {MIN_BAND_NODES}"
                    )));
                }
            }
        }
        let mut g = GluedData { cfg, grid, a: Vec::new(), m: Vec::new(), mside, ae, chi: Cutoff };
        let nodes = g.grid.nodes().to_vec();
        g.a = nodes.iter().map(|&r| g.a_at(r)).collect::<Result<_>>()?;
        g.m = nodes.iter().map(|&r| g.m_at(r)).collect::<Result<_>>()?;
        if let Some(i) = g.a.iter().position(|a| !(*a > 0.0)) {
            return Err(Error::DegenerateMetric { r: nodes[i] });
        }
        Ok(g)
    }

    fn scaled(&self) -> ScaledAe<'_> {
        ScaledAe { ae: &self.ae, epsilon: self.cfg.epsilon }
    }

    /// A_eps(r) = chi(r/sqrt eps) A0(r/eps) + (1 - chi) A_M(r); exact regions skip the blend.
    pub fn a_at(&self, r: f64) -> Result<f64> {
        let s = r / self.cfg.sqrt_eps();
        if s <= 1.0 {
            return self.scaled().a(r);
        }
        if s >= 4.0 {
            return self.mside.a(r);
        }
        let x = self.chi.value(s);
        Ok(x * self.scaled().a(r)? + (1.0 - x) * self.mside.a(r)?)
    }

    /// m_eps(r) = chi(6r/sqrt eps - 2) m_ae(r) + (1 - chi)(3r/(4 sqrt eps) - 2) m_M(r)
    pub fn m_at(&self, r: f64) -> Result<f64> {
        let se = self.cfg.sqrt_eps();
        match region_classify(&self.cfg, r).1 {
            MuRegime::AeExact => self.scaled().m(r),
            MuRegime::Silent => Ok(0.0),
            MuRegime::MExact => self.mside.m(r),
            MuRegime::InnerTransition => Ok(self.chi.value(6.0 * r / se - 2.0) * self.scaled().m(r)?),
            MuRegime::OuterTransition => {
                Ok((1.0 - self.chi.value(0.75 * r / se - 2.0)) * self.mside.m(r)?)
            }
        }
    }

    pub fn metric(&self) -> RadialMetric {
        RadialMetric::from_a(self.a.clone())
    }

    pub fn mu(&self) -> TraceFreeRadialTensor {
        TraceFreeRadialTensor::new(self.m.clone())
    }

    pub fn weight(&self) -> Vec<f64> {
        self.cfg.weight().on(&self.grid)
    }

    /// M-side metric sampled on the same nodes.
    pub fn m_side_metric(&self) -> Result<Vec<f64>> {
        self.grid.nodes().iter().map(|&r| self.mside.a(r)).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartSample {
    pub x_p: f64,
    /// chart coordinate along the axis
    pub t: Vec<f64>,
    /// rr component of g_P; the transverse components are exactly 1
    pub g_rr: Vec<f64>,
    /// sup |g_P - delta| over t in [-1/2, 1/2]
    pub deviation: f64,
    /// w_eps(Phi(t)) / w_eps(Phi(0)) stayed inside [1/2, 3/2] for t in [-1, 1]
    pub weight_sandwich: bool,
    /// sup over t in [-1, 1] of |chi|, |d chi|, |dd chi| for chi(|H_P(x)|/sqrt eps)
    pub cutoff_derivs: [f64; 3],
}

/// Pull g_eps back to the unit ball by H_P(x) = x_P + (|x_P|/2) x and
/// rescale by 4/|x_P|^2, sampling along the chart axis.
pub fn chart_rescaled_metric(glued: &GluedData, x_p: f64, samples: usize) -> Result<ChartSample> {
    let cfg = &glued.cfg;
    let (lo, hi) = (4.0 * cfg.c * cfg.epsilon, 1.0 / (4.0 * cfg.c));
    if !(x_p > lo && x_p < hi) {
        return Err(Error::ChartOutOfBand { x: x_p, lo, hi });
    }
    let samples = samples.max(3);
    let se = cfg.sqrt_eps();
    let w = cfg.weight();
    let w0 = w.eval(x_p);
    let mut t = Vec::new();
    let mut g_rr = Vec::new();
    let mut deviation: f64 = 0.0;
    let mut sandwich = true;
    let mut cd = [0.0f64; 3];
    for k in 0..samples {
        let tk = -1.0 + 2.0 * k as f64 / (samples - 1) as f64;
        let r = x_p * (1.0 + 0.5 * tk);
        let wr = w.eval(r);
        if wr < 0.5 * w0 * (1.0 - 1e-14) || wr > 1.5 * w0 * (1.0 + 1e-14) {
            sandwich = false;
        }
        let j = glued.chi.jet(r / se);
        let k1 = 0.5 * x_p / se;
        cd[0] = cd[0].max(j[0].abs());
        cd[1] = cd[1].max(j[1].abs() * k1);
        let radial = j[2].abs() * k1 * k1;
        let trans = j[1].abs() * 0.25 * x_p * x_p / (se * r);
        cd[2] = cd[2].max(radial.max(trans));
        if tk.abs() <= 0.5 {
            let a = glued.a_at(r)?;
            deviation = deviation.max((a - 1.0).abs());
            t.push(tk);
            g_rr.push(a);
        }
    }
    Ok(ChartSample { x_p, t, g_rr, deviation, weight_sandwich: sandwich, cutoff_derivs: cd })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cutoff_examples() {
        let chi = Cutoff;
        assert_eq!(chi.eval(1.0, 0).unwrap(), 1.0);
        assert_eq!(chi.eval(4.0, 0).unwrap(), 0.0);
        assert_eq!(chi.eval(2.5, 0).unwrap(), 0.5);
        assert_eq!(chi.eval(0.5, 1).unwrap(), 0.0);
        assert!(matches!(chi.eval(2.0, 5), Err(Error::DerivativeOrder(5))));
    }

    #[test]
    fn cutoff_derivatives_match_differences() {
        let chi = Cutoff;
        let h = 1e-4;
        for s in [1.3, 2.0, 2.5, 3.1, 3.8] {
            for k in 0..CUTOFF_ORDER {
                let fd = (chi.eval(s + h, k).unwrap() - chi.eval(s - h, k).unwrap()) / (2.0 * h);
                let ex = chi.eval(s, k + 1).unwrap();
                assert!((fd - ex).abs() < 1e-5 * (1.0 + ex.abs()), "s={s} k={k}: {fd} vs {ex}");
            }
        }
    }

    #[test]
    fn weight_examples() {
        let w = WeightFunction::new(WeightKind::Eps, 10.0, 0.001);
        assert_eq!(w.eval(0.03), 0.03);
        assert!((w.eval(0.012) - 0.01).abs() < 1e-16);
        assert!((w.eval(0.5) - 0.1).abs() < 1e-16);
        let wm = WeightFunction::new(WeightKind::M, 10.0, 0.0);
        assert_eq!(wm.eval(0.04), 0.04);
        let w0 = WeightFunction::new(WeightKind::Zero, 10.0, 0.0);
        assert_eq!(w0.eval(3.0), 10.0);
        assert_eq!(w0.eval(25.0), 25.0);
    }

    #[test]
    fn weight_preimage_inverts() {
        let w = WeightFunction::new(WeightKind::Eps, 10.0, 2f64.powi(-14));
        let (a, b) = w.preimage(0.01, 0.03, 1e-4, 0.5);
        assert!((a - 0.01).abs() < 1e-12 && (b - 0.03).abs() < 1e-12);
        // below the inner plateau the preimage is everything
        let (a, _) = w.preimage(1e-5, f64::INFINITY, 1e-4, 0.5);
        assert_eq!(a, 1e-4);
    }

    fn demo(eps: f64) -> GluedData {
        let cfg = GluingConfig { c: 10.0, epsilon: eps, nu: 1.75 };
        let grid = RadialGrid::log_uniform(5.0 * eps, 0.5, 2048).unwrap();
        GluedData::build(cfg, MSide::new(3.0, 0.0), AeProfile::Analytic { mass: 1.0, c: 1.0 }, grid).unwrap()
    }

    #[test]
    fn glued_regions_are_exact() {
        let g = demo(2f64.powi(-10));
        let se = g.cfg.sqrt_eps();
        let sc = ScaledAe { ae: &g.ae, epsilon: g.cfg.epsilon };
        for (i, &r) in g.grid.nodes().iter().enumerate() {
            if r <= se {
                assert_eq!(g.a[i], sc.a(r).unwrap());
            }
            if r >= 4.0 * se {
                assert_eq!(g.a[i], g.mside.a(r).unwrap());
            }
            if r >= se && r <= 4.0 * se {
                assert_eq!(g.m[i], 0.0);
            }
            if r <= 0.5 * se {
                assert_eq!(g.m[i], sc.m(r).unwrap());
            }
        }
        let mid = 2.5 * se;
        let mean = 0.5 * (sc.a(mid).unwrap() + g.mside.a(mid).unwrap());
        assert_eq!(g.a_at(mid).unwrap(), mean);
        assert_eq!(g.m_at(2.0 * se).unwrap(), 0.0);
        assert_eq!(g.m_at(0.25 * se).unwrap(), sc.m(0.25 * se).unwrap());
        assert_eq!(g.m_at(10.0 * se).unwrap(), 0.0);
    }

    #[test]
    fn region_examples() {
        let cfg = GluingConfig { c: 10.0, epsilon: 2f64.powi(-12), nu: 1.75 };
        let s = cfg.sqrt_eps();
        assert_eq!(region_classify(&cfg, 2.0 * s), (MetricRegime::Transition, MuRegime::Silent));
        assert_eq!(region_classify(&cfg, 6.0 * s), (MetricRegime::MExact, MuRegime::OuterTransition));
        assert_eq!(region_classify(&cfg, 0.25 * s), (MetricRegime::AeExact, MuRegime::AeExact));
    }

    #[test]
    fn config_validation() {
        assert!(GluingConfig { c: 10.0, epsilon: 2f64.powi(-4), nu: 1.75 }.validate().is_err());
        assert!(GluingConfig { c: 10.0, epsilon: 1e-3, nu: 2.0 }.validate().is_err());
        assert!(GluingConfig { c: 10.0, epsilon: 1e-3, nu: 1.75 }.validate().is_ok());
        let cfg = GluingConfig { c: 10.0, epsilon: 2f64.powi(-12), nu: 1.75 };
        let coarse = RadialGrid::log_uniform(cfg.epsilon * 5.0, 0.5, 60).unwrap();
        assert!(GluedData::build(cfg, MSide::new(3.0, 0.0), AeProfile::schwarzschild(1.0), coarse).is_err());
    }

    #[test]
    fn chart_examples() {
        let cfg = GluingConfig { c: 10.0, epsilon: 2f64.powi(-12), nu: 1.75 };
        let grid = RadialGrid::log_uniform(5.0 * cfg.epsilon, 0.5, 2048).unwrap();
        let flat = GluedData::build(cfg, MSide::new(0.0, 0.0), AeProfile::Analytic { mass: 0.0, c: 0.0 }, grid.clone()).unwrap();
        let c = chart_rescaled_metric(&flat, 0.01, 33).unwrap();
        assert_eq!(c.deviation, 0.0);
        assert!(c.weight_sandwich);
        let g = demo(cfg.epsilon);
        assert!(chart_rescaled_metric(&g, 0.5, 9).is_err());
    }
}
