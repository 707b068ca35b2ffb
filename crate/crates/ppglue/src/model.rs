//! Closed-form model data, AE profiles (built in or tabulated), the
//! epsilon-scaling map and asymptotic decay diagnostics.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{RadialGrid, sup_abs};
use crate::radial::{RadialMetric, TraceFreeRadialTensor};

pub const AE_HEADER: &str = "# ae-profile v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdSParams {
    pub mass: f64,
    pub lambda: f64,
    pub epsilon: f64,
}

/// F = (Lambda/3) r^2 + 2 M eps / r, with exact first and second derivatives.
pub fn sds_profile(p: SdSParams, grid: &RadialGrid) -> Result<RadialMetric> {
    let (l3, me) = (p.lambda / 3.0, 2.0 * p.mass * p.epsilon);
    let f = grid.map(|r| l3 * r * r + me / r);
    if let Some(i) = f.iter().position(|f| !(*f < 1.0)) {
        return Err(Error::Horizon { r: grid.nodes()[i] });
    }
    let d1 = grid.map(|r| 2.0 * l3 * r - me / (r * r));
    let d2 = grid.map(|r| 2.0 * l3 + 2.0 * me / (r * r * r));
    Ok(RadialMetric::from_f(f).with_derivatives(d1, Some(d2)))
}

/// F + r F' - Lambda r^2
pub fn ode_residual(f: &RadialMetric, lambda: f64, grid: &RadialGrid) -> Result<Vec<f64>> {
    if f.values.len() != grid.len() {
        return Err(Error::InvalidGrid("profile length does not match grid".into()));
    }
    let fv = f.f_values();
    let fp = f.f_prime(grid);
    Ok(grid.nodes().iter().enumerate().map(|(i, r)| fv[i] + r * fp[i] - lambda * r * r).collect())
}

/// m(rho) = c / rho^3, divergence-free on flat space.
pub fn bowen_york_mu(c: f64, grid: &RadialGrid) -> TraceFreeRadialTensor {
    TraceFreeRadialTensor {
        m: grid.map(|r| c / (r * r * r)),
        dm: Some(grid.map(|r| -3.0 * c / (r * r * r * r))),
    }
}

/// Anything that can be sampled as a radial (A, m) pair.
pub trait RadialProfile: Sync + Send {
    fn a(&self, x: f64) -> Result<f64>;
    fn m(&self, x: f64) -> Result<f64>;
    fn range(&self) -> (f64, f64);
}

#[derive(Debug, Clone)]
pub enum AeProfile {
    /// A0 = (1 - 2M/rho + c^2/rho^4)^-1 with m0 = c/rho^3: a maximal-slice
    /// type exact solution of both constraints. c = 0 is Schwarzschild.
    Analytic { mass: f64, c: f64 },
    Tabulated(Tabulated),
}

#[derive(Debug, Clone)]
pub struct Tabulated {
    rho: Vec<f64>,
    a0: Spline,
    m0: Option<Spline>,
}

impl AeProfile {
    pub fn schwarzschild(mass: f64) -> Self {
        AeProfile::Analytic { mass, c: 0.0 }
    }

    pub fn tabulated(rho: Vec<f64>, a0: Vec<f64>, m0: Option<Vec<f64>>) -> Result<Self> {
        if rho.len() < 4 {
            return Err(Error::InsufficientNodes { need: 4, got: rho.len() });
        }
        if rho.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("rho column must be strictly increasing".into()));
        }
        if a0.len() != rho.len() || m0.as_ref().is_some_and(|m| m.len() != rho.len()) {
            return Err(Error::InvalidGrid("column lengths differ".into()));
        }
        if a0.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::DegenerateMetric { r: f64::NAN });
        }
        Ok(AeProfile::Tabulated(Tabulated {
            a0: Spline::natural(&rho, &a0),
            m0: m0.map(|m| Spline::natural(&rho, &m)),
            rho,
        }))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let perr = |msg: String| Error::Parse { path: path.display().to_string(), msg };
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        match lines.next() {
            Some(h) if h.trim() == AE_HEADER => {}
            _ => return Err(perr(format!("first line must be `{AE_HEADER}`"))),
        }
        let (mut rho, mut a0, mut m0) = (Vec::new(), Vec::new(), Vec::new());
        let mut cols = None;
        for (k, line) in lines.enumerate() {
            let line = line.trim();
            if line.starts_with('#') {
                continue;
            }
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| perr(format!("row {}: {e}", k + 1))))
                .collect::<Result<_>>()?;
            if !(v.len() == 2 || v.len() == 3) || cols.is_some_and(|c| c != v.len()) {
                return Err(perr(format!("row {}: expected a consistent 2 or 3 columns", k + 1)));
            }
            cols = Some(v.len());
            rho.push(v[0]);
            a0.push(v[1]);
            if v.len() == 3 {
                m0.push(v[2]);
            }
        }
        if rho.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(perr("rho must be strictly increasing".into()));
        }
        let m0 = if cols == Some(3) { Some(m0) } else { None };
        Self::tabulated(rho, a0, m0).map_err(|e| perr(e.to_string()))
    }

    /// Tabulate onto a rho grid in the file format.
    pub fn write(&self, path: &Path, grid: &RadialGrid) -> Result<()> {
        let mut out = String::new();
        out.push_str(AE_HEADER);
        out.push_str("\n# rho A0 m0\n");
        for &rho in grid.nodes() {
            out.push_str(&format!("{:.17e} {:.17e} {:.17e}\n", rho, self.a(rho)?, self.m(rho)?));
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Innermost radius where the metric is still regular: the largest
    /// root of rho^4 - 2M rho^3 + c^2 (its minimum sits at rho = 3M/2).
    fn analytic_floor(mass: f64, c: f64) -> f64 {
        let p = |x: f64| x.powi(4) - 2.0 * mass * x.powi(3) + c * c;
        let xmin = 1.5 * mass.max(0.0);
        if p(xmin) > 0.0 {
            return 0.0;
        }
        let (mut lo, mut hi) = (xmin, 2.0 * mass.max(0.0) + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if p(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

impl RadialProfile for AeProfile {
    fn a(&self, rho: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(rho > lo && rho <= hi) && !(rho == lo && matches!(self, AeProfile::Tabulated(_))) {
            return Err(Error::AeRangeExceeded { rho, lo, hi });
        }
        match self {
            AeProfile::Analytic { mass, c } => {
                let r2 = rho * rho;
                Ok(1.0 / (1.0 - 2.0 * mass / rho + c * c / (r2 * r2)))
            }
            AeProfile::Tabulated(t) => Ok(t.a0.eval(rho)),
        }
    }

    fn m(&self, rho: f64) -> Result<f64> {
        let (lo, hi) = self.range();
        if !(rho >= lo && rho <= hi) {
            return Err(Error::AeRangeExceeded { rho, lo, hi });
        }
        match self {
            AeProfile::Analytic { c, .. } => Ok(c / (rho * rho * rho)),
            AeProfile::Tabulated(t) => Ok(t.m0.as_ref().map_or(0.0, |s| s.eval(rho))),
        }
    }

    fn range(&self) -> (f64, f64) {
        match self {
            AeProfile::Analytic { mass, c } => (Self::analytic_floor(*mass, *c), f64::INFINITY),
            AeProfile::Tabulated(t) => (t.rho[0], t.rho[t.rho.len() - 1]),
        }
    }
}

/// The AE data seen in the unscaled radius r = eps rho:
/// A(r) = A0(r/eps), m(r) = m0(r/eps)/eps.
#[derive(Debug, Clone)]
pub struct ScaledAe<'a> {
    pub ae: &'a AeProfile,
    pub epsilon: f64,
}

impl RadialProfile for ScaledAe<'_> {
    fn a(&self, r: f64) -> Result<f64> {
        self.ae.a(r / self.epsilon)
    }
    fn m(&self, r: f64) -> Result<f64> {
        Ok(self.ae.m(r / self.epsilon)? / self.epsilon)
    }
    fn range(&self) -> (f64, f64) {
        let (lo, hi) = self.ae.range();
        (lo * self.epsilon, hi * self.epsilon)
    }
}

/// Sample the scaled AE data on an r-grid.
pub fn scale_ae_data(ae: &AeProfile, epsilon: f64, grid: &RadialGrid) -> Result<(RadialMetric, TraceFreeRadialTensor)> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Config(format!("epsilon {epsilon} outside (0, 1]")));
    }
    let s = ScaledAe { ae, epsilon };
    let a = grid.nodes().iter().map(|&r| s.a(r)).collect::<Result<Vec<_>>>()?;
    let m = grid.nodes().iter().map(|&r| s.m(r)).collect::<Result<Vec<_>>>()?;
    Ok((RadialMetric::from_a(a), TraceFreeRadialTensor::new(m)))
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DecayReport {
    /// sup x |A - 1| over the sampled range
    pub c: f64,
    /// sup x^(j+1) |d^j A|, j = 1..=max_order
    pub c_beta: Vec<f64>,
    /// sup x^2 |m|
    pub c_mu: f64,
    /// sup x |A - 1| over the outermost octave only
    pub c_tail: f64,
    pub non_ae: bool,
}

pub const MAX_DECAY_ORDER: usize = 3;
const DECAY_NODES: usize = 4097;

pub fn ae_decay_constants(p: &dyn RadialProfile, x0: f64, x1: f64, max_order: usize) -> Result<DecayReport> {
    if x1 / x0 < 8.0 {
        return Err(Error::InsufficientAsymptoticRange { ratio: x1 / x0 });
    }
    if max_order > MAX_DECAY_ORDER {
        return Err(Error::DerivativeOrder(max_order));
    }
    // x0 * t_i with t_i independent of x0: a dyadic rescaling of the range
    // then rescales every node exactly
    let unit = RadialGrid::log_uniform(1.0, x1 / x0, DECAY_NODES)?;
    let grid = RadialGrid::mapped(unit.nodes().iter().map(|t| x0 * t).collect())?;
    let x = grid.nodes();
    let a = x.iter().map(|&r| p.a(r)).collect::<Result<Vec<_>>>()?;
    let m = x.iter().map(|&r| p.m(r)).collect::<Result<Vec<_>>>()?;
    let dev: Vec<f64> = x.iter().zip(&a).map(|(x, a)| x * (a - 1.0).abs()).collect();
    let c = sup_abs(&dev);
    let mut c_beta = Vec::with_capacity(max_order);
    let mut d = a.iter().map(|a| a - 1.0).collect::<Vec<_>>();
    for j in 1..=max_order {
        d = grid.d1(&d);
        let s = x.iter().zip(&d).map(|(x, v)| x.powi(j as i32 + 1) * v.abs()).fold(0.0, f64::max);
        c_beta.push(s);
    }
    let c_mu = x.iter().zip(&m).map(|(x, m)| x * x * m.abs()).fold(0.0, f64::max);
    let octave = |lo: f64, hi: f64| {
        let r = grid.index_range(lo, hi);
        sup_abs(&dev[r])
    };
    let c_tail = octave(x1 / 2.0, x1);
    let (o1, o2) = (octave(x1 / 8.0, x1 / 4.0), octave(x1 / 4.0, x1 / 2.0));
    let non_ae = o2 > 1.05 * o1 && c_tail > 1.05 * o2;
    Ok(DecayReport { c, c_beta, c_mu, c_tail, non_ae })
}

/// Natural cubic spline with linear extrapolation disabled (callers range-check).
#[derive(Debug, Clone)]
pub struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    y2: Vec<f64>,
}

impl Spline {
    pub fn natural(x: &[f64], y: &[f64]) -> Self {
        let n = x.len();
        let mut y2 = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 1..n - 1 {
            let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
            let p = sig * y2[i - 1] + 2.0;
            y2[i] = (sig - 1.0) / p;
            let dd = (y[i + 1] - y[i]) / (x[i + 1] - x[i]) - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
            u[i] = (6.0 * dd / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
        }
        y2[n - 1] = 0.0;
        for k in (0..n - 1).rev() {
            y2[k] = y2[k] * y2[k + 1] + u[k];
        }
        Spline { x: x.to_vec(), y: y.to_vec(), y2 }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let n = self.x.len();
        let hi = self.x.partition_point(|&v| v < t).clamp(1, n - 1);
        let lo = hi - 1;
        let h = self.x[hi] - self.x[lo];
        let a = (self.x[hi] - t) / h;
        let b = (t - self.x[lo]) / h;
        a * self.y[lo]
            + b * self.y[hi]
            + ((a * a * a - a) * self.y2[lo] + (b * b * b - b) * self.y2[hi]) * h * h / 6.0
    }
}
