//! Lichnerowicz operator N(phi), its linearization and quadratic remainder,
//! the Picard map eta <- -L^-1 (N(1) + Q(eta)), the conformal change of the
//! data, and the KID / injectivity diagnostics.

use serde::Serialize;

use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::grid::{sup_abs, RadialGrid};
use crate::norms::{weighted_norm_values, FrameTensor, NormSpec};
use crate::radial::{
    laplacian_with, scalar_curvature, scalar_curvature_a_form, CmcExtrinsicCurvature, RadialMetric,
    RadialVectorField, TraceFreeRadialTensor,
};

#[derive(Debug, Clone)]
pub struct LichnerowiczProblem {
    pub grid: RadialGrid,
    pub metric: RadialMetric,
    pub mu: TraceFreeRadialTensor,
    pub tau: f64,
    pub lambda: f64,
    /// Dirichlet values of phi at r_min, r_max
    pub bc: [f64; 2],
    /// weight values used for the stopping norm and the residual scaling
    pub weight: Vec<f64>,
    a: Vec<f64>,
    ap: Vec<f64>,
    ricci_scalar: Vec<f64>,
    mu2: Vec<f64>,
}

/// Which curvature formula feeds N; the two must agree to truncation error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurvaturePath {
    FForm,
    AForm,
}

impl LichnerowiczProblem {
    pub fn new(grid: RadialGrid, metric: RadialMetric, mu: TraceFreeRadialTensor, tau: f64, lambda: f64) -> Result<Self> {
        Self::with_path(grid, metric, mu, tau, lambda, CurvaturePath::FForm)
    }

    pub fn with_path(
        grid: RadialGrid,
        metric: RadialMetric,
        mu: TraceFreeRadialTensor,
        tau: f64,
        lambda: f64,
        path: CurvaturePath,
    ) -> Result<Self> {
        let ricci_scalar = match path {
            CurvaturePath::FForm => scalar_curvature(&metric, &grid)?,
            CurvaturePath::AForm => scalar_curvature_a_form(&metric, &grid)?,
        };
        if mu.m.len() != grid.len() {
            return Err(Error::InsufficientNodes { need: grid.len(), got: mu.m.len() });
        }
        let n = grid.len();
        Ok(LichnerowiczProblem {
            a: metric.a_values(),
            ap: metric.a_prime(&grid),
            mu2: mu.norm2(),
            ricci_scalar,
            grid,
            metric,
            mu,
            tau,
            lambda,
            bc: [1.0, 1.0],
            weight: vec![1.0; n],
        })
    }

    pub fn with_weight(mut self, w: Vec<f64>) -> Self {
        self.weight = w;
        self
    }

    /// Lambda/4 - tau^2/12
    pub fn k0(&self) -> f64 {
        self.lambda / 4.0 - self.tau * self.tau / 12.0
    }

    pub fn curvature(&self) -> &[f64] {
        &self.ricci_scalar
    }

    pub fn mu_norm2(&self) -> &[f64] {
        &self.mu2
    }

    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        laplacian_with(&self.a, &self.ap, f, &self.grid)
    }

    /// Zeroth-order coefficient of the linearization.
    pub fn potential(&self) -> Vec<f64> {
        let k0 = self.k0();
        self.ricci_scalar.iter().zip(&self.mu2).map(|(r, m)| -r / 8.0 - 7.0 / 8.0 * m + 5.0 * k0).collect()
    }
}

fn check_positive(phi: &[f64]) -> Result<()> {
    match phi.iter().position(|p| !(*p > 0.0)) {
        Some(node) => Err(Error::NonPositiveConformalFactor { node }),
        None => Ok(()),
    }
}

/// N(phi) = Lap phi - R phi/8 + |mu|^2 phi^-7 / 8 + (Lambda/4 - tau^2/12) phi^5
pub fn n_residual(p: &LichnerowiczProblem, phi: &[f64]) -> Result<Vec<f64>> {
    check_positive(phi)?;
    let lap = p.laplacian(phi);
    let k0 = p.k0();
    Ok((0..phi.len())
        .map(|i| {
            let f = phi[i];
            lap[i] - p.ricci_scalar[i] * f / 8.0 + p.mu2[i] * f.powi(-7) / 8.0 + k0 * f.powi(5)
        })
        .collect())
}

/// N(1 + eta) with the Laplacian applied to eta itself. Same value as
/// `n_residual`, but the low bits of a small eta survive the differencing.
pub fn n_residual_eta(p: &LichnerowiczProblem, eta: &[f64]) -> Result<Vec<f64>> {
    let phi: Vec<f64> = eta.iter().map(|e| 1.0 + e).collect();
    check_positive(&phi)?;
    let lap = p.laplacian(eta);
    let k0 = p.k0();
    Ok((0..phi.len())
        .map(|i| {
            let f = phi[i];
            lap[i] - p.ricci_scalar[i] * f / 8.0 + p.mu2[i] * f.powi(-7) / 8.0 + k0 * f.powi(5)
        })
        .collect())
}

pub fn linearized_apply(p: &LichnerowiczProblem, eta: &[f64]) -> Vec<f64> {
    let lap = p.laplacian(eta);
    let pot = p.potential();
    (0..eta.len()).map(|i| lap[i] + pot[i] * eta[i]).collect()
}

/// Q(eta) = |mu|^2/8 ((1+eta)^-7 - 1 + 7 eta) + k0 ((1+eta)^5 - 1 - 5 eta)
pub fn q_remainder(p: &LichnerowiczProblem, eta: &[f64]) -> Result<Vec<f64>> {
    q_pointwise(&p.mu2, p.k0(), eta)
}

pub fn q_pointwise(mu2: &[f64], k0: f64, eta: &[f64]) -> Result<Vec<f64>> {
    if let Some(node) = eta.iter().position(|e| !(1.0 + e > 0.0)) {
        return Err(Error::NonPositiveConformalFactor { node });
    }
    Ok(eta
        .iter()
        .zip(mu2)
        .map(|(e, m)| {
            let q = 1.0 + e;
            m / 8.0 * (q.powi(-7) - 1.0 + 7.0 * e) + k0 * (q.powi(5) - 1.0 - 5.0 * e)
        })
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub contraction_ratios: Vec<f64>,
    /// sup over interior nodes of w^2 |N(phi)|
    pub final_residual: f64,
    /// plain sup over interior nodes of |N(phi)|
    pub residual_sup: f64,
    /// |phi - 1| with weight exponent nu - 1
    pub eta_norm: f64,
    pub pivot_ratio: f64,
    /// phi - 1 as iterated (kept separately to avoid cancellation)
    #[serde(skip)]
    pub eta: Vec<f64>,
}

/// Interior-node residual measures (w^2-scaled, plain) at phi = 1 + eta.
pub fn residual_measures(p: &LichnerowiczProblem, eta: &[f64]) -> Result<(f64, f64)> {
    let n = n_residual_eta(p, eta)?;
    let k = n.len();
    let scaled = (1..k - 1).map(|i| p.weight[i] * p.weight[i] * n[i].abs()).fold(0.0, f64::max);
    Ok((scaled, sup_abs(&n[1..k - 1])))
}

fn factor_linearization(p: &LichnerowiczProblem) -> Result<(BandMatrix, BandLu)> {
    let n = p.grid.len();
    let mut mat = BandMatrix::from_operator(n, 1, 1, |e| linearized_apply(p, e));
    mat.set_identity_row(0);
    mat.set_identity_row(n - 1);
    let lu = mat.lu()?;
    Ok((mat, lu))
}

pub fn picard_solve(p: &LichnerowiczProblem, nu: f64, tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    picard_solve_from(p, nu, tol, max_iter, &vec![0.0; p.grid.len()])
}

/// Picard iteration started from eta0 (boundary entries are overwritten).
pub fn picard_solve_from(
    p: &LichnerowiczProblem,
    nu: f64,
    tol: f64,
    max_iter: usize,
    eta0: &[f64],
) -> Result<(Vec<f64>, SolveReport)> {
    if !(tol > 0.0) {
        return Err(Error::Config(format!("tolerance must be positive, got {tol}")));
    }
    let n = p.grid.len();
    let (mat, lu) = factor_linearization(p)?;
    let n1 = n_residual(p, &vec![1.0; n])?;
    let mut eta = eta0.to_vec();
    eta[0] = p.bc[0] - 1.0;
    eta[n - 1] = p.bc[1] - 1.0;
    let mut ratios = Vec::new();
    let mut prev_step: Option<f64> = None;
    let mut above_one = 0;
    for it in 1..=max_iter {
        let q = q_remainder(p, &eta)?;
        let mut rhs: Vec<f64> = n1.iter().zip(&q).map(|(a, b)| -(a + b)).collect();
        rhs[0] = p.bc[0] - 1.0;
        rhs[n - 1] = p.bc[1] - 1.0;
        let mut next = lu.solve(&rhs);
        // one refinement step against the unfactored matrix
        let r = mat.matvec(&next);
        let corr = lu.solve(&rhs.iter().zip(&r).map(|(b, r)| b - r).collect::<Vec<_>>());
        next.iter_mut().zip(&corr).for_each(|(x, c)| *x += c);
        let step = next.iter().zip(&eta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if let Some(ps) = prev_step {
            if ps > 0.0 {
                let ratio = step / ps;
                ratios.push(ratio);
                above_one = if ratio >= 1.0 { above_one + 1 } else { 0 };
                if above_one >= 3 {
                    return Err(Error::ContractionFailure { ratios });
                }
            }
        }
        prev_step = Some(step);
        eta = next;
        let (scaled, sup) = residual_measures(p, &eta)?;
        if scaled <= tol {
            let phi: Vec<f64> = eta.iter().map(|e| 1.0 + e).collect();
            let spec = NormSpec::new(0, nu - 1.0, 0, 0);
            let eta_norm = weighted_norm_values(&FrameTensor::scalar(&eta), &p.a, &p.weight, &spec, &p.grid)?;
            let report = SolveReport {
                iterations: it,
                contraction_ratios: ratios,
                final_residual: scaled,
                residual_sup: sup,
                eta_norm,
                pivot_ratio: lu.pivot_ratio(),
                eta,
            };
            return Ok((phi, report));
        }
    }
    Err(Error::MaxIterations(max_iter))
}

/// Data after g -> phi^4 g, mu -> phi^-2 mu.
#[derive(Debug, Clone)]
pub struct TransformedData {
    /// coordinate nodes r of the original grid
    pub r: Vec<f64>,
    /// new areal radius phi^2 r
    pub areal: Vec<f64>,
    /// g_rr in the original coordinate, phi^4 A
    pub g_rr: Vec<f64>,
    /// metric function in the new areal coordinate, phi^2 A / (phi + 2 r phi')^2
    pub a_areal: Vec<f64>,
    /// K = phi^-2 mu + (tau/3) phi^4 g, with mixed trace-free part phi^-6 m
    pub k: CmcExtrinsicCurvature,
}

pub fn conformal_transform(p: &LichnerowiczProblem, phi: &[f64]) -> Result<TransformedData> {
    check_positive(phi)?;
    let r = p.grid.nodes();
    let dphi = p.grid.d1(phi);
    let n = r.len();
    let areal: Vec<f64> = (0..n).map(|i| phi[i] * phi[i] * r[i]).collect();
    let g_rr = (0..n).map(|i| phi[i].powi(4) * p.a[i]).collect();
    let a_areal = (0..n)
        .map(|i| {
            let d = phi[i] + 2.0 * r[i] * dphi[i];
            phi[i] * phi[i] * p.a[i] / (d * d)
        })
        .collect();
    let m = (0..n).map(|i| phi[i].powi(-6) * p.mu.m[i]).collect();
    Ok(TransformedData {
        r: r.to_vec(),
        areal,
        g_rr,
        a_areal,
        k: CmcExtrinsicCurvature { tau: p.tau, mu: TraceFreeRadialTensor::new(m) },
    })
}

/// Hamiltonian constraint of the transformed data through the conformal
/// identity R(phi^4 g) = phi^-5 (R phi - 8 Lap phi): H = -8 phi^-5 N(phi),
/// evaluated at phi = 1 + eta.
pub fn transformed_hamiltonian(p: &LichnerowiczProblem, eta: &[f64]) -> Result<Vec<f64>> {
    let nr = n_residual_eta(p, eta)?;
    Ok(nr.iter().zip(eta).map(|(n, e)| -8.0 * n * (1.0 + e).powi(-5)).collect())
}

/// Momentum constraint of the transformed data in flux form with respect to
/// the new areal radius: 2 R^-3 d(R^3 m_new)/dR.
pub fn transformed_momentum(p: &LichnerowiczProblem, t: &TransformedData) -> Vec<f64> {
    let grid = &p.grid;
    let flux: Vec<f64> = (0..t.r.len()).map(|i| t.areal[i].powi(3) * t.k.mu.m[i]).collect();
    let df = grid.d1(&flux);
    let dr = grid.d1(&t.areal);
    (0..t.r.len()).map(|i| 2.0 * df[i] / (dr[i] * t.areal[i].powi(3))).collect()
}

/// Independent path: curvature of the transformed metric written in its own
/// areal coordinate, differenced on the mapped grid of new radii.
pub fn transformed_hamiltonian_areal(p: &LichnerowiczProblem, t: &TransformedData) -> Result<Vec<f64>> {
    let grid = RadialGrid::mapped(t.areal.clone())?;
    let g = RadialMetric::from_a(t.a_areal.clone());
    crate::radial::hamiltonian_residual(&g, &t.k, p.lambda, &grid)
}

/// C n + X with C radial and X = u d/dr.
#[derive(Debug, Clone)]
pub struct KidCandidate {
    pub c: Vec<f64>,
    pub x: RadialVectorField,
}

/// Orthonormal-frame (rr, theta-theta) components of both KID equations.
#[derive(Debug, Clone)]
pub struct KidResidual {
    pub first: Vec<[f64; 2]>,
    pub second: Vec<[f64; 2]>,
}

impl KidResidual {
    pub fn sup(&self) -> f64 {
        self.first.iter().chain(&self.second).flat_map(|p| p.iter()).fold(0.0, |a, b| a.max(b.abs()))
    }
}

/// 0 = -2 C K + L_X g and 0 = -Hess C + (Ric - 2 K.K + tau K - Lambda g) C + L_X K.
pub fn kid_residual(
    g: &RadialMetric,
    k: &CmcExtrinsicCurvature,
    lambda: f64,
    cand: &KidCandidate,
    grid: &RadialGrid,
) -> Result<KidResidual> {
    g.validate(grid)?;
    let a = g.a_values();
    let ap = g.a_prime(grid);
    let r = grid.nodes();
    let n = r.len();
    let (c, u, m, tau) = (&cand.c, &cand.x.u, &k.mu.m, k.tau);
    let (c1, c2) = (grid.d1(c), grid.d2(c));
    let u1 = grid.d1(u);
    let krr: Vec<f64> = (0..n).map(|i| a[i] * (2.0 * m[i] + tau / 3.0)).collect();
    let ktt: Vec<f64> = (0..n).map(|i| r[i] * r[i] * (-m[i] + tau / 3.0)).collect();
    let (krr1, ktt1) = (grid.d1(&krr), grid.d1(&ktt));
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for i in 0..n {
        let (ai, ri) = (a[i], r[i]);
        let r2 = ri * ri;
        let (k1, k2) = (krr[i] / ai, ktt[i] / r2);
        let lxg = [(u[i] * ap[i] + 2.0 * ai * u1[i]) / ai, 2.0 * ri * u[i] / r2];
        first.push([-2.0 * c[i] * k1 + lxg[0], -2.0 * c[i] * k2 + lxg[1]]);
        let hess = [(c2[i] - ap[i] / (2.0 * ai) * c1[i]) / ai, c1[i] / (ri * ai)];
        let ric = [ap[i] / (ri * ai * ai), (1.0 - 1.0 / ai + ri * ap[i] / (2.0 * ai * ai)) / r2];
        let lxk = [(u[i] * krr1[i] + 2.0 * u1[i] * krr[i]) / ai, u[i] * ktt1[i] / r2];
        let kk = [k1, k2];
        let s = |j: usize| -hess[j] + (ric[j] - 2.0 * kk[j] * kk[j] + tau * kk[j] - lambda) * c[i] + lxk[j];
        second.push([s(0), s(1)]);
    }
    Ok(KidResidual { first, second })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpectrumBc {
    /// warp vanishes at the end, no flux
    PoleRegular,
    Neumann,
    Dirichlet,
}

/// Radial slice ds^2 + S(s)^2 dOmega^2 on [s0, s1] with |K|^2 and Lambda.
pub struct WarpedSlice<'a> {
    pub s0: f64,
    pub s1: f64,
    pub warp: &'a (dyn Fn(f64) -> f64 + Sync),
    pub k_norm2: &'a (dyn Fn(f64) -> f64 + Sync),
    pub lambda: f64,
    pub bc: [SpectrumBc; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    /// eigenvalues of Lap - (|K|^2 - Lambda), ordered by magnitude
    pub eigenvalues: Vec<f64>,
    pub threshold: f64,
    /// no eigenvalue within the threshold of zero
    pub injective: bool,
}

/// Symmetric tridiagonal form of the cell-centred finite-volume operator.
fn warped_tridiagonal(sl: &WarpedSlice, cells: usize) -> (Vec<f64>, Vec<f64>) {
    let h = (sl.s1 - sl.s0) / cells as f64;
    let centre = |i: usize| sl.s0 + (i as f64 + 0.5) * h;
    let face = |i: usize| sl.s0 + i as f64 * h;
    let vol: Vec<f64> = (0..cells).map(|i| (sl.warp)(centre(i)).powi(2) * h).collect();
    let area: Vec<f64> = (0..=cells).map(|i| (sl.warp)(face(i)).powi(2)).collect();
    let mut diag = vec![0.0; cells];
    let mut off = vec![0.0; cells.saturating_sub(1)];
    for i in 0..cells {
        let mut d = 0.0;
        if i > 0 {
            d -= area[i] / h;
        }
        if i + 1 < cells {
            d -= area[i + 1] / h;
            off[i] = area[i + 1] / h / (vol[i] * vol[i + 1]).sqrt();
        }
        if i == 0 && sl.bc[0] == SpectrumBc::Dirichlet {
            d -= 2.0 * area[0] / h;
        }
        if i + 1 == cells && sl.bc[1] == SpectrumBc::Dirichlet {
            d -= 2.0 * area[cells] / h;
        }
        diag[i] = d / vol[i] - ((sl.k_norm2)(centre(i)) - sl.lambda);
    }
    (diag, off)
}

/// Number of eigenvalues strictly below x (Sturm count via LDL^T pivots).
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let mut count = 0;
    let mut q = 1.0;
    for i in 0..diag.len() {
        let b2 = if i > 0 { off[i - 1] * off[i - 1] } else { 0.0 };
        q = diag[i] - x - if i > 0 { b2 / q } else { 0.0 };
        if q == 0.0 {
            q = -f64::EPSILON * (diag[i].abs() + x.abs() + 1.0);
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// j-th smallest eigenvalue (0-based) by bisection inside the Gershgorin hull.
fn kth_eigenvalue(diag: &[f64], off: &[f64], j: usize) -> f64 {
    let n = diag.len();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) > j {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Eigenvalues nearest zero of Lap - (|K|^2 - Lambda) on radial functions.
pub fn injectivity_spectrum(sl: &WarpedSlice, cells: usize, count: usize, threshold: f64) -> Result<SpectrumReport> {
    if cells < 3 || !(sl.s1 > sl.s0) {
        return Err(Error::Eigen(format!("need at least 3 cells on a nonempty interval, got {cells}")));
    }
    for (end, s) in [(0, sl.s0), (1, sl.s1)] {
        let w = (sl.warp)(s);
        let pole = sl.bc[end] == SpectrumBc::PoleRegular;
        if pole != (w.abs() < 1e-12) {
            return Err(Error::Eigen(format!("boundary condition at s = {s} inconsistent with warp {w}")));
        }
    }
    let (diag, off) = warped_tridiagonal(sl, cells);
    if diag.iter().chain(&off).any(|v| !v.is_finite()) {
        return Err(Error::Eigen("non-finite matrix entry".into()));
    }
    let below = sturm_count(&diag, &off, 0.0);
    let lo = below.saturating_sub(count);
    let hi = (below + count).min(cells);
    let mut ev: Vec<f64> = (lo..hi).map(|j| kth_eigenvalue(&diag, &off, j)).collect();
    ev.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    ev.truncate(count);
    let injective = ev.first().is_some_and(|e| e.abs() > threshold);
    Ok(SpectrumReport { eigenvalues: ev, threshold, injective })
}
