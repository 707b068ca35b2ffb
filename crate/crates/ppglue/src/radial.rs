//! Spherically symmetric metrics g = A dr^2 + r^2 dOmega^2, trace-free
//! radial tensors, and the geometric operators acting on them.

use crate::error::{Error, Result};
use crate::grid::RadialGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricForm {
    /// A = 1 / (1 - F)
    F,
    A,
}

#[derive(Debug, Clone)]
pub struct RadialMetric {
    pub form: MetricForm,
    pub values: Vec<f64>,
    /// Optional exact first/second derivatives of `values`.
    pub d1: Option<Vec<f64>>,
    pub d2: Option<Vec<f64>>,
}

impl RadialMetric {
    pub fn from_f(values: Vec<f64>) -> Self {
        RadialMetric { form: MetricForm::F, values, d1: None, d2: None }
    }

    pub fn from_a(values: Vec<f64>) -> Self {
        RadialMetric { form: MetricForm::A, values, d1: None, d2: None }
    }

    pub fn flat(n: usize) -> Self {
        RadialMetric { form: MetricForm::A, values: vec![1.0; n], d1: Some(vec![0.0; n]), d2: Some(vec![0.0; n]) }
    }

    pub fn with_derivatives(mut self, d1: Vec<f64>, d2: Option<Vec<f64>>) -> Self {
        self.d1 = Some(d1);
        self.d2 = d2;
        self
    }

    pub fn validate(&self, grid: &RadialGrid) -> Result<()> {
        if self.values.len() != grid.len() {
            return Err(Error::InvalidGrid(format!(
                "profile has {} values for {} nodes",
                self.values.len(),
                grid.len()
            )));
        }
        for (v, r) in self.values.iter().zip(grid.nodes()) {
            let ok = match self.form {
                MetricForm::F => *v < 1.0 && v.is_finite(),
                MetricForm::A => *v > 0.0 && v.is_finite(),
            };
            if !ok {
                return Err(Error::DegenerateMetric { r: *r });
            }
        }
        Ok(())
    }

    pub fn a_values(&self) -> Vec<f64> {
        match self.form {
            MetricForm::A => self.values.clone(),
            MetricForm::F => self.values.iter().map(|f| 1.0 / (1.0 - f)).collect(),
        }
    }

    pub fn f_values(&self) -> Vec<f64> {
        match self.form {
            MetricForm::F => self.values.clone(),
            MetricForm::A => self.values.iter().map(|a| 1.0 - 1.0 / a).collect(),
        }
    }

    /// F' from exact data when present, else by differencing F.
    pub fn f_prime(&self, grid: &RadialGrid) -> Vec<f64> {
        match (self.form, &self.d1) {
            (MetricForm::F, Some(d)) => d.clone(),
            (MetricForm::A, Some(d)) => d.iter().zip(&self.values).map(|(d, a)| d / (a * a)).collect(),
            _ => grid.d1(&self.f_values()),
        }
    }

    pub fn a_prime(&self, grid: &RadialGrid) -> Vec<f64> {
        match (self.form, &self.d1) {
            (MetricForm::A, Some(d)) => d.clone(),
            (MetricForm::F, Some(d)) => {
                d.iter().zip(&self.values).map(|(d, f)| d / ((1.0 - f) * (1.0 - f))).collect()
            }
            _ => grid.d1(&self.a_values()),
        }
    }
}

/// Trace-free symmetric tensor with mixed components (2m, -m, -m).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceFreeRadialTensor {
    pub m: Vec<f64>,
    pub dm: Option<Vec<f64>>,
}

impl TraceFreeRadialTensor {
    pub fn new(m: Vec<f64>) -> Self {
        TraceFreeRadialTensor { m, dm: None }
    }

    pub fn zeros(n: usize) -> Self {
        TraceFreeRadialTensor { m: vec![0.0; n], dm: Some(vec![0.0; n]) }
    }

    pub fn mixed(&self, i: usize) -> [f64; 3] {
        let m = self.m[i];
        [2.0 * m, -m, -m]
    }

    /// Mixed trace, node by node. Zero by construction.
    pub fn trace(&self) -> Vec<f64> {
        (0..self.m.len()).map(|i| self.mixed(i).iter().sum()).collect()
    }

    /// |mu|^2 = 6 m^2 in the mixed contraction.
    pub fn norm2(&self) -> Vec<f64> {
        self.m.iter().map(|m| 6.0 * m * m).collect()
    }
}

#[derive(Debug, Clone)]
pub struct CmcExtrinsicCurvature {
    pub tau: f64,
    pub mu: TraceFreeRadialTensor,
}

impl CmcExtrinsicCurvature {
    pub fn trace(&self) -> Vec<f64> {
        self.mu.trace().into_iter().map(|t| t + self.tau).collect()
    }

    /// |K|^2 = |mu|^2 + tau^2 / 3
    pub fn norm2(&self) -> Vec<f64> {
        self.mu.norm2().into_iter().map(|v| v + self.tau * self.tau / 3.0).collect()
    }
}

/// X = u(r) d/dr
#[derive(Debug, Clone, PartialEq)]
pub struct RadialVectorField {
    pub u: Vec<f64>,
}

fn checked(g: &RadialMetric, grid: &RadialGrid) -> Result<Vec<f64>> {
    g.validate(grid)?;
    Ok(g.a_values())
}

/// R = 2 (F + r F') / r^2
pub fn scalar_curvature(g: &RadialMetric, grid: &RadialGrid) -> Result<Vec<f64>> {
    g.validate(grid)?;
    let f = g.f_values();
    let fp = g.f_prime(grid);
    Ok(grid.nodes().iter().zip(f.iter().zip(&fp)).map(|(r, (f, fp))| 2.0 * (f + r * fp) / (r * r)).collect())
}

/// Same curvature written through A: R = 2A'/(r A^2) + 2(1 - 1/A)/r^2.
pub fn scalar_curvature_a_form(g: &RadialMetric, grid: &RadialGrid) -> Result<Vec<f64>> {
    let a = checked(g, grid)?;
    let ap = g.a_prime(grid);
    Ok(grid
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, r)| 2.0 * ap[i] / (r * a[i] * a[i]) + 2.0 * (1.0 - 1.0 / a[i]) / (r * r))
        .collect())
}

/// R - |mu|^2 + (2/3) tau^2 - 2 Lambda
pub fn hamiltonian_residual(
    g: &RadialMetric,
    k: &CmcExtrinsicCurvature,
    lambda: f64,
    grid: &RadialGrid,
) -> Result<Vec<f64>> {
    let r = scalar_curvature(g, grid)?;
    let mu2 = k.mu.norm2();
    let c = 2.0 / 3.0 * k.tau * k.tau - 2.0 * lambda;
    Ok(r.iter().zip(&mu2).map(|(r, m)| r - m + c).collect())
}

/// (div mu)_r = 2 m' + 6 m / r, the same for every A. Evaluated in flux
/// form 2 r^-3 (r^3 m)' so that c/r^3 is annihilated by the stencil.
pub fn momentum_residual(g: &RadialMetric, k: &CmcExtrinsicCurvature, grid: &RadialGrid) -> Result<Vec<f64>> {
    g.validate(grid)?;
    Ok(divergence(&k.mu, grid))
}

pub fn divergence(mu: &TraceFreeRadialTensor, grid: &RadialGrid) -> Vec<f64> {
    let r = grid.nodes();
    if let Some(dm) = &mu.dm {
        return (0..r.len()).map(|i| 2.0 * dm[i] + 6.0 * mu.m[i] / r[i]).collect();
    }
    let flux: Vec<f64> = r.iter().zip(&mu.m).map(|(r, m)| r * r * r * m).collect();
    let d = grid.d1(&flux);
    r.iter().zip(&d).map(|(r, d)| 2.0 * d / (r * r * r)).collect()
}

/// Conformal Killing operator on X = u d/dr:
/// m = (1/3)(u' + A'u/(2A) - u/r) = r/(3 sqrt A) * (u sqrt A / r)'.
pub fn conformal_killing_apply(g: &RadialMetric, x: &RadialVectorField, grid: &RadialGrid) -> Result<TraceFreeRadialTensor> {
    let a = checked(g, grid)?;
    Ok(TraceFreeRadialTensor::new(ckv_profile(&a, &x.u, grid)))
}

pub(crate) fn ckv_profile(a: &[f64], u: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let r = grid.nodes();
    let sq: Vec<f64> = a.iter().map(|a| a.sqrt()).collect();
    let q: Vec<f64> = (0..r.len()).map(|i| u[i] * sq[i] / r[i]).collect();
    let dq = grid.d1(&q);
    (0..r.len()).map(|i| r[i] / (3.0 * sq[i]) * dq[i]).collect()
}

/// L X = -(div D X)^sharp, chained through the two discrete operators so the
/// repaired tensor is divergence-free at the discrete level.
pub fn vector_laplacian_apply(g: &RadialMetric, x: &RadialVectorField, grid: &RadialGrid) -> Result<RadialVectorField> {
    let a = checked(g, grid)?;
    Ok(RadialVectorField { u: vector_laplacian_profile(&a, &x.u, grid) })
}

pub(crate) fn vector_laplacian_profile(a: &[f64], u: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let m = TraceFreeRadialTensor::new(ckv_profile(a, u, grid));
    let d = divergence(&m, grid);
    d.iter().zip(a).map(|(d, a)| -d / a).collect()
}

/// Laplace-Beltrami operator on radial functions.
pub fn laplace_beltrami(g: &RadialMetric, phi: &[f64], grid: &RadialGrid) -> Result<Vec<f64>> {
    let a = checked(g, grid)?;
    let ap = g.a_prime(grid);
    Ok(laplacian_with(&a, &ap, phi, grid))
}

pub(crate) fn laplacian_with(a: &[f64], ap: &[f64], phi: &[f64], grid: &RadialGrid) -> Vec<f64> {
    let r = grid.nodes();
    let p1 = grid.d1(phi);
    let p2 = grid.d2(phi);
    (0..r.len())
        .map(|i| p2[i] / a[i] + (2.0 / (r[i] * a[i]) - ap[i] / (2.0 * a[i] * a[i])) * p1[i])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::sup_abs;

    fn ugrid() -> RadialGrid {
        RadialGrid::uniform_step(1.0, 1.0 / 128.0, 257).unwrap()
    }

    #[test]
    fn de_sitter_curvature() {
        let g = RadialGrid::uniform_step(0.125, 1.0 / 256.0, 129).unwrap();
        let lam = 3.0;
        let f = g.map(|r| lam * r * r / 3.0);
        let r = scalar_curvature(&RadialMetric::from_f(f), &g).unwrap();
        assert!(r.iter().all(|v| (v - 2.0 * lam).abs() < 1e-12));
    }

    #[test]
    fn schwarzschild_curvature_vanishes() {
        let g = RadialGrid::uniform(3.0, 10.0, 200).unwrap();
        let m = 1.0;
        let f = g.map(|r| 2.0 * m / r);
        let fp = g.map(|r| -2.0 * m / (r * r));
        let exact = scalar_curvature(&RadialMetric::from_f(f.clone()).with_derivatives(fp, None), &g).unwrap();
        assert!(sup_abs(&exact) < 1e-15);
        let fd = scalar_curvature(&RadialMetric::from_f(f), &g).unwrap();
        assert!(sup_abs(&fd) < 1e-3);
        let flat = scalar_curvature(&RadialMetric::flat(200), &g).unwrap();
        assert!(sup_abs(&flat) == 0.0);
    }

    #[test]
    fn hamiltonian_examples() {
        let g = ugrid();
        let (lam, m, eps) = (3.0, 1.0, 0.01);
        let g2 = RadialGrid::uniform(0.3, 0.55, 100).unwrap();
        let f2 = g2.map(|r| lam * r * r / 3.0 + 2.0 * m * eps / r);
        let fp2 = g2.map(|r| 2.0 * lam * r / 3.0 - 2.0 * m * eps / (r * r));
        let k = CmcExtrinsicCurvature { tau: 0.0, mu: TraceFreeRadialTensor::zeros(100) };
        let h = hamiltonian_residual(&RadialMetric::from_f(f2).with_derivatives(fp2, None), &k, lam, &g2).unwrap();
        assert!(sup_abs(&h) < 1e-10);

        let k0 = CmcExtrinsicCurvature { tau: 0.0, mu: TraceFreeRadialTensor::zeros(g.len()) };
        let h0 = hamiltonian_residual(&RadialMetric::flat(g.len()), &k0, 0.0, &g).unwrap();
        assert!(sup_abs(&h0) == 0.0);

        let g3 = RadialGrid::uniform(0.1, 0.5, 64).unwrap();
        let ds = RadialMetric::from_f(g3.map(|r| r * r));
        let k3 = CmcExtrinsicCurvature { tau: 0.0, mu: TraceFreeRadialTensor::zeros(64) };
        let h3 = hamiltonian_residual(&ds, &k3, 0.0, &g3).unwrap();
        assert!(h3.iter().all(|v| (v - 6.0).abs() < 1e-10));
    }

    #[test]
    fn degenerate_metric_rejected() {
        let g = RadialGrid::uniform(0.5, 2.0, 10).unwrap();
        let bad = RadialMetric::from_f(g.map(|r| r));
        assert!(matches!(scalar_curvature(&bad, &g), Err(Error::DegenerateMetric { .. })));
        let bad_a = RadialMetric::from_a(vec![-1.0; 10]);
        let x = RadialVectorField { u: vec![1.0; 10] };
        assert!(conformal_killing_apply(&bad_a, &x, &g).is_err());
    }

    #[test]
    fn momentum_examples() {
        let g = ugrid();
        let flat = RadialMetric::flat(g.len());
        let by = CmcExtrinsicCurvature { tau: 0.0, mu: TraceFreeRadialTensor::new(g.map(|r| 2.5 / (r * r * r))) };
        assert!(sup_abs(&momentum_residual(&flat, &by, &g).unwrap()) < 1e-12);
        let z = CmcExtrinsicCurvature { tau: 0.3, mu: TraceFreeRadialTensor::new(vec![0.0; g.len()]) };
        assert!(sup_abs(&momentum_residual(&flat, &z, &g).unwrap()) == 0.0);
        let one = CmcExtrinsicCurvature { tau: 0.0, mu: TraceFreeRadialTensor::new(vec![1.0; g.len()]) };
        let d = momentum_residual(&flat, &one, &g).unwrap();
        for (v, r) in d.iter().zip(g.nodes()) {
            assert!((v - 6.0 / r).abs() < 1e-3);
        }
    }

    #[test]
    fn conformal_killing_examples() {
        let g = ugrid();
        let flat = RadialMetric::flat(g.len());
        let dil = RadialVectorField { u: g.nodes().to_vec() };
        assert!(sup_abs(&conformal_killing_apply(&flat, &dil, &g).unwrap().m) == 0.0);
        let unit = RadialVectorField { u: vec![1.0; g.len()] };
        let m = conformal_killing_apply(&flat, &unit, &g).unwrap();
        for (v, r) in m.m.iter().zip(g.nodes()) {
            assert!((v + 1.0 / (3.0 * r)).abs() < 1e-4, "{v} vs {}", -1.0 / (3.0 * r));
        }
        let c = 3.7;
        let scaled = RadialVectorField { u: vec![c; g.len()] };
        let mc = conformal_killing_apply(&flat, &scaled, &g).unwrap();
        for (a, b) in mc.m.iter().zip(&m.m) {
            assert!((a - c * b).abs() <= 1e-11 * a.abs());
        }
        assert!(mc.trace().iter().all(|t| *t == 0.0));
    }

    #[test]
    fn vector_laplacian_examples() {
        let g = ugrid();
        let flat = RadialMetric::flat(g.len());
        let lx = |u: Vec<f64>| vector_laplacian_apply(&flat, &RadialVectorField { u }, &g).unwrap().u;
        assert!(sup_abs(&lx(g.nodes().to_vec())) == 0.0);
        let inv = lx(g.map(|r| 1.0 / (r * r)));
        assert!(sup_abs(&inv[2..g.len() - 2]) < 1e-3);
        let sq = lx(g.map(|r| r * r));
        assert!(sq[2..g.len() - 2].iter().all(|v| (v + 8.0 / 3.0).abs() < 1e-3));
    }

    #[test]
    fn laplacian_of_r_squared_is_six() {
        let g = ugrid();
        let l = laplace_beltrami(&RadialMetric::flat(g.len()), &g.map(|r| r * r), &g).unwrap();
        assert!(l.iter().all(|v| (v - 6.0).abs() < 1e-11));
    }
}
