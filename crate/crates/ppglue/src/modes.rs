//! Spherical-harmonic blocks of the flat vector Laplacian, the catalogue of
//! kernel fields, per-mode Dirichlet solves, and the momentum repair on the
//! glued radial metric.

use serde::Serialize;

use crate::banded::BandMatrix;
use crate::error::{Error, Result};
use crate::glue::GluedData;
use crate::grid::{richardson_order, sup_abs, RadialGrid};
use crate::norms::{weighted_norm_values, FrameTensor, NormSpec};
use crate::par;
use crate::radial::{ckv_profile, divergence, vector_laplacian_profile, RadialVectorField, TraceFreeRadialTensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ModeIndex {
    pub l: u32,
    pub m: i32,
}

impl ModeIndex {
    pub fn new(l: u32, m: i32) -> Result<Self> {
        if m.unsigned_abs() > l {
            return Err(Error::UndefinedMode(format!("|m| = {} > l = {l}", m.abs())));
        }
        Ok(ModeIndex { l, m })
    }

    pub fn lambda(&self) -> f64 {
        let l = self.l as f64;
        l * (l + 1.0)
    }
}

/// f_r = u phi_lm, Z_r = v V_lm + w W_lm. `v`, `w` are absent for l = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeVectorField {
    pub index: ModeIndex,
    pub u: Vec<f64>,
    pub v: Option<Vec<f64>>,
    pub w: Option<Vec<f64>>,
}

impl ModeVectorField {
    pub fn radial(u: Vec<f64>) -> Self {
        ModeVectorField { index: ModeIndex { l: 0, m: 0 }, u, v: None, w: None }
    }

    pub fn new(index: ModeIndex, u: Vec<f64>, v: Vec<f64>, w: Vec<f64>) -> Self {
        ModeVectorField { index, u, v: Some(v), w: Some(w) }
    }

    fn check(&self, n: usize) -> Result<()> {
        let bad_len = |x: &Option<Vec<f64>>| x.as_ref().is_some_and(|x| x.len() != n);
        if self.u.len() != n || bad_len(&self.v) || bad_len(&self.w) {
            return Err(Error::InsufficientNodes { need: n, got: self.u.len() });
        }
        if self.index.l == 0 {
            let nonzero = |x: &Option<Vec<f64>>| x.as_ref().is_some_and(|x| x.iter().any(|v| *v != 0.0));
            if nonzero(&self.v) || nonzero(&self.w) {
                return Err(Error::UndefinedMode("V and W components need l >= 1".into()));
            }
        }
        let all = self.u.iter().chain(self.v.iter().flatten()).chain(self.w.iter().flatten());
        if all.into_iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidGrid("non-finite mode profile".into()));
        }
        Ok(())
    }

    fn v_or_zero(&self) -> Vec<f64> {
        self.v.clone().unwrap_or_else(|| vec![0.0; self.u.len()])
    }

    fn w_or_zero(&self) -> Vec<f64> {
        self.w.clone().unwrap_or_else(|| vec![0.0; self.u.len()])
    }

    pub fn sup(&self) -> f64 {
        sup_abs(&self.u).max(sup_abs(&self.v_or_zero())).max(sup_abs(&self.w_or_zero()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Growth {
    AtInfinity,
    AtOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Family {
    RadialSpecial,
    VCoupledA,
    VCoupledB,
    W,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct KernelFamilyTag {
    pub growth: Growth,
    pub family: Family,
}

impl KernelFamilyTag {
    pub fn all() -> [KernelFamilyTag; 8] {
        let mut out = [KernelFamilyTag { growth: Growth::AtInfinity, family: Family::RadialSpecial }; 8];
        let fams = [Family::RadialSpecial, Family::VCoupledA, Family::VCoupledB, Family::W];
        for (k, g) in [Growth::AtInfinity, Growth::AtOrigin].into_iter().enumerate() {
            for (j, f) in fams.into_iter().enumerate() {
                out[4 * k + j] = KernelFamilyTag { growth: g, family: f };
            }
        }
        out
    }

    /// Power-law exponents of the (u, v, w) profiles; None where identically zero.
    fn exponents(&self, l: i32) -> [Option<i32>; 3] {
        use Family::*;
        use Growth::*;
        match (self.growth, self.family) {
            (AtInfinity, RadialSpecial) => [Some(1), None, None],
            (AtOrigin, RadialSpecial) => [Some(-2), None, None],
            (AtInfinity, VCoupledA) => [Some(l + 1), Some(l), None],
            (AtInfinity, VCoupledB) => [Some(l - 1), Some(l - 2), None],
            (AtOrigin, VCoupledA) => [Some(-l), Some(-l - 1), None],
            (AtOrigin, VCoupledB) => [Some(-l - 2), Some(-l - 3), None],
            (AtInfinity, W) => [None, None, Some(l - 1)],
            (AtOrigin, W) => [None, None, Some(-l - 2)],
        }
    }
}

pub fn kernel_mode(tag: KernelFamilyTag, index: ModeIndex, grid: &RadialGrid) -> Result<ModeVectorField> {
    let special = tag.family == Family::RadialSpecial;
    if special != (index.l == 0) {
        return Err(Error::UndefinedMode(format!("{:?} is not catalogued for l = {}", tag, index.l)));
    }
    let l = index.l as f64;
    let sl = index.lambda().sqrt();
    let (cu, cv, cw) = match (tag.growth, tag.family) {
        (_, Family::RadialSpecial) => (1.0, 0.0, 0.0),
        (Growth::AtInfinity, Family::VCoupledA) => ((l - 6.0) * sl, l * (l + 9.0), 0.0),
        (Growth::AtInfinity, Family::VCoupledB) => (sl, l + 1.0, 0.0),
        (Growth::AtOrigin, Family::VCoupledA) => ((l + 7.0) * sl, -(l + 1.0) * (l - 8.0), 0.0),
        (Growth::AtOrigin, Family::VCoupledB) => (sl, -l, 0.0),
        (_, Family::W) => (0.0, 0.0, 1.0),
    };
    let e = tag.exponents(index.l as i32);
    let prof = |c: f64, p: Option<i32>| match p {
        Some(p) => grid.map(|r| c * r.powi(p)),
        None => vec![0.0; grid.len()],
    };
    let u = prof(cu, e[0]);
    if special {
        return Ok(ModeVectorField { index, u, v: None, w: None });
    }
    Ok(ModeVectorField::new(index, u, prof(cv, e[1]), prof(cw, e[2])))
}

fn u_line(l0: bool, lam: f64, r: f64, u: [f64; 3], v: [f64; 2]) -> f64 {
    // u = [u, u', u''], v = [v, v']
    let mut s = 2.0 / 3.0 * u[2] + 4.0 / 3.0 * u[1] / r - 4.0 / 3.0 * u[0] / (r * r);
    if !l0 {
        let sl = lam.sqrt();
        s += -lam / 2.0 * u[0] / (r * r) + sl / r * v[0] - sl / 6.0 * v[1];
    }
    -s
}

fn v_line(lam: f64, r: f64, u: [f64; 2], v: [f64; 3]) -> f64 {
    let sl = lam.sqrt();
    -(sl / 6.0 * u[1] + 4.0 * sl / 3.0 * u[0] / r + 2.0 * r * v[1] + (1.0 - 2.0 * lam / 3.0) * v[0] + r * r / 2.0 * v[2])
}

fn w_line(lam: f64, r: f64, w: [f64; 3]) -> f64 {
    -(r * r / 2.0 * w[2] + 2.0 * r * w[1] + (1.0 - lam / 2.0) * w[0])
}

/// Flat vector Laplacian restricted to one (l, m) block.
pub fn apply_flat_mode(mode: &ModeVectorField, grid: &RadialGrid) -> Result<ModeVectorField> {
    mode.check(grid.len())?;
    let l0 = mode.index.l == 0;
    let lam = mode.index.lambda();
    let r = grid.nodes();
    let n = r.len();
    let (u1, u2) = (grid.d1(&mode.u), grid.d2(&mode.u));
    if l0 {
        let uu = (0..n).map(|i| u_line(true, lam, r[i], [mode.u[i], u1[i], u2[i]], [0.0; 2])).collect();
        return Ok(ModeVectorField { index: mode.index, u: uu, v: None, w: None });
    }
    let v = mode.v_or_zero();
    let w = mode.w_or_zero();
    let (v1, v2) = (grid.d1(&v), grid.d2(&v));
    let (w1, w2) = (grid.d1(&w), grid.d2(&w));
    let uu = (0..n).map(|i| u_line(false, lam, r[i], [mode.u[i], u1[i], u2[i]], [v[i], v1[i]])).collect();
    let vv = (0..n).map(|i| v_line(lam, r[i], [mode.u[i], u1[i]], [v[i], v1[i], v2[i]])).collect();
    let ww = (0..n).map(|i| w_line(lam, r[i], [w[i], w1[i], w2[i]])).collect();
    Ok(ModeVectorField::new(mode.index, uu, vv, ww))
}

/// Dirichlet values [at r_min, at r_max] per component.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ModeBc {
    pub u: [f64; 2],
    pub v: [f64; 2],
    pub w: [f64; 2],
}

impl ModeBc {
    /// Boundary values sampled from a field on the grid.
    pub fn from_field(f: &ModeVectorField) -> Self {
        let ends = |x: &[f64]| [x[0], x[x.len() - 1]];
        ModeBc { u: ends(&f.u), v: ends(&f.v_or_zero()), w: ends(&f.w_or_zero()) }
    }
}

/// Relative residual demanded of every mode solve.
pub const MODE_SOLVE_TOL: f64 = 1e-10;

fn banded_dirichlet<F>(n: usize, k: usize, op: F, rhs: &[f64], fixed: &[(usize, f64)]) -> Result<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut mat = BandMatrix::from_operator(n, k, k, &op);
    let mut b = rhs.to_vec();
    for &(i, val) in fixed {
        mat.set_identity_row(i);
        b[i] = val;
    }
    let lu = mat.lu().map_err(|_| Error::SingularMode)?;
    if lu.pivot_ratio() < 1e-14 {
        return Err(Error::SingularMode);
    }
    let x = mat.solve(&b).map_err(|_| Error::SingularMode)?;
    let ax = mat.matvec(&x);
    let res = ax.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = sup_abs(&b).max(f64::MIN_POSITIVE);
    if res > MODE_SOLVE_TOL * scale {
        return Err(Error::LinearNotConverged { residual: res / scale, tol: MODE_SOLVE_TOL });
    }
    Ok(x)
}

/// Solve the flat block equations with Dirichlet data: a scalar banded
/// line for l = 0 and for w, an interleaved (u, v) system otherwise.
pub fn solve_mode_bvp(index: ModeIndex, rhs: &ModeVectorField, bc: &ModeBc, grid: &RadialGrid) -> Result<ModeVectorField> {
    rhs.check(grid.len())?;
    let n = grid.len();
    let last = n - 1;
    if index.l == 0 {
        let op = |u: &[f64]| apply_flat_mode(&ModeVectorField::radial(u.to_vec()), grid).map(|m| m.u).unwrap();
        let u = banded_dirichlet(n, 1, op, &rhs.u, &[(0, bc.u[0]), (last, bc.u[1])])?;
        return Ok(ModeVectorField::radial(u));
    }
    let zeros = vec![0.0; n];
    let op_uv = |x: &[f64]| {
        let u: Vec<f64> = x.iter().step_by(2).copied().collect();
        let v: Vec<f64> = x.iter().skip(1).step_by(2).copied().collect();
        let out = apply_flat_mode(&ModeVectorField::new(index, u, v, zeros.clone()), grid).unwrap();
        let ov = out.v.unwrap();
        out.u.iter().zip(&ov).flat_map(|(a, b)| [*a, *b]).collect::<Vec<f64>>()
    };
    let rv = rhs.v_or_zero();
    let b: Vec<f64> = rhs.u.iter().zip(&rv).flat_map(|(a, b)| [*a, *b]).collect();
    let fixed = [(0, bc.u[0]), (1, bc.v[0]), (2 * last, bc.u[1]), (2 * last + 1, bc.v[1])];
    let x = banded_dirichlet(2 * n, 3, op_uv, &b, &fixed)?;
    let op_w = |w: &[f64]| {
        let f = ModeVectorField::new(index, zeros.clone(), zeros.clone(), w.to_vec());
        apply_flat_mode(&f, grid).unwrap().w.unwrap()
    };
    let w = banded_dirichlet(n, 1, op_w, &rhs.w_or_zero(), &[(0, bc.w[0]), (last, bc.w[1])])?;
    Ok(ModeVectorField::new(
        index,
        x.iter().step_by(2).copied().collect(),
        x.iter().skip(1).step_by(2).copied().collect(),
        w,
    ))
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelCheck {
    pub tag: KernelFamilyTag,
    pub l: u32,
    pub residual_h: f64,
    pub residual_h2: f64,
    pub order: f64,
    pub polynomial: bool,
    pub pass: bool,
}

/// Residual of every catalogued kernel field for l = 1..=4 plus the two
/// radial fields, on a grid and its refinement.
pub fn kernel_suite(coarse: &RadialGrid, fine: &RadialGrid, parallel: bool) -> Result<Vec<KernelCheck>> {
    let mut cases = Vec::new();
    for tag in KernelFamilyTag::all() {
        if tag.family == Family::RadialSpecial {
            cases.push((tag, 0u32));
        } else {
            cases.extend((1..=4).map(|l| (tag, l)));
        }
    }
    par::map(&cases, parallel, |&(tag, l)| {
        let idx = ModeIndex { l, m: 0 };
        let res = |g: &RadialGrid| -> Result<f64> {
            let k = kernel_mode(tag, idx, g)?;
            let scale = k.sup();
            Ok(apply_flat_mode(&k, g)?.sup() / scale)
        };
        let (a, b) = (res(coarse)?, res(fine)?);
        let polynomial = tag.exponents(l as i32).iter().flatten().all(|p| (0..=2).contains(p));
        let order = richardson_order(a, b);
        let pass = if polynomial { a <= 1e-10 && b <= 1e-10 } else { order >= 1.8 };
        Ok(KernelCheck { tag, l, residual_h: a, residual_h2: b, order, polynomial, pass })
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepairOptions {
    pub tol: f64,
}

impl Default for RepairOptions {
    fn default() -> Self {
        RepairOptions { tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RepairReport {
    /// sup |div mu| before repair
    pub div_before: f64,
    /// sup |div mu~| over interior nodes, relative to div_before
    pub relative_residual: f64,
    /// |X| in the (1,0) norm with weight exponent nu - 1
    pub x_norm: f64,
    /// largest/smallest pivot magnitude, a cheap condition estimate
    pub pivot_ratio: f64,
}

/// Solve L X = (div mu)^sharp with X = 0 at both ends and return
/// mu~ = mu + D X.
pub fn repair_momentum(
    glued: &GluedData,
    opts: RepairOptions,
) -> Result<(TraceFreeRadialTensor, RadialVectorField, RepairReport)> {
    let grid = &glued.grid;
    let a = &glued.a;
    let n = grid.len();
    let mu = glued.mu();
    let div = divergence(&mu, grid);
    let div_before = sup_abs(&div);
    if div_before == 0.0 {
        let report = RepairReport { div_before, relative_residual: 0.0, x_norm: 0.0, pivot_ratio: 1.0 };
        return Ok((mu, RadialVectorField { u: vec![0.0; n] }, report));
    }
    let mut rhs: Vec<f64> = div.iter().zip(a).map(|(d, a)| d / a).collect();
    let mut mat = BandMatrix::from_operator(n, 3, 3, |u| vector_laplacian_profile(a, u, grid));
    for i in [0, n - 1] {
        mat.set_identity_row(i);
        rhs[i] = 0.0;
    }
    let lu = mat.lu()?;
    let u = mat.solve(&rhs)?;
    let dm = ckv_profile(a, &u, grid);
    let mt: Vec<f64> = mu.m.iter().zip(&dm).map(|(m, d)| m + d).collect();
    let mu_t = TraceFreeRadialTensor::new(mt);
    let after = divergence(&mu_t, grid);
    let relative_residual = sup_abs(&after[1..n - 1]) / div_before;
    if !(relative_residual <= opts.tol) {
        return Err(Error::LinearNotConverged { residual: relative_residual, tol: opts.tol });
    }
    let spec = NormSpec::new(0, glued.cfg.nu, 1, 0);
    let x_norm = weighted_norm_values(&FrameTensor::radial_vector(&u, a), a, &glued.weight(), &spec, grid)?;
    let report = RepairReport { div_before, relative_residual, x_norm, pivot_ratio: lu.pivot_ratio() };
    Ok((mu_t, RadialVectorField { u }, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(h: f64) -> RadialGrid {
        RadialGrid::uniform_step(1.0, h, (2.0 / h) as usize + 1).unwrap()
    }

    #[test]
    fn radial_field_r_is_annihilated() {
        let grid = g(1.0 / 64.0);
        let out = apply_flat_mode(&ModeVectorField::radial(grid.nodes().to_vec()), &grid).unwrap();
        assert!(sup_abs(&out.u) < 1e-12);
    }

    #[test]
    fn r_squared_gives_constant() {
        let grid = g(1.0 / 64.0);
        let out = apply_flat_mode(&ModeVectorField::radial(grid.map(|r| r * r)), &grid).unwrap();
        assert!(out.u.iter().all(|x| (x + 8.0 / 3.0).abs() < 1e-11));
    }

    #[test]
    fn l2_coupled_pair() {
        let grid = g(1.0 / 64.0);
        let idx = ModeIndex::new(2, 1).unwrap();
        let f = ModeVectorField::new(idx, grid.map(|r| 6f64.sqrt() * r), vec![3.0; grid.len()], vec![0.0; grid.len()]);
        assert!(apply_flat_mode(&f, &grid).unwrap().sup() < 1e-10);
    }

    #[test]
    fn catalogue_examples() {
        let grid = g(1.0 / 64.0);
        let w = kernel_mode(KernelFamilyTag { growth: Growth::AtOrigin, family: Family::W }, ModeIndex::new(1, 0).unwrap(), &grid).unwrap();
        assert!(w.w.unwrap().iter().zip(grid.nodes()).all(|(w, r)| (w - r.powi(-3)).abs() < 1e-15));
        let s = kernel_mode(KernelFamilyTag { growth: Growth::AtOrigin, family: Family::RadialSpecial }, ModeIndex::new(0, 0).unwrap(), &grid).unwrap();
        assert!(s.u.iter().zip(grid.nodes()).all(|(u, r)| (u - r.powi(-2)).abs() < 1e-15));
        let w2 = kernel_mode(KernelFamilyTag { growth: Growth::AtInfinity, family: Family::W }, ModeIndex::new(2, 0).unwrap(), &grid).unwrap();
        assert!(apply_flat_mode(&w2, &grid).unwrap().sup() < 1e-10);
    }

    #[test]
    fn invalid_combinations() {
        let grid = g(1.0 / 16.0);
        assert!(ModeIndex::new(1, 2).is_err());
        let t = KernelFamilyTag { growth: Growth::AtInfinity, family: Family::W };
        assert!(matches!(kernel_mode(t, ModeIndex::new(0, 0).unwrap(), &grid), Err(Error::UndefinedMode(_))));
        let mut f = ModeVectorField::radial(vec![0.0; grid.len()]);
        f.v = Some(vec![1.0; grid.len()]);
        assert!(matches!(apply_flat_mode(&f, &grid), Err(Error::UndefinedMode(_))));
    }

    #[test]
    fn bvp_manufactured_l0() {
        let grid = g(1.0 / 128.0);
        let rhs = ModeVectorField::radial(vec![-8.0 / 3.0; grid.len()]);
        let bc = ModeBc { u: [1.0, 9.0], ..Default::default() };
        let u = solve_mode_bvp(ModeIndex::new(0, 0).unwrap(), &rhs, &bc, &grid).unwrap();
        let err = u.u.iter().zip(grid.nodes()).map(|(u, r)| (u - r * r).abs()).fold(0.0, f64::max);
        assert!(err < 1e-11, "{err}");
    }

    #[test]
    fn bvp_kernel_r_exact() {
        let grid = g(1.0 / 128.0);
        let rhs = ModeVectorField::radial(vec![0.0; grid.len()]);
        let bc = ModeBc { u: [1.0, 3.0], ..Default::default() };
        let u = solve_mode_bvp(ModeIndex::new(0, 0).unwrap(), &rhs, &bc, &grid).unwrap();
        assert!(u.u.iter().zip(grid.nodes()).all(|(u, r)| (u - r).abs() < 1e-12));
    }

    #[test]
    fn bvp_reproduces_coupled_family() {
        let mut errs = Vec::new();
        for h in [1.0 / 64.0, 1.0 / 128.0] {
            let grid = g(h);
            let idx = ModeIndex::new(2, 0).unwrap();
            let tag = KernelFamilyTag { growth: Growth::AtOrigin, family: Family::VCoupledB };
            let k = kernel_mode(tag, idx, &grid).unwrap();
            let zero = ModeVectorField::new(idx, vec![0.0; grid.len()], vec![0.0; grid.len()], vec![0.0; grid.len()]);
            let s = solve_mode_bvp(idx, &zero, &ModeBc::from_field(&k), &grid).unwrap();
            let e = s.u.iter().zip(&k.u).chain(s.v.as_ref().unwrap().iter().zip(k.v.as_ref().unwrap()));
            errs.push(e.map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
        }
        assert!(errs[0] < 1e-3 && richardson_order(errs[0], errs[1]) > 1.8, "{errs:?}");
    }

    #[test]
    fn glued_operator_matches_flat_block() {
        // -A^-1 div D with A = 1 is the l = 0 block, up to O(h^2)
        let mut d = Vec::new();
        for h in [1.0 / 64.0, 1.0 / 128.0] {
            let grid = g(h);
            let u = grid.map(|r| r.powi(-2) + r.powi(3));
            let a = vec![1.0; grid.len()];
            let gl = vector_laplacian_profile(&a, &u, &grid);
            let fl = apply_flat_mode(&ModeVectorField::radial(u), &grid).unwrap().u;
            let n = grid.len();
            d.push((2..n - 2).map(|i| (gl[i] - fl[i]).abs()).fold(0.0, f64::max));
        }
        assert!(richardson_order(d[0], d[1]) > 1.8, "{d:?}");
    }
}
