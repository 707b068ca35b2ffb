//! Weighted sup-norms sum_j sup w^(-p+q+nu+j) |nabla^j T| for rotationally
//! invariant tensors on g = A dr^2 + r^2 dOmega^2.
//!
//! An invariant tensor is determined by its orthonormal-frame components at
//! points on the positive x-axis (e_x radial). Radial derivatives difference
//! those components; the angular ones come from the connection of the
//! co-rotating frame, nabla_{e_y} e_x = k e_y, nabla_{e_y} e_y = -k e_x with
//! k = 1/(r sqrt A), and likewise for e_z.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::glue::WeightFunction;
use crate::grid::RadialGrid;

pub const MAX_NORM_ORDER: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct FrameTensor {
    pub rank: usize,
    /// per node, 3^rank components in row-major (a1, ..., ak) order
    pub comps: Vec<Vec<f64>>,
}

impl FrameTensor {
    pub fn scalar(f: &[f64]) -> Self {
        FrameTensor { rank: 0, comps: f.iter().map(|v| vec![*v]).collect() }
    }

    /// X = u d/dr
    pub fn radial_vector(u: &[f64], a: &[f64]) -> Self {
        let comps = u.iter().zip(a).map(|(u, a)| vec![u * a.sqrt(), 0.0, 0.0]).collect();
        FrameTensor { rank: 1, comps }
    }

    /// v dr
    pub fn radial_covector(v: &[f64], a: &[f64]) -> Self {
        let comps = v.iter().zip(a).map(|(v, a)| vec![v / a.sqrt(), 0.0, 0.0]).collect();
        FrameTensor { rank: 1, comps }
    }

    /// Symmetric tensor diag(rr, tt, tt) in the orthonormal frame.
    pub fn radial_sym2(rr: &[f64], tt: &[f64]) -> Self {
        let comps = rr
            .iter()
            .zip(tt)
            .map(|(a, b)| {
                let mut c = vec![0.0; 9];
                c[0] = *a;
                c[4] = *b;
                c[8] = *b;
                c
            })
            .collect();
        FrameTensor { rank: 2, comps }
    }

    /// Trace-free (2m, -m, -m).
    pub fn trace_free(m: &[f64]) -> Self {
        let rr: Vec<f64> = m.iter().map(|m| 2.0 * m).collect();
        let tt: Vec<f64> = m.iter().map(|m| -m).collect();
        Self::radial_sym2(&rr, &tt)
    }

    pub fn len(&self) -> usize {
        self.comps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comps.is_empty()
    }

    pub fn modulus(&self) -> Vec<f64> {
        self.comps.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt()).collect()
    }

    /// nabla T, derivative slot first.
    pub fn covariant_derivative(&self, a: &[f64], grid: &RadialGrid) -> FrameTensor {
        let n = self.len();
        let k = self.rank;
        let width = 3usize.pow(k as u32);
        let r = grid.nodes();
        let mut out = vec![vec![0.0; 3 * width]; n];
        // radial slot
        for c in 0..width {
            let col: Vec<f64> = self.comps.iter().map(|v| v[c]).collect();
            let d = grid.d1(&col);
            for i in 0..n {
                out[i][c] = d[i] / a[i].sqrt();
            }
        }
        // angular slots: d = 1 (e_y), 2 (e_z)
        for i in 0..n {
            let kap = 1.0 / (r[i] * a[i].sqrt());
            for d in 1..3 {
                for idx in 0..width {
                    let mut s = 0.0;
                    for slot in 0..k {
                        let stride = 3usize.pow((k - 1 - slot) as u32);
                        let ai = (idx / stride) % 3;
                        let base = idx - ai * stride;
                        if ai == 0 {
                            s += self.comps[i][base + d * stride];
                        } else if ai == d {
                            s -= self.comps[i][base];
                        }
                    }
                    out[i][d * width + idx] = -kap * s;
                }
            }
        }
        FrameTensor { rank: k + 1, comps: out }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormSpec {
    pub k: usize,
    pub nu: f64,
    /// (contravariant, covariant) valence
    pub p: usize,
    pub q: usize,
    /// optional radius interval U
    pub subset: Option<(f64, f64)>,
}

impl NormSpec {
    pub fn new(k: usize, nu: f64, p: usize, q: usize) -> Self {
        NormSpec { k, nu, p, q, subset: None }
    }

    pub fn on(mut self, lo: f64, hi: f64) -> Self {
        self.subset = Some((lo, hi));
        self
    }

    pub fn exponent(&self, j: usize) -> f64 {
        weight_exponent(self.p, self.q, self.nu, j)
    }
}

pub fn weight_exponent(p: usize, q: usize, nu: f64, j: usize) -> f64 {
    -(p as f64) + q as f64 + nu + j as f64
}

fn node_range(grid: &RadialGrid, subset: Option<(f64, f64)>) -> Result<std::ops::Range<usize>> {
    match subset {
        None => Ok(0..grid.len()),
        Some((lo, hi)) => {
            let r = grid.index_range(lo, hi);
            if r.is_empty() {
                return Err(Error::EmptySubset { lo, hi });
            }
            Ok(r)
        }
    }
}

/// Sum over j <= k of sup over the (restricted) nodes of w^e |nabla^j T|.
pub fn weighted_norm(t: &FrameTensor, a: &[f64], w: &WeightFunction, spec: &NormSpec, grid: &RadialGrid) -> Result<f64> {
    weighted_norm_values(t, a, &w.on(grid), spec, grid)
}

/// As `weighted_norm`, with the weight already sampled on the nodes.
pub fn weighted_norm_values(t: &FrameTensor, a: &[f64], w: &[f64], spec: &NormSpec, grid: &RadialGrid) -> Result<f64> {
    if spec.k > MAX_NORM_ORDER {
        return Err(Error::DerivativeOrder(spec.k));
    }
    let range = node_range(grid, spec.subset)?;
    let mut total = 0.0;
    let mut cur = t.clone();
    for j in 0..=spec.k {
        if j > 0 {
            cur = cur.covariant_derivative(a, grid);
        }
        let e = spec.exponent(j);
        let m = cur.modulus();
        let s = range.clone().map(|i| w[i].powf(e) * m[i]).fold(0.0, f64::max);
        total += s;
    }
    Ok(total)
}

/// Monotonicity in the weight exponent: returns
/// ((inf_U w)^(nu2-nu1) |T|_nu1, |T|_nu2, (sup_U w)^(nu2-nu1) |T|_nu1).
pub fn norm_monotonicity_gap(
    t: &FrameTensor,
    a: &[f64],
    w: &WeightFunction,
    s1: &NormSpec,
    s2: &NormSpec,
    grid: &RadialGrid,
) -> Result<(f64, f64, f64)> {
    if !(s1.nu < s2.nu) || s1.k != 0 || s2.k != 0 || s1.subset != s2.subset {
        return Err(Error::Config("need nu1 < nu2, k = 0 and a shared subset".into()));
    }
    let wv = w.on(grid);
    let range = node_range(grid, s1.subset)?;
    let (lo, hi) = range.clone().fold((f64::INFINITY, 0.0f64), |(l, h), i| (l.min(wv[i]), h.max(wv[i])));
    let n1 = weighted_norm_values(t, a, &wv, s1, grid)?;
    let n2 = weighted_norm_values(t, a, &wv, s2, grid)?;
    let d = s2.nu - s1.nu;
    Ok((lo.powf(d) * n1, n2, hi.powf(d) * n1))
}
