//! Radial grids and second-order finite differences.
//!
//! Every grid is the image of a uniform index grid under a monotone map.
//! On `Uniform` grids the textbook stencils are used directly; otherwise
//! derivatives go through the discrete map metrics, which keeps D(r) = 1
//! to roundoff on any node distribution.

use crate::error::{Error, Result};
use serde::Serialize;

pub const MIN_NODES: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Spacing {
    Uniform,
    LogUniform,
    Mapped,
}

#[derive(Debug, Clone)]
pub struct RadialGrid {
    nodes: Vec<f64>,
    spacing: Spacing,
    h: f64,
    x_xi: Vec<f64>,
    x_xixi: Vec<f64>,
}

impl RadialGrid {
    pub fn uniform(r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        check_ends(r_min, r_max, n)?;
        let h = (r_max - r_min) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| r_min + i as f64 * h).collect();
        nodes[n - 1] = r_max;
        Self::build(nodes, Spacing::Uniform, h)
    }

    /// Uniform grid from a start point and step; exact when both are dyadic.
    pub fn uniform_step(r_min: f64, h: f64, n: usize) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::InvalidGrid(format!("step {h} must be positive")));
        }
        let nodes: Vec<f64> = (0..n).map(|i| r_min + i as f64 * h).collect();
        check_ends(r_min, *nodes.last().unwrap_or(&r_min), n)?;
        Self::build(nodes, Spacing::Uniform, h)
    }

    pub fn log_uniform(r_min: f64, r_max: f64, n: usize) -> Result<Self> {
        check_ends(r_min, r_max, n)?;
        let (a, b) = (r_min.ln(), r_max.ln());
        let ds = (b - a) / (n - 1) as f64;
        let mut nodes: Vec<f64> = (0..n).map(|i| (a + i as f64 * ds).exp()).collect();
        nodes[0] = r_min;
        nodes[n - 1] = r_max;
        Self::build(nodes, Spacing::LogUniform, ds)
    }

    /// Arbitrary strictly increasing nodes, e.g. a conformally remapped radius.
    pub fn mapped(nodes: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if n < MIN_NODES {
            return Err(Error::InsufficientNodes { need: MIN_NODES, got: n });
        }
        check_ends(nodes[0], nodes[n - 1], n)?;
        Self::build(nodes, Spacing::Mapped, 1.0)
    }

    fn build(nodes: Vec<f64>, spacing: Spacing, h: f64) -> Result<Self> {
        if nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidGrid("nodes not strictly increasing".into()));
        }
        let (x_xi, x_xixi) = match spacing {
            Spacing::Uniform => (Vec::new(), Vec::new()),
            _ => (d_index(&nodes), dd_index(&nodes)),
        };
        Ok(RadialGrid { nodes, spacing, h, x_xi, x_xixi })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }
    pub fn len(&self) -> usize {
        self.nodes.len()
    }
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
    pub fn r_min(&self) -> f64 {
        self.nodes[0]
    }
    pub fn r_max(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }
    pub fn spacing(&self) -> Spacing {
        self.spacing
    }
    /// Step in the underlying uniform variable (r, ln r, or node index).
    pub fn step(&self) -> f64 {
        self.h
    }

    /// Same node distribution rescaled by a constant, r -> s r.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let nodes = self.nodes.iter().map(|r| r * s).collect();
        match self.spacing {
            Spacing::Uniform => Self::build(nodes, Spacing::Uniform, self.h * s),
            sp => Self::build(nodes, sp, self.h),
        }
    }

    /// Node index range lying inside [lo, hi].
    pub fn index_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let a = self.nodes.partition_point(|&r| r < lo);
        let b = self.nodes.partition_point(|&r| r <= hi);
        a..b.max(a)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Vec<f64> {
        self.nodes.iter().map(|&r| f(r)).collect()
    }

    pub fn d1(&self, f: &[f64]) -> Vec<f64> {
        debug_assert_eq!(f.len(), self.len());
        match self.spacing {
            Spacing::Uniform => {
                let inv = 1.0 / self.h;
                d_index(f).into_iter().map(|v| v * inv).collect()
            }
            _ => d_index(f).iter().zip(&self.x_xi).map(|(a, b)| a / b).collect(),
        }
    }

    pub fn d2(&self, f: &[f64]) -> Vec<f64> {
        debug_assert_eq!(f.len(), self.len());
        match self.spacing {
            Spacing::Uniform => {
                let inv = 1.0 / (self.h * self.h);
                dd_index(f).into_iter().map(|v| v * inv).collect()
            }
            _ => {
                let fx = d_index(f);
                let fxx = dd_index(f);
                (0..f.len())
                    .map(|i| {
                        let xs = self.x_xi[i];
                        (fxx[i] - self.x_xixi[i] * fx[i] / xs) / (xs * xs)
                    })
                    .collect()
            }
        }
    }

    /// Derivative of order 1 or 2, or the caller's exact profile when supplied.
    pub fn fd_derivative(&self, f: &[f64], order: usize, analytic: Option<&[f64]>) -> Result<Vec<f64>> {
        if self.len() < MIN_NODES {
            return Err(Error::InsufficientNodes { need: MIN_NODES, got: self.len() });
        }
        if let Some(a) = analytic {
            return Ok(a.to_vec());
        }
        match order {
            1 => Ok(self.d1(f)),
            2 => Ok(self.d2(f)),
            k => Err(Error::DerivativeOrder(k)),
        }
    }
}

fn check_ends(r_min: f64, r_max: f64, n: usize) -> Result<()> {
    if n < MIN_NODES {
        return Err(Error::InsufficientNodes { need: MIN_NODES, got: n });
    }
    if !(r_min > 0.0) || !(r_min < r_max) || !r_max.is_finite() {
        return Err(Error::InvalidGrid(format!("need 0 < r_min < r_max, got [{r_min}, {r_max}]")));
    }
    Ok(())
}

// d/dxi with unit index spacing
fn d_index(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = 0.5 * (f[i + 1] - f[i - 1]);
    }
    out[0] = 0.5 * (4.0 * (f[1] - f[0]) - (f[2] - f[0]));
    out[n - 1] = 0.5 * ((f[n - 3] - f[n - 1]) - 4.0 * (f[n - 2] - f[n - 1]));
    out
}

fn dd_index(f: &[f64]) -> Vec<f64> {
    let n = f.len();
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i]) - (f[i] - f[i - 1]);
    }
    out[0] = -5.0 * (f[1] - f[0]) + 4.0 * (f[2] - f[0]) - (f[3] - f[0]);
    out[n - 1] = -5.0 * (f[n - 2] - f[n - 1]) + 4.0 * (f[n - 3] - f[n - 1]) - (f[n - 4] - f[n - 1]);
    out
}

pub fn sup_abs(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Observed convergence order from errors at h and h/2.
pub fn richardson_order(err_h: f64, err_h2: f64) -> f64 {
    (err_h / err_h2).log2()
}
