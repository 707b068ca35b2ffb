//! Least-squares rates in log-log space.

use serde::Serialize;

use crate::error::{Error, Result};

pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFit {
    pub quantity: String,
    pub epsilons: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub target: f64,
    pub margin: f64,
    pub pass: bool,
}

/// Fit log(value) = slope log(eps) + b; pass iff slope >= target - margin.
pub fn fit_rate(quantity: &str, eps: &[f64], values: &[f64], target: f64, margin: f64) -> Result<RateFit> {
    if eps.len() != values.len() {
        return Err(Error::BadSeries(format!("{quantity}: {} epsilons vs {} values", eps.len(), values.len())));
    }
    if eps.len() < MIN_FIT_POINTS {
        return Err(Error::BadSeries(format!("{quantity}: only {} points", eps.len())));
    }
    if let Some(v) = eps.iter().chain(values).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(Error::BadSeries(format!("{quantity}: non-positive or non-finite entry {v}")));
    }
    let x: Vec<f64> = eps.iter().map(|e| e.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::BadSeries(format!("{quantity}: all epsilons equal")));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(RateFit {
        quantity: quantity.into(),
        epsilons: eps.to_vec(),
        values: values.to_vec(),
        slope,
        intercept: my - slope * mx,
        r2,
        target,
        margin,
        pass: slope >= target - margin,
    })
}
