use crate::error::{Error, Result};

use super::{residual_variance, FitParam, FitResult};

/// `y = amplitude · x^exponent` by ordinary least squares on `(ln x, ln y)`.
pub fn fit_power_law(x: &[f64], y: &[f64]) -> Result<FitResult> {
    if x.len() != y.len() {
        return Err(Error::InvalidParameter { name: "y", reason: "length differs from x".into() });
    }
    if x.len() < 3 {
        return Err(Error::InvalidParameter { name: "x", reason: "need at least 3 points".into() });
    }
    if x.iter().chain(y).any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter { name: "x/y", reason: "all values must be finite and positive".into() });
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter { name: "x", reason: "needs at least two distinct values".into() });
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rss: f64 = lx.iter().zip(&ly).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let s2 = residual_variance(rss, lx.len(), 2);
    let se_slope = (s2 / sxx).sqrt();
    let se_intercept = (s2 * (1.0 / n + mx * mx / sxx)).sqrt();
    let amplitude = intercept.exp();
    Ok(FitResult {
        params: vec![
            FitParam { name: "amplitude", value: amplitude, stderr: amplitude * se_intercept },
            FitParam { name: "exponent", value: slope, stderr: se_slope },
        ],
        residual_norm: rss.sqrt(),
        converged: true,
        iterations: 1,
        warnings: Vec::new(),
    })
}
