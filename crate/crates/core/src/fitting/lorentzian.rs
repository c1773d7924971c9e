use crate::error::{Error, Result};
use crate::resonator::TransmissionTrace;

use super::lm::{levenberg_marquardt, spd_inverse, LeastSquaresProblem, LmOptions};
use super::{residual_variance, FitParam, FitResult};

/// Starting point for a Lorentzian fit, in physical units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianGuess {
    /// [m]
    pub center: f64,
    /// [m]
    pub fwhm: f64,
    pub depth: f64,
    pub baseline: f64,
}

fn softplus(u: f64) -> f64 {
    if u > 30.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

fn softplus_inv(w: f64) -> f64 {
    if w > 30.0 {
        w + (-(-w).exp()).ln_1p()
    } else {
        w.exp_m1().ln()
    }
}

fn sigmoid(u: f64) -> f64 {
    1.0 / (1.0 + (-u).exp())
}

/// Dip model `baseline − depth / (1 + (2(x − center)/fwhm)²)` on a trace.
///
/// Wavelengths are shifted by `origin` and divided by `scale`, and the
/// width is parameterised as `fwhm = scale·softplus(u)` so it stays positive.
/// Parameter vector: `[center, u, depth, baseline]` in scaled units.
#[derive(Debug, Clone)]
pub struct LorentzianProblem {
    x: Vec<f64>,
    y: Vec<f64>,
    origin: f64,
    scale: f64,
}

impl LorentzianProblem {
    pub fn new(trace: &TransmissionTrace, origin: f64, scale: f64) -> Self {
        Self {
            x: trace.wavelengths().iter().map(|l| (l - origin) / scale).collect(),
            y: trace.transmittance().to_vec(),
            origin,
            scale,
        }
    }

    /// Scaled parameter vector for a physical guess.
    pub fn encode(&self, g: &LorentzianGuess) -> [f64; 4] {
        [(g.center - self.origin) / self.scale, softplus_inv(g.fwhm / self.scale), g.depth, g.baseline]
    }

    pub fn decode(&self, p: &[f64]) -> LorentzianGuess {
        LorentzianGuess {
            center: self.origin + p[0] * self.scale,
            fwhm: self.scale * softplus(p[1]),
            depth: p[2],
            baseline: p[3],
        }
    }
}

impl LeastSquaresProblem for LorentzianProblem {
    fn n_params(&self) -> usize {
        4
    }

    fn n_residuals(&self) -> usize {
        self.x.len()
    }

    fn residuals(&self, p: &[f64], out: &mut [f64]) {
        let w = softplus(p[1]);
        for (i, (&x, &y)) in self.x.iter().zip(&self.y).enumerate() {
            let z = 2.0 * (x - p[0]) / w;
            out[i] = p[3] - p[2] / (1.0 + z * z) - y;
        }
    }

    fn jacobian(&self, p: &[f64], out: &mut [f64]) {
        let w = softplus(p[1]);
        let dw = sigmoid(p[1]);
        let d = p[2];
        for (i, &x) in self.x.iter().enumerate() {
            let z = 2.0 * (x - p[0]) / w;
            let l = 1.0 / (1.0 + z * z);
            let row = &mut out[i * 4..i * 4 + 4];
            row[0] = -4.0 * d * z * l * l / w;
            row[1] = -2.0 * d * z * z * l * l / w * dw;
            row[2] = -l;
            row[3] = 1.0;
        }
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn percentile(v: &[f64], q: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s[((s.len() - 1) as f64 * q).round() as usize]
}

/// Noise σ estimated from successive differences (MAD-based).
fn noise_floor(y: &[f64]) -> f64 {
    let d: Vec<f64> = y.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    1.4826 * median(d) / std::f64::consts::SQRT_2
}

fn auto_guess(trace: &TransmissionTrace) -> LorentzianGuess {
    let wl = trace.wavelengths();
    let t = trace.transmittance();
    let (imin, &tmin) = t.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).expect("non-empty trace");
    let baseline = percentile(t, 0.9);
    let depth = baseline - tmin;
    let half = baseline - depth / 2.0;
    let right = (imin..t.len()).find(|&i| t[i] > half).map(|i| wl[i]);
    let left = (0..=imin).rev().find(|&i| t[i] > half).map(|i| wl[i]);
    let span = wl[wl.len() - 1] - wl[0];
    let fwhm = match (left, right) {
        (Some(l), Some(r)) if r > l => r - l,
        _ => span / 4.0,
    };
    LorentzianGuess { center: wl[imin], fwhm, depth, baseline }
}

/// Fit a single Lorentzian dip; adds the derived `q = center / fwhm`.
pub fn fit_lorentzian(trace: &TransmissionTrace, initial_guess: Option<LorentzianGuess>) -> Result<FitResult> {
    if trace.len() < 8 {
        return Err(Error::InvalidParameter { name: "trace", reason: "need at least 8 points".into() });
    }
    let auto = auto_guess(trace);
    let noise = noise_floor(trace.transmittance());
    if !(auto.depth > 1e-12) || auto.depth <= 3.0 * noise {
        return Err(Error::NoResonance { depth: auto.depth, noise });
    }
    let guess = initial_guess.unwrap_or(auto);
    let span = trace.wavelengths()[trace.len() - 1] - trace.wavelengths()[0];
    if span < guess.fwhm {
        return Err(Error::InvalidParameter { name: "trace", reason: "must span at least one linewidth".into() });
    }

    let problem = LorentzianProblem::new(trace, guess.center, guess.fwhm);
    let start = problem.encode(&guess);
    let opts = LmOptions::default();
    let out = levenberg_marquardt(&problem, &start, &opts);
    if !out.converged {
        return Err(Error::NotConverged { iterations: out.iterations });
    }
    let fit = problem.decode(&out.params);
    if !(fit.fwhm > 0.0) || !fit.center.is_finite() {
        return Err(Error::NotConverged { iterations: out.iterations });
    }

    let m = trace.len();
    let s2 = residual_variance(out.residual_norm * out.residual_norm, m, 4);
    let cov = spd_inverse(&out.jtj, 4).map(|inv| inv.into_iter().map(|v| v * s2).collect::<Vec<_>>());
    let se = |k: usize| cov.as_ref().map_or(f64::INFINITY, |c| c[k * 4 + k].max(0.0).sqrt());
    let center_se = problem.scale * se(0);
    let fwhm_se = problem.scale * sigmoid(out.params[1]) * se(1);
    let q = fit.center / fit.fwhm;
    let q_se = q * ((center_se / fit.center).powi(2) + (fwhm_se / fit.fwhm).powi(2)).sqrt();

    Ok(FitResult {
        params: vec![
            FitParam { name: "center", value: fit.center, stderr: center_se },
            FitParam { name: "fwhm", value: fit.fwhm, stderr: fwhm_se },
            FitParam { name: "depth", value: fit.depth, stderr: se(2) },
            FitParam { name: "baseline", value: fit.baseline, stderr: se(3) },
            FitParam { name: "q", value: q, stderr: q_se },
        ],
        residual_norm: out.residual_norm,
        converged: true,
        iterations: out.iterations,
        warnings: Vec::new(),
    })
}
