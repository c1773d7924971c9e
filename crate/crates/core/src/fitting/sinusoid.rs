use std::f64::consts::PI;

use crate::error::{Error, Result};

use super::lm::spd_inverse;
use super::{residual_variance, FitParam, FitResult};

/// Fit of `offset + amplitude·cos(φ − phase_origin)` with the derived visibility.
#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidFit {
    pub result: FitResult,
    pub visibility: f64,
    pub visibility_stderr: f64,
}

/// Unit-frequency sinusoid fit of `counts` against `phases` [rad].
///
/// With the frequency known the model is linear in `(offset, a, b)` for
/// `offset + a·cos φ + b·sin φ`, so the least-squares optimum is solved
/// directly; amplitude and phase origin are its polar form.
pub fn fit_sinusoid(phases: &[f64], counts: &[f64]) -> Result<SinusoidFit> {
    if phases.len() != counts.len() {
        return Err(Error::InvalidParameter { name: "counts", reason: "length differs from phases".into() });
    }
    if phases.len() < 5 {
        return Err(Error::InvalidParameter { name: "phases", reason: "need at least 5 points".into() });
    }
    if phases.iter().chain(counts).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter { name: "phases/counts", reason: "must be finite".into() });
    }
    let lo = phases.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = phases.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi - lo < PI * (1.0 - 1e-9) {
        return Err(Error::InvalidParameter { name: "phases", reason: "must span at least half a period".into() });
    }

    let mut xtx = [0.0; 9];
    let mut xty = [0.0; 3];
    for (&p, &y) in phases.iter().zip(counts) {
        let row = [1.0, p.cos(), p.sin()];
        for a in 0..3 {
            xty[a] += row[a] * y;
            for b in 0..3 {
                xtx[a * 3 + b] += row[a] * row[b];
            }
        }
    }
    let inv = spd_inverse(&xtx, 3)
        .ok_or(Error::InvalidParameter { name: "phases", reason: "design matrix is singular".into() })?;
    let beta: Vec<f64> = (0..3).map(|a| (0..3).map(|b| inv[a * 3 + b] * xty[b]).sum()).collect();
    let (offset, ca, sa) = (beta[0], beta[1], beta[2]);
    if !(offset > 0.0) {
        return Err(Error::InvalidParameter { name: "counts", reason: "fitted offset is not positive".into() });
    }
    let rss: f64 = phases.iter().zip(counts).map(|(&p, &y)| (y - offset - ca * p.cos() - sa * p.sin()).powi(2)).sum();
    let s2 = residual_variance(rss, phases.len(), 3);
    let cov: Vec<f64> = inv.iter().map(|v| v * s2).collect();

    let mut warnings = Vec::new();
    let mut amplitude = ca.hypot(sa);
    let phase_origin = if amplitude <= 1e-12 * offset {
        warnings.push("phase origin undetermined: zero amplitude");
        amplitude = 0.0;
        0.0
    } else {
        sa.atan2(ca)
    };
    if amplitude > offset {
        warnings.push("amplitude clamped to offset");
        amplitude = offset;
    }

    // delta method for amplitude, phase and V = amplitude / offset
    let grad = |g: [f64; 3]| -> f64 {
        let mut v = 0.0;
        for a in 0..3 {
            for b in 0..3 {
                v += g[a] * cov[a * 3 + b] * g[b];
            }
        }
        v.max(0.0).sqrt()
    };
    let raw_amp = ca.hypot(sa);
    let (g_amp, g_phase) = if raw_amp > 0.0 {
        ([0.0, ca / raw_amp, sa / raw_amp], [0.0, -sa / (raw_amp * raw_amp), ca / (raw_amp * raw_amp)])
    } else {
        ([0.0, 1.0, 0.0], [0.0, 0.0, 0.0])
    };
    let visibility = amplitude / offset;
    let g_vis = [-visibility / offset, g_amp[1] / offset, g_amp[2] / offset];
    let phase_se = if raw_amp > 0.0 { grad(g_phase) } else { f64::INFINITY };

    let result = FitResult {
        params: vec![
            FitParam { name: "offset", value: offset, stderr: grad([1.0, 0.0, 0.0]) },
            FitParam { name: "amplitude", value: amplitude, stderr: grad(g_amp) },
            FitParam { name: "phase_origin", value: phase_origin, stderr: phase_se },
            FitParam { name: "visibility", value: visibility, stderr: grad(g_vis) },
        ],
        residual_norm: rss.sqrt(),
        converged: true,
        iterations: 1,
        warnings,
    };
    let visibility_stderr = result.stderr("visibility");
    Ok(SinusoidFit { result, visibility, visibility_stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn phases(n: usize, lo: f64, hi: f64) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn exact_recovery() {
        let ph = phases(11, 0.0, 2.0 * PI);
        let y: Vec<f64> = ph.iter().map(|p| 100.0 * (1.0 + 0.5 * (p - 0.1).cos())).collect();
        let f = fit_sinusoid(&ph, &y).unwrap();
        assert!((f.result.value("offset") - 100.0).abs() < 1e-9);
        assert!((f.result.value("amplitude") - 50.0).abs() < 1e-9);
        assert!((f.result.value("phase_origin") - 0.1).abs() < 1e-9);
        assert!((f.visibility - 0.5).abs() < 1e-9);
    }

    #[test]
    fn zero_amplitude_is_flagged_not_an_error() {
        let ph = phases(9, 0.0, PI);
        let f = fit_sinusoid(&ph, &[42.0; 9]).unwrap();
        assert_eq!(f.visibility, 0.0);
        assert!(!f.result.warnings.is_empty());
    }

    #[test]
    fn rejects_short_or_narrow_sweeps() {
        assert!(fit_sinusoid(&[0.0, 1.0, 2.0, 3.0], &[1.0; 4]).is_err());
        let narrow = phases(9, 0.0, 1.0);
        assert!(fit_sinusoid(&narrow, &[1.0; 9]).is_err());
    }

    proptest! {
        #[test]
        fn visibility_invariant_under_global_phase_shift(
            shift in -PI..PI,
            v in 0.0f64..1.0,
            noise in proptest::collection::vec(-0.02f64..0.02, 21),
        ) {
            let ph = phases(21, 0.4 * PI, 1.4 * PI);
            let y: Vec<f64> = ph.iter().zip(&noise).map(|(p, n)| 1000.0 * (1.0 + v * p.cos()) + 1000.0 * n).collect();
            let shifted: Vec<f64> = ph.iter().map(|p| p + shift).collect();
            let a = fit_sinusoid(&ph, &y).unwrap();
            let b = fit_sinusoid(&shifted, &y).unwrap();
            prop_assert!((a.visibility - b.visibility).abs() < 1e-9);
        }

        #[test]
        fn order_does_not_matter(seed in 0usize..21) {
            let ph = phases(21, 0.0, PI);
            let y: Vec<f64> = ph.iter().enumerate().map(|(i, p)| 50.0 + 30.0 * p.cos() + (i % 3) as f64).collect();
            let mut idx: Vec<usize> = (0..21).collect();
            idx.rotate_left(seed);
            idx.swap(0, 20);
            let a = fit_sinusoid(&ph, &y).unwrap();
            let b = fit_sinusoid(
                &idx.iter().map(|&i| ph[i]).collect::<Vec<_>>(),
                &idx.iter().map(|&i| y[i]).collect::<Vec<_>>(),
            ).unwrap();
            prop_assert!((a.visibility - b.visibility).abs() < 1e-12);
        }
    }
}
