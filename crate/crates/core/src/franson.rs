//! Folded Franson interferometer.
//!
//! Both photons of a pair pass the same unbalanced interferometer and each
//! takes the short (S) or long (L) arm independently. SL and LS events land in
//! side peaks at ±`path_delay`; SS and LL events overlap in the central peak,
//! where they are indistinguishable and interfere. Interference is modeled by
//! post-selecting central events with probability `(1 + V·cos φ)/2`.
//!
//! A rejected central event only loses its coincidence: both photons still
//! reach their detectors (at the other output port in the physical setup), so
//! singles and side peaks do not depend on the phase.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{check_finite, check_fraction, check_non_negative, check_positive, Error, Result};
use crate::eventsim::{simulate_two_channel_shaped, SimConfig};
use crate::fitting::fit_sinusoid;
use crate::rng::{derive_seed, SimRng};
use crate::tcspc::{
    build_histogram_labeled, summarize_with, CoincidenceHistogram, CoincidenceSummary, SummaryOptions,
    DEFAULT_BIN_WIDTH, DEFAULT_WINDOW,
};
use crate::SPEED_OF_LIGHT;

/// Fiber path difference of the interferometer [m].
pub const DEFAULT_PATH_LENGTH: f64 = 7.0;
/// Group index of the fiber.
pub const FIBER_GROUP_INDEX: f64 = 1.468;
pub const DEFAULT_INTRINSIC_VISIBILITY: f64 = 0.971;

/// Delay between the arms for `length` of fiber [s].
pub fn fiber_delay(length: f64) -> f64 {
    length * FIBER_GROUP_INDEX / SPEED_OF_LIGHT
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FransonConfig {
    /// Long-arm minus short-arm delay [s].
    pub path_delay: f64,
    /// Two-photon phase φ [rad].
    pub phase: f64,
    pub intrinsic_visibility: f64,
    /// Probability that a photon takes the short arm.
    pub splitter_ratio: f64,
    /// Gaussian σ of the per-event phase jitter [rad].
    pub phase_noise_sigma: f64,
    /// Coincidence window for each peak [s].
    pub window: f64,
}

impl Default for FransonConfig {
    fn default() -> Self {
        Self {
            path_delay: fiber_delay(DEFAULT_PATH_LENGTH),
            phase: 0.0,
            intrinsic_visibility: DEFAULT_INTRINSIC_VISIBILITY,
            splitter_ratio: 0.5,
            phase_noise_sigma: 2.0 * PI / 100.0,
            window: DEFAULT_WINDOW,
        }
    }
}

impl FransonConfig {
    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("path_delay", self.path_delay)?;
        check_finite("phase", self.phase)?;
        check_fraction("intrinsic_visibility", self.intrinsic_visibility, false)?;
        check_fraction("splitter_ratio", self.splitter_ratio, true)?;
        if self.splitter_ratio >= 1.0 {
            return Err(Error::InvalidParameter { name: "splitter_ratio", reason: "must lie in (0, 1)".into() });
        }
        check_non_negative("phase_noise_sigma", self.phase_noise_sigma)?;
        check_positive("window", self.window)?;
        Ok(())
    }

    /// Also checks that the arms are resolvable for this correlation time.
    pub fn validate_for(&self, correlation_time: f64) -> Result<()> {
        self.validate()?;
        if self.path_delay < 10.0 * correlation_time {
            return Err(Error::InvalidParameter {
                name: "path_delay",
                reason: format!("must exceed ten correlation times ({:e} s)", 10.0 * correlation_time),
            });
        }
        if self.path_delay < 3.0 * self.window {
            return Err(Error::InvalidParameter { name: "path_delay", reason: "side peaks overlap the window".into() });
        }
        Ok(())
    }
}

/// Arms taken by (signal, idler).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathLabel {
    SS,
    SL,
    LS,
    LL,
}

impl PathLabel {
    pub fn is_central(self) -> bool {
        matches!(self, PathLabel::SS | PathLabel::LL)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoutedPair {
    pub label: PathLabel,
    pub signal_time: f64,
    pub idler_time: f64,
}

/// Send each photon through the short or long arm.
pub fn route_pair<R: Rng + ?Sized>(
    signal_time: f64,
    idler_time: f64,
    config: &FransonConfig,
    rng: &mut R,
) -> RoutedPair {
    let s_short = rng.gen::<f64>() < config.splitter_ratio;
    let i_short = rng.gen::<f64>() < config.splitter_ratio;
    let label = match (s_short, i_short) {
        (true, true) => PathLabel::SS,
        (true, false) => PathLabel::SL,
        (false, true) => PathLabel::LS,
        (false, false) => PathLabel::LL,
    };
    let d = config.path_delay;
    RoutedPair {
        label,
        signal_time: if s_short { signal_time } else { signal_time + d },
        idler_time: if i_short { idler_time } else { idler_time + d },
    }
}

/// Whether a central (SS or LL) event survives the two-photon interference.
pub fn interfere_central<R: Rng + ?Sized>(label: PathLabel, config: &FransonConfig, rng: &mut R) -> Result<bool> {
    if !label.is_central() {
        return Err(Error::InvalidParameter { name: "label", reason: "only SS and LL events interfere".into() });
    }
    let noise = if config.phase_noise_sigma > 0.0 {
        Normal::new(0.0, config.phase_noise_sigma).expect("valid sigma").sample(rng)
    } else {
        0.0
    };
    let p = 0.5 * (1.0 + config.intrinsic_visibility * (config.phase + noise).cos());
    Ok(rng.gen::<f64>() < p)
}

/// Histogram and peak counts of one Franson acquisition.
#[derive(Debug, Clone, PartialEq)]
pub struct FransonRun {
    pub histogram: CoincidenceHistogram,
    pub central: CoincidenceSummary,
    /// Peaks at −path_delay and +path_delay.
    pub side: [CoincidenceSummary; 2],
    /// Detected signal and idler rates [s⁻¹].
    pub singles_signal: f64,
    pub singles_idler: f64,
}

/// Histogram range that leaves room for accidentals beyond both side peaks.
pub fn histogram_range(franson: &FransonConfig) -> f64 {
    franson.path_delay + 8.0 * franson.window.max(DEFAULT_WINDOW)
}

pub fn simulate_franson(sim: &SimConfig, franson: &FransonConfig) -> Result<FransonRun> {
    sim.validate()?;
    franson.validate_for(sim.correlation_time)?;
    // pair ids are dense, so one flag per pair marks the rejected central events
    let mut rejected: Vec<bool> = Vec::new();
    let (signal, idler) = simulate_two_channel_shaped(sim, |id, ts, ti, rng: &mut SimRng| {
        let routed = route_pair(*ts, *ti, franson, rng);
        *ts = routed.signal_time;
        *ti = routed.idler_time;
        let drop = routed.label.is_central() && !interfere_central(routed.label, franson, rng).unwrap_or(true);
        debug_assert_eq!(id as usize, rejected.len());
        rejected.push(drop);
    })?;
    let histogram = build_histogram_labeled(&signal, &idler, DEFAULT_BIN_WIDTH, histogram_range(franson), |id| {
        rejected[id as usize]
    })?;
    let d = franson.path_delay;
    let at = |c: f64, others: [f64; 2]| {
        summarize_with(&histogram, &SummaryOptions::new(franson.window).centered_at(c).excluding(&others))
    };
    let central = at(0.0, [-d, d])?;
    let side = [at(-d, [0.0, d])?, at(d, [-d, 0.0])?];
    Ok(FransonRun {
        singles_signal: signal.stream.rate(),
        singles_idler: idler.stream.rate(),
        histogram,
        central,
        side,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    pub phase: f64,
    /// Accidental-subtracted central-window coincidences.
    pub coincidences: f64,
    pub raw_coincidences: f64,
    /// Accidental-subtracted counts of both side peaks together.
    pub side_coincidences: f64,
    pub singles_signal: f64,
    pub singles_idler: f64,
}

/// One acquisition per phase, each with its own seed derived from `sim.rng_seed`.
pub fn phase_sweep(sim: &SimConfig, franson: &FransonConfig, phases: &[f64]) -> Result<Vec<PhasePoint>> {
    if phases.len() < 5 {
        return Err(Error::InvalidParameter { name: "phases", reason: "need at least 5 points".into() });
    }
    phases
        .par_iter()
        .enumerate()
        .map(|(k, &phase)| {
            let mut s = *sim;
            s.rng_seed = derive_seed(sim.rng_seed, k as u64);
            let run = simulate_franson(&s, &franson.with_phase(phase))?;
            Ok(PhasePoint {
                phase,
                coincidences: run.central.true_coincidences,
                raw_coincidences: run.central.raw_coincidences,
                side_coincidences: run.side[0].true_coincidences + run.side[1].true_coincidences,
                singles_signal: run.singles_signal,
                singles_idler: run.singles_idler,
            })
        })
        .collect()
}

/// `count` phases evenly spaced over `[from, to]`.
pub fn phase_grid(from: f64, to: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![from],
        n => (0..n).map(|i| from + (to - from) * i as f64 / (n - 1) as f64).collect(),
    }
}

pub fn sweep_to_csv(points: &[PhasePoint]) -> String {
    let mut out = String::from("phase_rad,coincidences,singles_signal,singles_idler\n");
    for p in points {
        let _ = writeln!(out, "{},{},{},{}", p.phase, p.coincidences, p.singles_signal, p.singles_idler);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Visibility {
    /// (max − min)/(max + min) over the sweep.
    pub v_raw: f64,
    /// Amplitude over offset of the sinusoid fit.
    pub v_fit: f64,
    pub sigma_v: f64,
    pub warnings: Vec<&'static str>,
}

impl Visibility {
    pub fn bell_sigmas(&self) -> f64 {
        bell_violation(self.v_fit, self.sigma_v).unwrap_or(f64::NAN)
    }

    pub fn to_kv(&self) -> String {
        format!(
            "v_raw={}\nv_fit={}\nsigma_v={}\nbell_sigmas={}\n",
            self.v_raw,
            self.v_fit,
            self.sigma_v,
            self.bell_sigmas()
        )
    }
}

pub fn extract_visibility(points: &[PhasePoint]) -> Result<Visibility> {
    let phases: Vec<f64> = points.iter().map(|p| p.phase).collect();
    let counts: Vec<f64> = points.iter().map(|p| p.coincidences).collect();
    visibility_from_counts(&phases, &counts)
}

pub fn visibility_from_counts(phases: &[f64], counts: &[f64]) -> Result<Visibility> {
    let fit = fit_sinusoid(phases, counts)?;
    let max = counts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = counts.iter().cloned().fold(f64::INFINITY, f64::min);
    let v_raw = if max + min > 0.0 { (max - min) / (max + min) } else { 0.0 };
    let mut warnings = fit.result.warnings.clone();
    let mut sigma_v = fit.visibility_stderr;
    if fit.visibility == 0.0 {
        warnings.push("constant sweep: visibility undetermined");
        sigma_v = f64::INFINITY;
    }
    Ok(Visibility { v_raw, v_fit: fit.visibility, sigma_v, warnings })
}

/// Standard deviations by which `v` exceeds the 1/√2 threshold.
pub fn bell_violation(v: f64, sigma_v: f64) -> Result<f64> {
    check_positive("sigma_v", sigma_v)?;
    Ok((v - FRAC_1_SQRT_2) / sigma_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    #[test]
    fn default_delay_from_fiber_length() {
        assert!((FransonConfig::default().path_delay - 34.2770464e-9).abs() < 1e-15);
    }

    #[test]
    fn routing_frequencies_are_quarters() {
        let cfg = FransonConfig::default();
        let mut rng = seeded(3, 0);
        let n = 100_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            let r = route_pair(0.0, 0.0, &cfg, &mut rng);
            counts[r.label as usize] += 1;
        }
        let sd = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 / 4.0).abs() < 5.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn routing_shifts() {
        let cfg = FransonConfig::default();
        let mut rng = seeded(4, 0);
        for _ in 0..200 {
            let r = route_pair(1.0, 1.0 + 2e-10, &cfg, &mut rng);
            let d = r.idler_time - r.signal_time;
            let expected = match r.label {
                PathLabel::SS | PathLabel::LL => 2e-10,
                PathLabel::SL => 2e-10 + cfg.path_delay,
                PathLabel::LS => 2e-10 - cfg.path_delay,
            };
            assert!((d - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn interference_limits() {
        let mut cfg = FransonConfig { phase_noise_sigma: 0.0, intrinsic_visibility: 1.0, ..Default::default() };
        let mut rng = seeded(5, 0);
        cfg.phase = PI;
        assert!((0..1000).all(|_| !interfere_central(PathLabel::SS, &cfg, &mut rng).unwrap()));
        cfg.phase = 0.0;
        assert!((0..1000).all(|_| interfere_central(PathLabel::LL, &cfg, &mut rng).unwrap()));
        assert!(interfere_central(PathLabel::SL, &cfg, &mut rng).is_err());
    }

    #[test]
    fn bell_arithmetic() {
        assert!((bell_violation(0.971, 0.006).unwrap() - 43.982203).abs() < 1e-5);
        assert_eq!(bell_violation(FRAC_1_SQRT_2, 0.01).unwrap(), 0.0);
        assert!(bell_violation(0.6, 0.01).unwrap() < 0.0);
        assert!(bell_violation(0.9, 0.0).is_err());
    }

    #[test]
    fn exact_on_noiseless_sinusoids() {
        let ph = phase_grid(0.4 * PI, 1.4 * PI, 21);
        for v in [0.0, 0.5, 0.707, 0.971, 1.0] {
            let c: Vec<f64> = ph.iter().map(|p| 1000.0 * (1.0 + v * p.cos())).collect();
            let vis = visibility_from_counts(&ph, &c).unwrap();
            assert!((vis.v_fit - v).abs() < 1e-9, "{v}: {}", vis.v_fit);
        }
    }

    #[test]
    fn constant_sweep_flags_infinite_sigma() {
        let ph = phase_grid(0.0, PI, 9);
        let vis = visibility_from_counts(&ph, &[10.0; 9]).unwrap();
        assert_eq!(vis.v_fit, 0.0);
        assert!(vis.sigma_v.is_infinite());
        assert!(!vis.warnings.is_empty());
    }

    #[test]
    fn rejects_unresolved_arms() {
        let cfg = FransonConfig { path_delay: 5e-9, ..Default::default() };
        assert!(cfg.validate_for(1e-9).is_err());
        assert!(FransonConfig::default().validate_for(1.03e-9).is_ok());
    }
}
