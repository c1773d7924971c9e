//! Microring resonator and pair-source physics.
//!
//! The on-chip pair generation rate of a ring pumped on resonance is
//!
//! ```text
//! PGR = (γ·2πR)² · (Q·v_g / (π·ω_p·R))³ · (v_g / (4πR)) · P²
//! ```
//!
//! with `v_g = c / n_g` and `ω_p = 2πc / λ_p`. Everything here is a pure
//! function of its inputs.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_finite, check_fraction, check_non_negative, check_positive, Error, Result};
use crate::rng;
use crate::SPEED_OF_LIGHT;

/// Nonlinear coefficient that makes the default device produce
/// 20×10⁹ pairs s⁻¹ at 1 mW on-chip pump with n_g = 3.7 [W⁻¹ m⁻¹].
///
/// Obtained by inverting the rate equation at the default geometry; it is a
/// calibration constant, not a measured material property.
pub const CALIBRATED_GAMMA_EFF: f64 = 28.670_987_182_187_53;

/// Group index assumed when none is given. Reproduces a ≈7.5 nm FSR for the
/// 13.91 µm ring at 1557.59 nm.
pub const DEFAULT_GROUP_INDEX: f64 = 3.7;

/// Extinction of the default synthetic resonance dip.
pub const DEFAULT_EXTINCTION_DEPTH: f64 = 0.6;

/// Physical description of a ring resonator and its pump wavelength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorSpec {
    /// Ring radius [m].
    pub radius: f64,
    /// Loaded quality factor.
    pub q_loaded: f64,
    /// Effective nonlinear coefficient including modal confinement [W⁻¹ m⁻¹].
    pub gamma_eff: f64,
    /// Group index n_g; group velocity is c / n_g.
    pub group_index: f64,
    /// Pump resonance wavelength [m].
    pub pump_wavelength: f64,
    /// Fractional depth of the transmission dip on resonance.
    pub extinction_depth: f64,
}

impl ResonatorSpec {
    /// The 13.91 µm AlGaAs-on-insulator ring pumped at 1557.59 nm with Q = 1.24×10⁶.
    pub fn reference_device() -> Self {
        Self {
            radius: 13.91e-6,
            q_loaded: 1.24e6,
            gamma_eff: CALIBRATED_GAMMA_EFF,
            group_index: DEFAULT_GROUP_INDEX,
            pump_wavelength: 1557.59e-9,
            extinction_depth: DEFAULT_EXTINCTION_DEPTH,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("radius", self.radius)?;
        check_finite("q_loaded", self.q_loaded)?;
        if self.q_loaded <= 1.0 {
            return Err(Error::InvalidParameter {
                name: "q_loaded",
                reason: format!("must exceed 1, got {}", self.q_loaded),
            });
        }
        check_non_negative("gamma_eff", self.gamma_eff)?;
        check_finite("group_index", self.group_index)?;
        if self.group_index < 1.0 {
            return Err(Error::InvalidParameter {
                name: "group_index",
                reason: format!("must be at least 1, got {}", self.group_index),
            });
        }
        check_positive("pump_wavelength", self.pump_wavelength)?;
        check_fraction("extinction_depth", self.extinction_depth, false)?;
        Ok(())
    }

    /// Pump angular frequency ω_p = 2πc/λ_p [rad s⁻¹].
    pub fn pump_angular_frequency(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.pump_wavelength
    }

    /// Group velocity c/n_g [m s⁻¹].
    pub fn group_velocity(&self) -> f64 {
        SPEED_OF_LIGHT / self.group_index
    }

    /// Photon lifetime Q/ω_p [s]; sets the signal–idler correlation time.
    pub fn cavity_lifetime(&self) -> f64 {
        self.q_loaded / self.pump_angular_frequency()
    }

    pub fn with_gamma(mut self, gamma_eff: f64) -> Self {
        self.gamma_eff = gamma_eff;
        self
    }

    /// Everything in the rate equation except γ² and P², i.e. PGR/(γ²P²).
    fn rate_per_gamma2_watt2(&self) -> f64 {
        let r = self.radius;
        let vg = self.group_velocity();
        let wp = self.pump_angular_frequency();
        let enhancement = self.q_loaded * vg / (PI * wp * r);
        (2.0 * PI * r).powi(2) * enhancement.powi(3) * (vg / (4.0 * PI * r))
    }
}

/// On-chip pair generation rate [pairs s⁻¹] at `pump_power` [W].
pub fn pgr_from_pump(spec: &ResonatorSpec, pump_power: f64) -> Result<f64> {
    spec.validate()?;
    check_non_negative("pump_power", pump_power)?;
    let g = spec.gamma_eff;
    Ok(g * g * spec.rate_per_gamma2_watt2() * pump_power * pump_power)
}

/// Pump power [W] that yields `target_pgr` pairs s⁻¹. Inverse of [`pgr_from_pump`].
pub fn pump_for_pgr(spec: &ResonatorSpec, target_pgr: f64) -> Result<f64> {
    spec.validate()?;
    check_non_negative("target_pgr", target_pgr)?;
    check_positive("gamma_eff", spec.gamma_eff)?;
    let per_w2 = spec.gamma_eff * spec.gamma_eff * spec.rate_per_gamma2_watt2();
    Ok((target_pgr / per_w2).sqrt())
}

/// Nonlinear coefficient for which `spec` produces `target_pgr` at `at_power`.
/// The `gamma_eff` field of the input is ignored.
pub fn calibrate_gamma(spec: &ResonatorSpec, target_pgr: f64, at_power: f64) -> Result<f64> {
    spec.with_gamma(0.0).validate()?;
    check_positive("target_pgr", target_pgr)?;
    check_positive("at_power", at_power)?;
    Ok((target_pgr / spec.rate_per_gamma2_watt2()).sqrt() / at_power)
}

/// Full width at half maximum of a resonance in both representations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linewidth {
    /// [m]
    pub fwhm_wavelength: f64,
    /// [Hz]
    pub fwhm_frequency: f64,
}

pub fn linewidth(spec: &ResonatorSpec) -> Result<Linewidth> {
    spec.validate()?;
    linewidth_at(spec.pump_wavelength, spec.q_loaded)
}

/// Linewidth of a resonance at `wavelength` sharing quality factor `q`.
pub fn linewidth_at(wavelength: f64, q: f64) -> Result<Linewidth> {
    check_positive("wavelength", wavelength)?;
    check_positive("q", q)?;
    Ok(Linewidth { fwhm_wavelength: wavelength / q, fwhm_frequency: SPEED_OF_LIGHT / wavelength / q })
}

/// Free spectral range λ²/(n_g·2πR) [m].
pub fn free_spectral_range(spec: &ResonatorSpec) -> Result<f64> {
    spec.validate()?;
    let lam = spec.pump_wavelength;
    Ok(lam * lam / (spec.group_index * 2.0 * PI * spec.radius))
}

/// Brightness in pairs s⁻¹ GHz⁻¹ from a 1 mW pair rate and a linewidth in Hz.
pub fn brightness(pgr_at_1mw: f64, fwhm_frequency: f64) -> Result<f64> {
    check_positive("pgr_at_1mw", pgr_at_1mw)?;
    check_positive("fwhm_frequency", fwhm_frequency)?;
    Ok(pgr_at_1mw / (fwhm_frequency / 1e9))
}

/// Transmittance of a symmetric Lorentzian dip centred on `center`.
pub fn lorentzian_transmission(spec: &ResonatorSpec, center: f64, query: f64) -> f64 {
    let fwhm = center / spec.q_loaded;
    lorentzian_dip(center, fwhm, spec.extinction_depth, query)
}

#[inline]
pub(crate) fn lorentzian_dip(center: f64, fwhm: f64, depth: f64, query: f64) -> f64 {
    let x = 2.0 * (query - center) / fwhm;
    1.0 - depth / (1.0 + x * x)
}

/// Sampled transmission spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionTrace {
    wavelengths: Vec<f64>,
    transmittance: Vec<f64>,
}

impl TransmissionTrace {
    pub fn new(wavelengths: Vec<f64>, transmittance: Vec<f64>) -> Result<Self> {
        if wavelengths.len() != transmittance.len() {
            return Err(Error::InvalidParameter {
                name: "transmittance",
                reason: format!("length {} differs from wavelengths length {}", transmittance.len(), wavelengths.len()),
            });
        }
        if wavelengths.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter { name: "wavelengths", reason: "must be strictly increasing".into() });
        }
        for &t in &transmittance {
            check_fraction("transmittance", t, false)?;
        }
        Ok(Self { wavelengths, transmittance })
    }

    /// Like [`TransmissionTrace::new`] but accepts samples in any order.
    pub fn from_unsorted(wavelengths: Vec<f64>, transmittance: Vec<f64>) -> Result<Self> {
        if wavelengths.len() != transmittance.len() {
            return Self::new(wavelengths, transmittance);
        }
        let mut pairs: Vec<(f64, f64)> = wavelengths.into_iter().zip(transmittance).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        Self::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    pub fn wavelengths(&self) -> &[f64] {
        &self.wavelengths
    }

    pub fn transmittance(&self) -> &[f64] {
        &self.transmittance
    }

    pub fn len(&self) -> usize {
        self.wavelengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.wavelengths.is_empty()
    }

    /// `wavelength_nm,transmittance` text with shortest round-trip float formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("wavelength_nm,transmittance\n");
        for (l, t) in self.wavelengths.iter().zip(&self.transmittance) {
            let _ = writeln!(out, "{},{}", l * 1e9, t);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "wavelength_nm,transmittance" => {}
            _ => return Err(Error::Parse { line: 1, reason: "expected header `wavelength_nm,transmittance`".into() }),
        }
        let mut wl = Vec::new();
        let mut tr = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Parse { line: i + 1, reason: format!("malformed row `{line}`") })
            };
            let mut cols = line.split(',');
            wl.push(parse(cols.next())? * 1e-9);
            tr.push(parse(cols.next())?);
        }
        Self::new(wl, tr)
    }
}

/// Synthetic transmission sweep with one Lorentzian dip per entry of `centers`.
///
/// Samples run from `min(centers) - span/2` to `max(centers) + span/2` in
/// increments of `step`. Dips multiply. Noise is multiplicative Gaussian,
/// `T·(1 + σ·z)`, clamped to `[0, 1]`.
pub fn synthesize_trace(
    spec: &ResonatorSpec,
    centers: &[f64],
    span: f64,
    step: f64,
    noise_sigma: f64,
    rng_seed: u64,
) -> Result<TransmissionTrace> {
    spec.validate()?;
    if centers.is_empty() {
        return Err(Error::EmptyInput("centers"));
    }
    check_positive("step", step)?;
    check_non_negative("span", span)?;
    check_non_negative("noise_sigma", noise_sigma)?;
    for &c in centers {
        check_positive("centers", c)?;
    }
    let lo = centers.iter().cloned().fold(f64::INFINITY, f64::min) - span / 2.0;
    let hi = centers.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + span / 2.0;
    let n = ((hi - lo) / step).floor() as usize + 1;
    let mut rng = rng::seeded(rng_seed, 0);
    let mut wavelengths = Vec::with_capacity(n);
    let mut transmittance = Vec::with_capacity(n);
    for i in 0..n {
        let l = lo + i as f64 * step;
        let clean: f64 = centers.iter().map(|&c| lorentzian_transmission(spec, c, l)).product();
        let t = if noise_sigma > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            (clean * (1.0 + noise_sigma * z)).clamp(0.0, 1.0)
        } else {
            clean
        };
        wavelengths.push(l);
        transmittance.push(t);
    }
    TransmissionTrace::new(wavelengths, transmittance)
}
