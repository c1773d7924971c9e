//! Experiment configuration.
//!
//! TOML with one table per concern and the unit in every key name. Values are
//! stored in the units of their keys, so a parsed file serializes back to the
//! same numbers. Only the resonator geometry is required; a missing chain
//! table takes the default loss budget of that arm, but a chain table that is
//! present must state its losses.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use ringpair::eventsim::{DetectionChain, SimConfig, DEFAULT_DARK_RATE, DEFAULT_DETECTOR_EFFICIENCY};
use ringpair::franson::{FransonConfig, DEFAULT_INTRINSIC_VISIBILITY};
use ringpair::resonator::{
    pump_for_pgr, ResonatorSpec, CALIBRATED_GAMMA_EFF, DEFAULT_EXTINCTION_DEPTH, DEFAULT_GROUP_INDEX,
};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub resonator: ResonatorSection,
    #[serde(default)]
    pub chain: ChainsSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub franson: FransonSection,
    #[serde(default)]
    pub g2h: G2hSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorSection {
    pub radius_um: f64,
    pub q_loaded: f64,
    pub pump_wavelength_nm: f64,
    #[serde(default = "default_gamma")]
    pub gamma_per_w_per_m: f64,
    #[serde(default = "default_group_index")]
    pub group_index: f64,
    #[serde(default = "default_extinction")]
    pub extinction_depth: f64,
}

fn default_gamma() -> f64 {
    CALIBRATED_GAMMA_EFF
}
fn default_group_index() -> f64 {
    DEFAULT_GROUP_INDEX
}
fn default_extinction() -> f64 {
    DEFAULT_EXTINCTION_DEPTH
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSection {
    pub path_loss_db: f64,
    pub facet_loss_db: f64,
    #[serde(default = "default_efficiency")]
    pub detector_efficiency: f64,
    #[serde(default = "default_dark")]
    pub dark_rate_hz: f64,
    #[serde(default = "default_jitter")]
    pub jitter_sigma_ps: f64,
    #[serde(default = "default_dead")]
    pub dead_time_ns: f64,
    #[serde(default)]
    pub fixed_delay_ns: f64,
    #[serde(default)]
    pub pump_leak_hz_per_mw: f64,
}

fn default_efficiency() -> f64 {
    DEFAULT_DETECTOR_EFFICIENCY
}
fn default_dark() -> f64 {
    DEFAULT_DARK_RATE
}
fn default_jitter() -> f64 {
    17.0
}
fn default_dead() -> f64 {
    50.0
}

impl ChainSection {
    fn with_losses(path_loss_db: f64, facet_loss_db: f64) -> Self {
        Self {
            path_loss_db,
            facet_loss_db,
            detector_efficiency: default_efficiency(),
            dark_rate_hz: default_dark(),
            jitter_sigma_ps: default_jitter(),
            dead_time_ns: default_dead(),
            fixed_delay_ns: 0.0,
            pump_leak_hz_per_mw: 0.0,
        }
    }

    pub fn to_chain(&self) -> DetectionChain {
        DetectionChain {
            path_loss_db: self.path_loss_db,
            facet_loss_db: self.facet_loss_db,
            detector_efficiency: self.detector_efficiency,
            dark_rate: self.dark_rate_hz,
            jitter_sigma: self.jitter_sigma_ps / 1e12,
            dead_time: self.dead_time_ns / 1e9,
            fixed_delay: self.fixed_delay_ns / 1e9,
            pump_leak_per_watt: self.pump_leak_hz_per_mw * 1e3,
        }
    }
}

fn signal_chain() -> ChainSection {
    let c = DetectionChain::reference_signal();
    ChainSection::with_losses(c.path_loss_db, c.facet_loss_db)
}
fn idler_chain() -> ChainSection {
    let c = DetectionChain::reference_idler();
    ChainSection::with_losses(c.path_loss_db, c.facet_loss_db)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainsSection {
    #[serde(default = "signal_chain")]
    pub signal: ChainSection,
    #[serde(default = "idler_chain")]
    pub idler: ChainSection,
    /// Second idler detector for heralded g².
    #[serde(default = "idler_chain")]
    pub third: ChainSection,
}

impl Default for ChainsSection {
    fn default() -> Self {
        Self { signal: signal_chain(), idler: idler_chain(), third: idler_chain() }
    }
}

/// On-chip pump powers of the standard sweep [mW].
pub const DEFAULT_POWERS_MW: [f64; 5] = [0.0034, 0.0071, 0.0112, 0.0158, 0.0245];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub duration_s: f64,
    /// Longest acquisition when the accidental floor is still unresolved.
    pub max_duration_s: f64,
    /// Acquisitions are simulated in pieces of this length.
    pub segment_s: f64,
    pub powers_mw: Vec<f64>,
    pub seed: u64,
    pub bin_width_ps: f64,
    pub window_ns: f64,
    pub pair_window_ns: f64,
    pub max_delay_ns: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            duration_s: 600.0,
            max_duration_s: 10800.0,
            segment_s: 60.0,
            powers_mw: DEFAULT_POWERS_MW.to_vec(),
            seed: 1,
            bin_width_ps: 100.0,
            window_ns: 4.0,
            pair_window_ns: 20.0,
            max_delay_ns: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FransonSection {
    pub path_delay_ns: f64,
    pub intrinsic_visibility: f64,
    pub splitter_ratio: f64,
    pub phase_noise_rad: f64,
    /// Sweep start and end in units of π.
    pub phase_start_pi: f64,
    pub phase_stop_pi: f64,
    pub phase_points: usize,
    /// On-chip pair rate during the sweep.
    pub pgr_hz: f64,
    /// Integration time per phase.
    pub duration_s: f64,
}

impl Default for FransonSection {
    fn default() -> Self {
        let f = FransonConfig::default();
        Self {
            path_delay_ns: f.path_delay * 1e9,
            intrinsic_visibility: DEFAULT_INTRINSIC_VISIBILITY,
            splitter_ratio: f.splitter_ratio,
            phase_noise_rad: 2.0 * PI / 100.0,
            phase_start_pi: 0.4,
            phase_stop_pi: 1.4,
            phase_points: 21,
            pgr_hz: 1e6,
            duration_s: 600.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct G2hSection {
    pub pgr_hz: f64,
    /// Total integration time; 300 minutes by default.
    pub duration_s: f64,
    /// Fraction of idlers sent to detector B.
    pub splitter_ratio: f64,
    pub window_ns: f64,
}

impl Default for G2hSection {
    fn default() -> Self {
        Self { pgr_hz: 1e6, duration_s: 18000.0, splitter_ratio: 0.5, window_ns: 4.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    #[default]
    Kv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub directory: String,
    pub format: Format,
    /// Seconds of each acquisition written to time-tag files; 0 disables them.
    pub timetag_seconds: f64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { directory: "out".into(), format: Format::Kv, timetag_seconds: 1.0 }
    }
}

impl ExperimentConfig {
    /// The device of the default scenario with every other section at its default.
    pub fn reference() -> Self {
        let spec = ResonatorSpec::reference_device();
        Self {
            resonator: ResonatorSection {
                radius_um: in_units(spec.radius, 1e-6),
                q_loaded: spec.q_loaded,
                pump_wavelength_nm: in_units(spec.pump_wavelength, 1e-9),
                gamma_per_w_per_m: spec.gamma_eff,
                group_index: spec.group_index,
                extinction_depth: spec.extinction_depth,
            },
            chain: ChainsSection::default(),
            run: RunSection::default(),
            franson: FransonSection::default(),
            g2h: G2hSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn spec(&self) -> ResonatorSpec {
        let r = &self.resonator;
        ResonatorSpec {
            radius: r.radius_um / 1e6,
            q_loaded: r.q_loaded,
            gamma_eff: r.gamma_per_w_per_m,
            group_index: r.group_index,
            pump_wavelength: r.pump_wavelength_nm / 1e9,
            extinction_depth: r.extinction_depth,
        }
    }

    /// Simulation settings at `pump_power` [W] for the configured run length.
    pub fn sim(&self, pump_power: f64) -> SimConfig {
        let spec = self.spec();
        SimConfig {
            spec,
            pump_power,
            duration: self.run.duration_s,
            correlation_time: spec.cavity_lifetime(),
            signal_chain: self.chain.signal.to_chain(),
            idler_chain: self.chain.idler.to_chain(),
            third_chain: self.chain.third.to_chain(),
            rng_seed: self.run.seed,
        }
    }

    /// Simulation settings at the pump power giving an on-chip pair rate.
    pub fn sim_at_pgr(&self, pgr: f64) -> Result<SimConfig, CliError> {
        let p = pump_for_pgr(&self.spec(), pgr).map_err(config_error)?;
        Ok(self.sim(p))
    }

    pub fn franson(&self) -> FransonConfig {
        let f = &self.franson;
        FransonConfig {
            path_delay: f.path_delay_ns / 1e9,
            phase: 0.0,
            intrinsic_visibility: f.intrinsic_visibility,
            splitter_ratio: f.splitter_ratio,
            phase_noise_sigma: f.phase_noise_rad,
            window: self.run.window_ns / 1e9,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.spec().validate().map_err(config_error)?;
        for c in [&self.chain.signal, &self.chain.idler, &self.chain.third] {
            c.to_chain().validate().map_err(config_error)?;
        }
        let run = &self.run;
        let positive = [
            ("run.duration_s", run.duration_s),
            ("run.max_duration_s", run.max_duration_s),
            ("run.segment_s", run.segment_s),
            ("run.bin_width_ps", run.bin_width_ps),
            ("run.window_ns", run.window_ns),
            ("run.pair_window_ns", run.pair_window_ns),
            ("run.max_delay_ns", run.max_delay_ns),
            ("franson.pgr_hz", self.franson.pgr_hz),
            ("franson.duration_s", self.franson.duration_s),
            ("g2h.window_ns", self.g2h.window_ns),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(CliError::Config(format!("`{name}` must be positive, got {v}")));
            }
        }
        if run.max_duration_s < run.duration_s {
            return Err(CliError::Config("`run.max_duration_s` is shorter than `run.duration_s`".into()));
        }
        if run.seed > i64::MAX as u64 {
            return Err(CliError::Config("`run.seed` must fit in a signed 64-bit integer".into()));
        }
        if let Some(p) = run.powers_mw.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(CliError::Config(format!("`run.powers_mw` contains {p}")));
        }
        if !(self.g2h.pgr_hz >= 0.0) || !(self.g2h.duration_s >= 0.0) {
            return Err(CliError::Config("`g2h.pgr_hz` and `g2h.duration_s` must be non-negative".into()));
        }
        if !(self.g2h.splitter_ratio > 0.0 && self.g2h.splitter_ratio < 1.0) {
            return Err(CliError::Config("`g2h.splitter_ratio` must lie in (0, 1)".into()));
        }
        if !(self.output.timetag_seconds >= 0.0) {
            return Err(CliError::Config("`output.timetag_seconds` must be non-negative".into()));
        }
        self.franson().validate().map_err(config_error)?;
        if self.franson.phase_points < 5 {
            return Err(CliError::Config("`franson.phase_points` must be at least 5".into()));
        }
        Ok(())
    }
}

/// `x / unit`, rounded to 12 significant digits so decimal inputs survive.
fn in_units(x: f64, unit: f64) -> f64 {
    format!("{:.11e}", x / unit).parse().expect("formatted float")
}

fn config_error(e: ringpair::Error) -> CliError {
    CliError::Config(e.to_string())
}
