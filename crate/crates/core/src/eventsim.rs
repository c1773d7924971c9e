//! Monte Carlo generation of detector time-tag streams.
//!
//! Pairs are emitted as a homogeneous Poisson process at the rate predicted by
//! [`crate::resonator::pgr_from_pump`]. Each photon leaves the cavity after an
//! independent exponential delay with the cavity lifetime, so the signal–idler
//! delay is double-sided exponential. Every photon then passes a
//! [`DetectionChain`]: Bernoulli survival with the chain efficiency, Gaussian
//! jitter plus a fixed propagation delay, merge with Poissonian background,
//! and non-paralyzable dead-time censoring.
//!
//! The end-to-end simulators draw only the pairs that lead to at least one
//! detection. Thinning a Poisson process by an independent per-event survival
//! test gives again a Poisson process, so this is statistically identical to
//! generating all pairs and discarding the undetected ones, at a small fraction
//! of the cost.

use rand::Rng;
use rand_distr::{Distribution, Exp, Exp1, Normal, Poisson};

use crate::error::{check_fraction, check_non_negative, check_positive, Error, Result};
use crate::resonator::{pgr_from_pump, ResonatorSpec};
use crate::rng::{self, SimRng};

pub const SIGNAL_CHANNEL: u8 = 0;
pub const IDLER_CHANNEL: u8 = 1;
pub const THIRD_CHANNEL: u8 = 2;

/// Label used for tags that do not come from a pair photon.
pub const NO_PAIR: u64 = u64::MAX;

/// Gaussian σ giving a ≈40 ps FWHM timing jitter.
pub const DEFAULT_JITTER_SIGMA: f64 = 17e-12;
pub const DEFAULT_DEAD_TIME: f64 = 50e-9;
pub const DEFAULT_DARK_RATE: f64 = 100.0;
pub const DEFAULT_DETECTOR_EFFICIENCY: f64 = 0.9;

#[inline]
pub fn seconds_to_ps(t: f64) -> i64 {
    (t * 1e12).round() as i64
}

#[inline]
pub fn ps_to_seconds(t: i64) -> f64 {
    t as f64 * 1e-12
}

/// Loss budget and detector model of one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionChain {
    /// Filters, splitters and fiber after the chip [dB].
    pub path_loss_db: f64,
    /// Chip-to-fiber coupling at the output facet [dB].
    pub facet_loss_db: f64,
    pub detector_efficiency: f64,
    /// Detector dark counts [s⁻¹].
    pub dark_rate: f64,
    /// Gaussian timing jitter σ [s].
    pub jitter_sigma: f64,
    /// Non-paralyzable dead time [s].
    pub dead_time: f64,
    /// Fixed propagation delay added to every photon [s].
    pub fixed_delay: f64,
    /// Residual pump photons reaching the detector, per watt of pump [s⁻¹ W⁻¹].
    pub pump_leak_per_watt: f64,
}

impl Default for DetectionChain {
    fn default() -> Self {
        Self {
            path_loss_db: 0.0,
            facet_loss_db: 0.0,
            detector_efficiency: DEFAULT_DETECTOR_EFFICIENCY,
            dark_rate: DEFAULT_DARK_RATE,
            jitter_sigma: DEFAULT_JITTER_SIGMA,
            dead_time: DEFAULT_DEAD_TIME,
            fixed_delay: 0.0,
            pump_leak_per_watt: 0.0,
        }
    }
}

impl DetectionChain {
    /// Signal arm: 13.6 dB of filtering and splitting plus a 5 dB facet.
    pub fn reference_signal() -> Self {
        Self { path_loss_db: 13.6, facet_loss_db: 5.0, ..Self::default() }
    }

    /// Idler arm: 19.4 dB of filtering and splitting plus a 5 dB facet.
    pub fn reference_idler() -> Self {
        Self { path_loss_db: 19.4, facet_loss_db: 5.0, ..Self::default() }
    }

    /// Lossless, noiseless, jitter-free detector.
    pub fn ideal() -> Self {
        Self {
            path_loss_db: 0.0,
            facet_loss_db: 0.0,
            detector_efficiency: 1.0,
            dark_rate: 0.0,
            jitter_sigma: 0.0,
            dead_time: 0.0,
            fixed_delay: 0.0,
            pump_leak_per_watt: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_non_negative("path_loss_db", self.path_loss_db)?;
        check_non_negative("facet_loss_db", self.facet_loss_db)?;
        check_fraction("detector_efficiency", self.detector_efficiency, true)?;
        check_non_negative("dark_rate", self.dark_rate)?;
        check_non_negative("jitter_sigma", self.jitter_sigma)?;
        check_non_negative("dead_time", self.dead_time)?;
        crate::error::check_finite("fixed_delay", self.fixed_delay)?;
        check_non_negative("pump_leak_per_watt", self.pump_leak_per_watt)?;
        if self.efficiency() <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "path_loss_db",
                reason: "total survival probability underflows to zero".into(),
            });
        }
        Ok(())
    }

    /// Survival probability η from the chip to a registered click.
    pub fn efficiency(&self) -> f64 {
        self.detector_efficiency * 10f64.powf(-(self.path_loss_db + self.facet_loss_db) / 10.0)
    }

    /// Uncorrelated click rate at the given on-chip pump power [s⁻¹].
    pub fn background_rate(&self, pump_power: f64) -> f64 {
        self.dark_rate + self.pump_leak_per_watt * pump_power
    }
}

/// Time-ordered clicks of one detector, in integer picoseconds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeTagStream {
    pub channel: u8,
    timestamps: Vec<i64>,
    duration_ps: i64,
}

impl TimeTagStream {
    pub fn new(channel: u8, timestamps: Vec<i64>, duration: f64) -> Result<Self> {
        check_non_negative("duration", duration)?;
        let duration_ps = seconds_to_ps(duration);
        if timestamps.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidParameter { name: "timestamps", reason: "must be non-decreasing".into() });
        }
        if let (Some(&first), Some(&last)) = (timestamps.first(), timestamps.last()) {
            if first < 0 || last > duration_ps {
                return Err(Error::InvalidParameter {
                    name: "timestamps",
                    reason: format!("must lie in [0, {duration_ps}] ps"),
                });
            }
        }
        Ok(Self { channel, timestamps, duration_ps })
    }

    pub fn empty(channel: u8, duration: f64) -> Self {
        Self { channel, timestamps: Vec::new(), duration_ps: seconds_to_ps(duration) }
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn into_timestamps(self) -> Vec<i64> {
        self.timestamps
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Duration [s].
    pub fn duration(&self) -> f64 {
        ps_to_seconds(self.duration_ps)
    }

    pub fn duration_ps(&self) -> i64 {
        self.duration_ps
    }

    /// Mean click rate over the whole stream [s⁻¹].
    pub fn rate(&self) -> f64 {
        if self.duration_ps == 0 {
            return 0.0;
        }
        self.len() as f64 / self.duration()
    }

    /// Smallest spacing between consecutive tags, if any.
    pub fn min_spacing_ps(&self) -> Option<i64> {
        self.timestamps.windows(2).map(|w| w[1] - w[0]).min()
    }

    /// Sub-stream restricted to `[start, end)` seconds, re-based to start at zero.
    pub fn slice(&self, start: f64, end: f64) -> Self {
        let s = seconds_to_ps(start).max(0);
        let e = seconds_to_ps(end).min(self.duration_ps);
        let ts = self.timestamps.iter().filter(|&&t| t >= s && t < e).map(|&t| t - s).collect();
        Self { channel: self.channel, timestamps: ts, duration_ps: (e - s).max(0) }
    }
}

/// A stream whose tags remember which pair (if any) produced them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledStream {
    pub stream: TimeTagStream,
    /// One entry per tag; [`NO_PAIR`] for background clicks.
    pub pair_ids: Vec<u64>,
}

impl LabeledStream {
    pub fn pair_id(&self, i: usize) -> Option<u64> {
        match self.pair_ids[i] {
            NO_PAIR => None,
            id => Some(id),
        }
    }
}

/// A photon on its way to a detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Photon {
    /// [s]
    pub time: f64,
    pub pair: u64,
}

/// Parameters of one simulated acquisition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub spec: ResonatorSpec,
    /// On-chip pump power [W].
    pub pump_power: f64,
    /// [s]
    pub duration: f64,
    /// Decay constant of the signal–idler delay distribution [s].
    pub correlation_time: f64,
    pub signal_chain: DetectionChain,
    pub idler_chain: DetectionChain,
    /// Detector on the second output of the idler splitter (three-detector runs).
    pub third_chain: DetectionChain,
    pub rng_seed: u64,
}

impl SimConfig {
    /// Default device and chains at the given pump power, 600 s acquisition,
    /// correlation time equal to the cavity lifetime.
    pub fn reference(pump_power: f64) -> Self {
        let spec = ResonatorSpec::reference_device();
        Self {
            spec,
            pump_power,
            duration: 600.0,
            correlation_time: spec.cavity_lifetime(),
            signal_chain: DetectionChain::reference_signal(),
            idler_chain: DetectionChain::reference_idler(),
            third_chain: DetectionChain::reference_idler(),
            rng_seed: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        check_non_negative("pump_power", self.pump_power)?;
        check_positive("duration", self.duration)?;
        check_positive("correlation_time", self.correlation_time)?;
        self.signal_chain.validate()?;
        self.idler_chain.validate()?;
        self.third_chain.validate()?;
        Ok(())
    }

    /// Pair generation rate implied by the resonator and pump [s⁻¹].
    pub fn pair_rate(&self) -> Result<f64> {
        pgr_from_pump(&self.spec, self.pump_power)
    }

    /// Split the acquisition into consecutive runs of at most `length` seconds,
    /// each with its own derived seed. Coincidences straddling a boundary are
    /// lost, a fraction of order `max_delay / length`.
    pub fn segments(&self, length: f64) -> Result<Vec<SimConfig>> {
        check_positive("length", length)?;
        let n = (self.duration / length).ceil().max(1.0) as u64;
        Ok((0..n)
            .map(|k| {
                let mut c = *self;
                c.duration = (self.duration - k as f64 * length).min(length);
                c.rng_seed = rng::derive_seed(self.rng_seed, k);
                c
            })
            .collect())
    }
}

/// Emission times of a homogeneous Poisson process on `[0, duration)`.
pub fn generate_pair_times<R: Rng + ?Sized>(rate: f64, duration: f64, rng: &mut R) -> Result<Vec<f64>> {
    check_non_negative("rate", rate)?;
    check_non_negative("duration", duration)?;
    let mut out = Vec::new();
    if rate == 0.0 || duration == 0.0 {
        return Ok(out);
    }
    out.reserve((rate * duration * 1.01) as usize + 16);
    let gap = Exp::new(rate).expect("positive rate");
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t >= duration {
            break;
        }
        out.push(t);
    }
    Ok(out)
}

/// Signal and idler exit times for a pair born at `emission_time`.
///
/// Each photon leaks out after an independent exponential delay with mean
/// `correlation_time`; their difference is double-sided exponential with the
/// same decay constant.
pub fn pair_to_photons<R: Rng + ?Sized>(emission_time: f64, correlation_time: f64, rng: &mut R) -> (f64, f64) {
    let a: f64 = Exp1.sample(rng);
    let b: f64 = Exp1.sample(rng);
    (emission_time + correlation_time * a, emission_time + correlation_time * b)
}

/// Full chain: Bernoulli thinning, jitter, dark counts, dead time.
pub fn apply_chain<R: Rng + ?Sized>(
    photon_times: &[f64],
    chain: &DetectionChain,
    duration: f64,
    rng: &mut R,
) -> Result<TimeTagStream> {
    chain.validate()?;
    check_non_negative("duration", duration)?;
    let eta = chain.efficiency();
    let survivors: Vec<Photon> =
        photon_times.iter().filter(|_| rng.gen::<f64>() < eta).map(|&time| Photon { time, pair: NO_PAIR }).collect();
    Ok(detect(survivors, chain, chain.dark_rate, 0, duration, rng).stream)
}

/// Detector stage for photons that already survived the loss budget.
pub(crate) fn detect<R: Rng + ?Sized>(
    mut photons: Vec<Photon>,
    chain: &DetectionChain,
    background_rate: f64,
    channel: u8,
    duration: f64,
    rng: &mut R,
) -> LabeledStream {
    let duration_ps = seconds_to_ps(duration);
    if chain.jitter_sigma > 0.0 {
        let jitter = Normal::new(0.0, chain.jitter_sigma).expect("finite sigma");
        for p in &mut photons {
            p.time += jitter.sample(rng);
        }
    }
    let mut tags: Vec<(i64, u64)> = photons
        .iter()
        .map(|p| (seconds_to_ps(p.time + chain.fixed_delay), p.pair))
        .filter(|&(t, _)| t >= 0 && t <= duration_ps)
        .collect();

    if background_rate > 0.0 && duration > 0.0 {
        let n = Poisson::new(background_rate * duration).map(|d| d.sample(rng) as usize).unwrap_or(0);
        tags.reserve(n);
        for _ in 0..n {
            let t = rng.gen::<f64>() * duration;
            tags.push((seconds_to_ps(t), NO_PAIR));
        }
    }
    tags.sort_by_key(|&(t, _)| t);

    let dead_ps = seconds_to_ps(chain.dead_time);
    let mut timestamps = Vec::with_capacity(tags.len());
    let mut pair_ids = Vec::with_capacity(tags.len());
    let mut last: Option<i64> = None;
    for (t, id) in tags {
        if let Some(prev) = last {
            if dead_ps > 0 && t - prev < dead_ps {
                continue;
            }
        }
        timestamps.push(t);
        pair_ids.push(id);
        last = Some(t);
    }
    LabeledStream { stream: TimeTagStream { channel, timestamps, duration_ps }, pair_ids }
}

/// Photons from pairs that reach at least one detector.
pub(crate) struct DetectablePairs {
    pub signal: Vec<Photon>,
    /// One list per idler destination.
    pub idlers: Vec<Vec<Photon>>,
}

/// Draw only the pairs with at least one detected photon.
///
/// `eta_signal` is the signal survival probability; `idler_routes[k]` the
/// probability that the idler ends up registered on destination `k` (the
/// routes are mutually exclusive). `shape` may move the two photon times of a
/// pair before loss is applied; it sees the pair id.
pub(crate) fn detectable_pairs<F>(
    pair_rate: f64,
    duration: f64,
    correlation_time: f64,
    eta_signal: f64,
    idler_routes: &[f64],
    rng: &mut SimRng,
    mut shape: F,
) -> DetectablePairs
where
    F: FnMut(u64, &mut f64, &mut f64, &mut SimRng),
{
    let p_idler: f64 = idler_routes.iter().sum();
    // joint outcomes (signal detected?, idler route or None), excluding (false, None)
    let mut outcomes: Vec<(bool, Option<usize>, f64)> = Vec::new();
    outcomes.push((true, None, eta_signal * (1.0 - p_idler)));
    for (k, &p) in idler_routes.iter().enumerate() {
        outcomes.push((true, Some(k), eta_signal * p));
        outcomes.push((false, Some(k), (1.0 - eta_signal) * p));
    }
    let p_any: f64 = outcomes.iter().map(|o| o.2).sum();
    let mut cumulative = Vec::with_capacity(outcomes.len());
    let mut acc = 0.0;
    for o in &outcomes {
        acc += o.2 / p_any;
        cumulative.push(acc);
    }

    let mut out = DetectablePairs { signal: Vec::new(), idlers: vec![Vec::new(); idler_routes.len()] };
    let rate = pair_rate * p_any;
    if !(rate > 0.0) || duration <= 0.0 {
        return out;
    }
    let expected = rate * duration;
    out.signal.reserve((expected * 1.01) as usize);
    let gap = Exp::new(rate).expect("positive rate");
    let mut t = 0.0;
    let mut id: u64 = 0;
    loop {
        t += gap.sample(rng);
        if t >= duration {
            break;
        }
        let u: f64 = rng.gen();
        let k = cumulative.iter().position(|&c| u < c).unwrap_or(outcomes.len() - 1);
        let (sig, idl, _) = outcomes[k];
        let (mut ts, mut ti) = pair_to_photons(t, correlation_time, rng);
        shape(id, &mut ts, &mut ti, rng);
        if sig {
            out.signal.push(Photon { time: ts, pair: id });
        }
        if let Some(route) = idl {
            out.idlers[route].push(Photon { time: ti, pair: id });
        }
        id += 1;
    }
    out
}

/// Labeled signal and idler streams for a two-detector acquisition.
pub fn simulate_two_channel_labeled(config: &SimConfig) -> Result<(LabeledStream, LabeledStream)> {
    simulate_two_channel_shaped(config, |_, _, _, _| {})
}

pub(crate) fn simulate_two_channel_shaped<F>(config: &SimConfig, shape: F) -> Result<(LabeledStream, LabeledStream)>
where
    F: FnMut(u64, &mut f64, &mut f64, &mut SimRng),
{
    config.validate()?;
    let rate = config.pair_rate()?;
    let mut pair_rng = rng::seeded(config.rng_seed, 0);
    let pairs = detectable_pairs(
        rate,
        config.duration,
        config.correlation_time,
        config.signal_chain.efficiency(),
        &[config.idler_chain.efficiency()],
        &mut pair_rng,
        shape,
    );
    let mut idlers = pairs.idlers;
    let signal = detect(
        pairs.signal,
        &config.signal_chain,
        config.signal_chain.background_rate(config.pump_power),
        SIGNAL_CHANNEL,
        config.duration,
        &mut rng::seeded(config.rng_seed, 1),
    );
    let idler = detect(
        idlers.pop().unwrap_or_default(),
        &config.idler_chain,
        config.idler_chain.background_rate(config.pump_power),
        IDLER_CHANNEL,
        config.duration,
        &mut rng::seeded(config.rng_seed, 2),
    );
    Ok((signal, idler))
}

/// Signal (channel 0) and idler (channel 1) streams on a shared clock.
pub fn simulate_two_channel(config: &SimConfig) -> Result<(TimeTagStream, TimeTagStream)> {
    let (s, i) = simulate_two_channel_labeled(config)?;
    Ok((s.stream, i.stream))
}

/// Herald, idler-B and idler-C streams with pair labels.
///
/// Each idler is sent to B with probability `splitter_ratio`, otherwise to C,
/// and then through that detector's chain (`idler_chain` for B,
/// `third_chain` for C).
pub fn simulate_three_channel_labeled(
    config: &SimConfig,
    splitter_ratio: f64,
) -> Result<(LabeledStream, LabeledStream, LabeledStream)> {
    config.validate()?;
    check_fraction("splitter_ratio", splitter_ratio, true)?;
    if splitter_ratio >= 1.0 {
        return Err(Error::InvalidParameter { name: "splitter_ratio", reason: "must lie in (0, 1)".into() });
    }
    let rate = config.pair_rate()?;
    let mut pair_rng = rng::seeded(config.rng_seed, 0);
    let routes =
        [splitter_ratio * config.idler_chain.efficiency(), (1.0 - splitter_ratio) * config.third_chain.efficiency()];
    let pairs = detectable_pairs(
        rate,
        config.duration,
        config.correlation_time,
        config.signal_chain.efficiency(),
        &routes,
        &mut pair_rng,
        |_, _, _, _| {},
    );
    let mut idlers = pairs.idlers.into_iter();
    let b_photons = idlers.next().unwrap_or_default();
    let c_photons = idlers.next().unwrap_or_default();
    let herald = detect(
        pairs.signal,
        &config.signal_chain,
        config.signal_chain.background_rate(config.pump_power),
        SIGNAL_CHANNEL,
        config.duration,
        &mut rng::seeded(config.rng_seed, 1),
    );
    let b = detect(
        b_photons,
        &config.idler_chain,
        config.idler_chain.background_rate(config.pump_power),
        IDLER_CHANNEL,
        config.duration,
        &mut rng::seeded(config.rng_seed, 2),
    );
    let c = detect(
        c_photons,
        &config.third_chain,
        config.third_chain.background_rate(config.pump_power),
        THIRD_CHANNEL,
        config.duration,
        &mut rng::seeded(config.rng_seed, 3),
    );
    Ok((herald, b, c))
}

pub fn simulate_three_channel(
    config: &SimConfig,
    splitter_ratio: f64,
) -> Result<(TimeTagStream, TimeTagStream, TimeTagStream)> {
    let (a, b, c) = simulate_three_channel_labeled(config, splitter_ratio)?;
    Ok((a.stream, b.stream, c.stream))
}
