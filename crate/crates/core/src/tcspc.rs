//! Coincidence analysis on time-tag streams.
//!
//! Histograms are built from the all-pairs cross-correlation of two streams by
//! default; a start–stop mode that keeps only the first stop per start is
//! available to mimic hardware TCSPC modules. Bin `k` is centred on
//! `k·bin_width` and covers `[k·bw − bw/2, k·bw + bw/2)`.

use std::fmt::Write as _;

use crate::error::{check_fraction, check_non_negative, check_positive, Error, Result};
use crate::eventsim::{seconds_to_ps, LabeledStream, TimeTagStream};

pub const DEFAULT_BIN_WIDTH: f64 = 100e-12;
pub const DEFAULT_WINDOW: f64 = 4e-9;
/// Histogram half-range leaving room for the accidental sample [s].
pub const DEFAULT_MAX_DELAY: f64 = 500e-9;
/// Window that captures essentially every pair for rate inference [s].
pub const DEFAULT_PAIR_WINDOW: f64 = 20e-9;
/// Accidentals are sampled at least this many windows away from any peak.
pub const DEFAULT_BACKGROUND_OFFSET: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HistogramMode {
    #[default]
    AllPairs,
    /// Each start contributes at most one stop: the earliest one in range.
    StartStop,
}

/// Binned inter-channel delays.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceHistogram {
    bin_width_ps: i64,
    first_bin: i64,
    counts: Vec<u64>,
    /// Number of start (stream A) tags.
    pub total_trigger_count: u64,
    /// Acquisition time [s].
    pub integration_time: f64,
}

impl CoincidenceHistogram {
    /// Bin width [s].
    pub fn bin_width(&self) -> f64 {
        self.bin_width_ps as f64 * 1e-12
    }

    pub fn bin_width_ps(&self) -> i64 {
        self.bin_width_ps
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    /// Bin centre [ps] of bin `i`.
    pub fn delay_ps(&self, i: usize) -> i64 {
        (self.first_bin + i as i64) * self.bin_width_ps
    }

    /// Bin centres [s].
    pub fn delays(&self) -> Vec<f64> {
        (0..self.counts.len()).map(|i| self.delay_ps(i) as f64 * 1e-12).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the (first) highest bin.
    pub fn peak_index(&self) -> Option<usize> {
        let max = *self.counts.iter().max()?;
        self.counts.iter().position(|&c| c == max)
    }

    /// Delay [s] of the highest bin.
    pub fn peak_delay(&self) -> Option<f64> {
        self.peak_index().map(|i| self.delay_ps(i) as f64 * 1e-12)
    }

    /// Sum of counts over bins whose centre lies in `[lo, hi]` seconds.
    pub fn sum_between(&self, lo: f64, hi: f64) -> u64 {
        let (lo, hi) = (seconds_to_ps(lo), seconds_to_ps(hi));
        (0..self.counts.len()).filter(|&i| (lo..=hi).contains(&self.delay_ps(i))).map(|i| self.counts[i]).sum()
    }

    /// Full width at half maximum of the peak above `baseline` counts per bin [s],
    /// linearly interpolated between bins.
    pub fn peak_fwhm(&self, baseline: f64) -> Option<f64> {
        let p = self.peak_index()?;
        let peak = self.counts[p] as f64 - baseline;
        if peak <= 0.0 {
            return None;
        }
        let half = baseline + peak / 2.0;
        let c = |i: usize| self.counts[i] as f64;
        let mut right = None;
        for i in p + 1..self.counts.len() {
            if c(i) < half {
                let frac = (c(i - 1) - half) / (c(i - 1) - c(i));
                right = Some((i - 1) as f64 + frac);
                break;
            }
        }
        let mut left = None;
        for i in (0..p).rev() {
            if c(i) < half {
                let frac = (c(i + 1) - half) / (c(i + 1) - c(i));
                left = Some((i + 1) as f64 - frac);
                break;
            }
        }
        Some((right? - left?) * self.bin_width())
    }

    /// `delay_ps,counts` text.
    /// Add the counts of a histogram with the same binning, e.g. from another
    /// segment of one acquisition.
    pub fn merge(&mut self, other: &CoincidenceHistogram) -> Result<()> {
        if other.bin_width_ps != self.bin_width_ps
            || other.first_bin != self.first_bin
            || other.counts.len() != self.counts.len()
        {
            return Err(Error::InvalidParameter { name: "histogram", reason: "binning differs".into() });
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total_trigger_count += other.total_trigger_count;
        self.integration_time += other.integration_time;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("delay_ps,counts\n");
        for (i, c) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{}", self.delay_ps(i), c);
        }
        out
    }
}

fn bin_index(delay: i64, bw: i64) -> i64 {
    (2 * delay + bw).div_euclid(2 * bw)
}

fn histogram_core<S>(
    a: &[i64],
    b: &[i64],
    bin_width: f64,
    max_delay: f64,
    mode: HistogramMode,
    mut skip: S,
) -> Result<(i64, i64, Vec<u64>)>
where
    S: FnMut(usize, usize) -> bool,
{
    check_positive("bin_width", bin_width)?;
    check_non_negative("max_delay", max_delay)?;
    let bw = seconds_to_ps(bin_width);
    if bw < 1 {
        return Err(Error::InvalidParameter { name: "bin_width", reason: "must be at least 1 ps".into() });
    }
    if max_delay < bin_width {
        return Err(Error::InvalidParameter {
            name: "max_delay",
            reason: format!("must be at least bin_width ({bin_width:e} s)"),
        });
    }
    let max = seconds_to_ps(max_delay);
    let first = bin_index(-max, bw);
    let last = bin_index(max, bw);
    let mut counts = vec![0u64; (last - first + 1) as usize];

    let mut lo = 0usize;
    for (ia, &t) in a.iter().enumerate() {
        while lo < b.len() && b[lo] < t - max {
            lo += 1;
        }
        let mut j = lo;
        while j < b.len() && b[j] <= t + max {
            if !skip(ia, j) {
                counts[(bin_index(b[j] - t, bw) - first) as usize] += 1;
                if mode == HistogramMode::StartStop {
                    break;
                }
            }
            j += 1;
        }
    }
    Ok((bw, first, counts))
}

/// All-pairs histogram of `b − a` delays within `±max_delay`.
pub fn build_histogram(
    a: &TimeTagStream,
    b: &TimeTagStream,
    bin_width: f64,
    max_delay: f64,
) -> Result<CoincidenceHistogram> {
    build_histogram_with_mode(a, b, bin_width, max_delay, HistogramMode::AllPairs)
}

pub fn build_histogram_with_mode(
    a: &TimeTagStream,
    b: &TimeTagStream,
    bin_width: f64,
    max_delay: f64,
    mode: HistogramMode,
) -> Result<CoincidenceHistogram> {
    let (bin_width_ps, first_bin, counts) =
        histogram_core(a.timestamps(), b.timestamps(), bin_width, max_delay, mode, |_, _| false)?;
    Ok(CoincidenceHistogram {
        bin_width_ps,
        first_bin,
        counts,
        total_trigger_count: a.len() as u64,
        integration_time: a.duration(),
    })
}

/// All-pairs histogram that leaves out tag pairs coming from the same photon
/// pair when `suppressed(pair_id)` is true.
pub fn build_histogram_labeled<F>(
    a: &LabeledStream,
    b: &LabeledStream,
    bin_width: f64,
    max_delay: f64,
    suppressed: F,
) -> Result<CoincidenceHistogram>
where
    F: Fn(u64) -> bool,
{
    let ids_a = &a.pair_ids;
    let ids_b = &b.pair_ids;
    let (bin_width_ps, first_bin, counts) = histogram_core(
        a.stream.timestamps(),
        b.stream.timestamps(),
        bin_width,
        max_delay,
        HistogramMode::AllPairs,
        |i, j| {
            let id = ids_a[i];
            id != crate::eventsim::NO_PAIR && id == ids_b[j] && suppressed(id)
        },
    )?;
    Ok(CoincidenceHistogram {
        bin_width_ps,
        first_bin,
        counts,
        total_trigger_count: a.stream.len() as u64,
        integration_time: a.stream.duration(),
    })
}

/// How to read coincidences and accidentals off a histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryOptions {
    /// Coincidence window width [s].
    pub window: f64,
    /// Window centre [s]; `None` centres on the highest bin.
    pub center: Option<f64>,
    /// Other peak positions [s] kept out of the accidental sample.
    pub other_peaks: Vec<f64>,
    /// Accidental bins lie more than this many windows from every peak.
    pub background_offset: f64,
}

impl SummaryOptions {
    pub fn new(window: f64) -> Self {
        Self { window, center: None, other_peaks: Vec::new(), background_offset: DEFAULT_BACKGROUND_OFFSET }
    }

    pub fn centered_at(mut self, center: f64) -> Self {
        self.center = Some(center);
        self
    }

    pub fn excluding(mut self, peaks: &[f64]) -> Self {
        self.other_peaks.extend_from_slice(peaks);
        self
    }
}

/// Coincidences, accidentals and CAR within one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoincidenceSummary {
    /// Raw in-window counts.
    pub raw_coincidences: f64,
    /// Raw minus the accidental estimate.
    pub true_coincidences: f64,
    /// Expected accidentals within one window.
    pub accidentals_in_window: f64,
    /// Window [s].
    pub window: f64,
    /// Window centre [s].
    pub center: f64,
    /// Raw in-window counts over accidentals.
    pub car: f64,
    pub integration_time: f64,
    /// Number of histogram bins used for the accidental estimate.
    pub background_bins: usize,
    /// Counts in those bins.
    pub background_counts: u64,
}

impl CoincidenceSummary {
    /// Poisson standard error of the CAR from the in-window and background counts.
    pub fn car_sigma(&self) -> f64 {
        if self.raw_coincidences <= 0.0 || self.background_counts == 0 {
            return f64::INFINITY;
        }
        self.car * (1.0 / self.raw_coincidences + 1.0 / self.background_counts as f64).sqrt()
    }
}

fn overlap(lo_a: f64, hi_a: f64, lo_b: f64, hi_b: f64) -> f64 {
    (hi_a.min(hi_b) - lo_a.max(lo_b)).max(0.0)
}

struct Regions {
    raw: f64,
    bins_per_window: f64,
    background: Vec<u64>,
    center_ps: f64,
}

fn regions(hist: &CoincidenceHistogram, opts: &SummaryOptions) -> Result<Regions> {
    check_positive("window", opts.window)?;
    check_non_negative("background_offset", opts.background_offset)?;
    if opts.window < hist.bin_width() * (1.0 - 1e-9) {
        return Err(Error::InvalidParameter { name: "window", reason: "must be at least one bin wide".into() });
    }
    let center = match opts.center {
        Some(c) => c,
        None => hist.peak_delay().ok_or(Error::EmptyInput("histogram"))?,
    };
    let bw = hist.bin_width_ps as f64;
    let w = opts.window * 1e12;
    let c = center * 1e12;
    let reach = opts.background_offset * w;
    let peaks: Vec<f64> = std::iter::once(c).chain(opts.other_peaks.iter().map(|p| p * 1e12)).collect();

    let mut raw = 0.0;
    let mut background = Vec::new();
    for (i, &n) in hist.counts.iter().enumerate() {
        let d = hist.delay_ps(i) as f64;
        raw += n as f64 * overlap(d - bw / 2.0, d + bw / 2.0, c - w / 2.0, c + w / 2.0) / bw;
        if peaks.iter().all(|&p| (d - p).abs() > reach) {
            background.push(n);
        }
    }
    Ok(Regions { raw, bins_per_window: w / bw, background, center_ps: c })
}

/// Summary with the window centred on the histogram peak.
pub fn summarize(hist: &CoincidenceHistogram, window: f64) -> Result<CoincidenceSummary> {
    summarize_with(hist, &SummaryOptions::new(window))
}

pub fn summarize_with(hist: &CoincidenceHistogram, opts: &SummaryOptions) -> Result<CoincidenceSummary> {
    let r = regions(hist, opts)?;
    let bg_total: u64 = r.background.iter().sum();
    if r.background.is_empty() || bg_total == 0 {
        return Err(Error::InsufficientAccidentals);
    }
    let mean = bg_total as f64 / r.background.len() as f64;
    let acc = mean * r.bins_per_window;
    Ok(CoincidenceSummary {
        raw_coincidences: r.raw,
        true_coincidences: r.raw - acc,
        accidentals_in_window: acc,
        window: opts.window,
        center: r.center_ps * 1e-12,
        car: r.raw / acc,
        integration_time: hist.integration_time,
        background_bins: r.background.len(),
        background_counts: bg_total,
    })
}

/// True once the mean accidental count per bin exceeds its standard deviation
/// across bins, the stopping rule for extending low-power acquisitions.
pub fn accidentals_resolved(hist: &CoincidenceHistogram, opts: &SummaryOptions) -> Result<bool> {
    let r = regions(hist, opts)?;
    if r.background.len() < 2 {
        return Ok(false);
    }
    let n = r.background.len() as f64;
    let mean = r.background.iter().sum::<u64>() as f64 / n;
    let var = r.background.iter().map(|&c| (c as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(mean - var.sqrt() > 0.0)
}

/// Background-corrected singles rate, clamped at zero [s⁻¹].
pub fn singles_rate(stream: &TimeTagStream, background_rate: f64) -> Result<f64> {
    check_non_negative("background_rate", background_rate)?;
    Ok((stream.rate() - background_rate).max(0.0))
}

/// Singles rate from a scan that starts off resonance: the mean rate over
/// `off` (seconds, start and end) is the background subtracted from the mean
/// rate over `on`.
pub fn singles_from_scan(stream: &TimeTagStream, off: (f64, f64), on: (f64, f64)) -> Result<f64> {
    let bg = stream.slice(off.0, off.1);
    let sig = stream.slice(on.0, on.1);
    if bg.duration_ps() == 0 || sig.duration_ps() == 0 {
        return Err(Error::InvalidParameter { name: "scan", reason: "segments must have positive length".into() });
    }
    singles_rate(&sig, bg.rate())
}

/// On-chip pair rate from accidental-subtracted coincidences and channel efficiencies.
pub fn infer_onchip_pgr(
    summary: &CoincidenceSummary,
    eta_signal: f64,
    eta_idler: f64,
    integration_time: f64,
) -> Result<f64> {
    check_fraction("eta_signal", eta_signal, true)?;
    check_fraction("eta_idler", eta_idler, true)?;
    check_positive("integration_time", integration_time)?;
    Ok(summary.true_coincidences / (eta_signal * eta_idler * integration_time))
}

/// Herald singles and two- and three-fold coincidence counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ThreefoldCounts {
    pub n_a: u64,
    pub n_ab: u64,
    pub n_ac: u64,
    pub n_abc: u64,
}

impl std::ops::AddAssign for ThreefoldCounts {
    fn add_assign(&mut self, o: Self) {
        self.n_a += o.n_a;
        self.n_ab += o.n_ab;
        self.n_ac += o.n_ac;
        self.n_abc += o.n_abc;
    }
}

/// Count heralds with at least one B click, at least one C click, and both,
/// within `±window/2` of the herald.
pub fn count_threefold(
    herald: &TimeTagStream,
    idler_b: &TimeTagStream,
    idler_c: &TimeTagStream,
    window: f64,
) -> Result<ThreefoldCounts> {
    check_positive("window", window)?;
    let half = seconds_to_ps(window / 2.0);
    let (b, c) = (idler_b.timestamps(), idler_c.timestamps());
    let (mut jb, mut jc) = (0usize, 0usize);
    let mut out = ThreefoldCounts { n_a: herald.len() as u64, ..Default::default() };
    for &t in herald.timestamps() {
        while jb < b.len() && b[jb] < t - half {
            jb += 1;
        }
        while jc < c.len() && c[jc] < t - half {
            jc += 1;
        }
        let hit_b = jb < b.len() && b[jb] <= t + half;
        let hit_c = jc < c.len() && c[jc] <= t + half;
        out.n_ab += hit_b as u64;
        out.n_ac += hit_c as u64;
        out.n_abc += (hit_b && hit_c) as u64;
    }
    Ok(out)
}

/// Heralded autocorrelation `N_ABC·N_A / (N_AB·N_AC)` on raw counts.
pub fn g2_heralded(n_a: u64, n_ab: u64, n_ac: u64, n_abc: u64) -> Result<f64> {
    if n_ab == 0 || n_ac == 0 {
        return Err(Error::InsufficientStatistics(format!("two-fold coincidences N_AB={n_ab}, N_AC={n_ac}")));
    }
    Ok(n_abc as f64 * n_a as f64 / (n_ab as f64 * n_ac as f64))
}

impl ThreefoldCounts {
    pub fn g2(&self) -> Result<f64> {
        g2_heralded(self.n_a, self.n_ab, self.n_ac, self.n_abc)
    }

    /// Poisson standard error of the g² estimate. With no three-fold counts
    /// the one-count level is used.
    pub fn g2_sigma(&self) -> Result<f64> {
        self.g2()?;
        let base = self.n_a as f64 / (self.n_ab as f64 * self.n_ac as f64);
        let n = self.n_abc.max(1) as f64;
        Ok(base * n * (1.0 / n + 1.0 / self.n_ab as f64 + 1.0 / self.n_ac as f64).sqrt())
    }
}
