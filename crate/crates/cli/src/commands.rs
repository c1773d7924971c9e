//! One function per subcommand.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rayon::prelude::*;

use ringpair::eventsim::{simulate_three_channel, simulate_two_channel, SimConfig, TimeTagStream};
use ringpair::fitting::fit_power_law;
use ringpair::franson::{extract_visibility, phase_grid, phase_sweep, sweep_to_csv};
use ringpair::resonator::{brightness, free_spectral_range, linewidth, pgr_from_pump};
use ringpair::rng::derive_seed;
use ringpair::tcspc::{
    accidentals_resolved, build_histogram, count_threefold, infer_onchip_pgr, summarize_with, CoincidenceHistogram,
    SummaryOptions, ThreefoldCounts,
};
use ringpair::timetag::{read_timetags, streams_from_file, write_timetags};

use crate::platforms::{brightness_ratios, isolines_csv, table_csv, table_kv};
use crate::{CliError, Context, Format, Outcome};

/// Rate model figures for the configured resonator and the pump sweep.
pub fn pgr(ctx: &Context) -> Result<Outcome, CliError> {
    let spec = ctx.config.spec();
    let per_mw2 = pgr_from_pump(&spec, 1e-3)?;
    let lw = linewidth(&spec)?;
    let mut out = Outcome::default();
    let r = &mut out.report;
    r.push("gamma_per_w_per_m", spec.gamma_eff);
    r.push("pgr_per_mw2", per_mw2);
    r.push("fwhm_pm", lw.fwhm_wavelength * 1e12);
    r.push("fwhm_mhz", lw.fwhm_frequency / 1e6);
    r.push("fsr_nm", free_spectral_range(&spec)? * 1e9);
    r.push("cavity_lifetime_ps", spec.cavity_lifetime() * 1e12);
    r.push("brightness_per_ghz", brightness(per_mw2, lw.fwhm_frequency)?);

    let mut csv = String::from("power_mw,pgr_pairs_per_s\n");
    for &p in &ctx.config.run.powers_mw {
        let _ = writeln!(csv, "{p},{}", pgr_from_pump(&spec, p / 1e3)?);
    }
    ctx.write(&mut out, "pgr.csv", &csv)?;
    let report = out.report.render(ctx.format);
    ctx.write(&mut out, &ctx.report_name("pgr"), &report)?;
    Ok(out)
}

/// Summed histogram and singles counts of one pump setting.
#[derive(Debug, Clone)]
pub struct Acquisition {
    pub histogram: CoincidenceHistogram,
    pub signal_counts: u64,
    pub idler_counts: u64,
    pub duration: f64,
    /// The first segment's streams, kept for time-tag output.
    pub first: Option<(TimeTagStream, TimeTagStream)>,
}

fn run_segment(
    sim: &SimConfig,
    index: u64,
    length: f64,
    bin_width: f64,
    max_delay: f64,
) -> Result<(CoincidenceHistogram, TimeTagStream, TimeTagStream), CliError> {
    let mut seg = *sim;
    seg.duration = length;
    seg.rng_seed = derive_seed(sim.rng_seed, index);
    let (s, i) = simulate_two_channel(&seg)?;
    let h = build_histogram(&s, &i, bin_width, max_delay)?;
    Ok((h, s, i))
}

/// Simulate `sim` in segments, extending the run (by doubling, up to
/// `max_duration`) until the accidental floor in `window` is resolved.
pub fn acquire(
    sim: &SimConfig,
    segment: f64,
    max_duration: f64,
    opts: &SummaryOptions,
    bin_width: f64,
    max_delay: f64,
    keep_first: bool,
) -> Result<Acquisition, CliError> {
    let mut target = sim.duration;
    let mut acq: Option<Acquisition> = None;
    let mut next = 0u64;
    loop {
        let done = acq.as_ref().map_or(0.0, |a| a.duration);
        let mut lengths = Vec::new();
        let mut t = done;
        while t < target - 1e-9 {
            let len = segment.min(target - t);
            lengths.push((next, len));
            next += 1;
            t += len;
        }
        let parts: Vec<_> = lengths
            .par_iter()
            .map(|&(k, len)| run_segment(sim, k, len, bin_width, max_delay))
            .collect::<Result<_, _>>()?;
        for (h, s, i) in parts {
            match acq.as_mut() {
                None => {
                    acq = Some(Acquisition {
                        signal_counts: s.len() as u64,
                        idler_counts: i.len() as u64,
                        duration: s.duration(),
                        histogram: h,
                        first: keep_first.then_some((s, i)),
                    })
                }
                Some(a) => {
                    a.histogram.merge(&h)?;
                    a.signal_counts += s.len() as u64;
                    a.idler_counts += i.len() as u64;
                    a.duration += s.duration();
                }
            }
        }
        let a = acq.as_ref().expect("at least one segment");
        if target >= max_duration || accidentals_resolved(&a.histogram, opts)? {
            break;
        }
        target = (2.0 * target).min(max_duration);
    }
    Ok(acq.expect("at least one segment"))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "nan".to_string(), |x| x.to_string())
}

/// Pump-power sweep: time tags, histograms and the summary table.
pub fn simulate(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let run = &cfg.run;
    let bin = run.bin_width_ps / 1e12;
    let max_delay = run.max_delay_ns / 1e9;
    let window = run.window_ns / 1e9;
    let pair_window = run.pair_window_ns / 1e9;
    let car_opts = SummaryOptions::new(window).centered_at(0.0);
    let pair_opts = SummaryOptions::new(pair_window).centered_at(0.0);

    let mut out = Outcome::default();
    let mut summary = String::from(
        "power_mw,duration_s,singles_s_hz,singles_i_hz,coincidences,accidentals,car,car_sigma,pgr_onchip_hz,pgr_sigma_hz\n",
    );
    let mut singles_fit = (Vec::new(), Vec::new());
    let mut car_fit = (Vec::new(), Vec::new());
    let mut pgr_fit = (Vec::new(), Vec::new());
    let mut unresolved = Vec::new();

    for (k, &p_mw) in run.powers_mw.iter().enumerate() {
        let mut sim = cfg.sim(p_mw / 1e3);
        sim.rng_seed = derive_seed(run.seed, k as u64);
        let keep = cfg.output.timetag_seconds > 0.0;
        let acq = acquire(&sim, run.segment_s, run.max_duration_s, &car_opts, bin, max_delay, keep)?;
        let t = acq.duration;

        if let Some((s, i)) = &acq.first {
            let end = cfg.output.timetag_seconds.min(s.duration());
            let (s, i) = (s.slice(0.0, end), i.slice(0.0, end));
            let path = ctx.out_dir.join(format!("timetags_p{k}.txt"));
            write_tags(&path, &[&s, &i])?;
            out.files.push(path);
        }
        ctx.write(&mut out, &format!("histogram_p{k}.csv"), &acq.histogram.to_csv())?;

        let rate_s = acq.signal_counts as f64 / t;
        let rate_i = acq.idler_counts as f64 / t;
        let car = summarize_with(&acq.histogram, &car_opts);
        let pairs = summarize_with(&acq.histogram, &pair_opts);
        let resolved = accidentals_resolved(&acq.histogram, &car_opts)?;
        if !resolved || car.is_err() {
            unresolved.push(p_mw);
        }
        let (es, ei) = (sim.signal_chain.efficiency(), sim.idler_chain.efficiency());
        let (raw, acc, car_v, car_s) = match &car {
            Ok(c) => (c.raw_coincidences, Some(c.accidentals_in_window), Some(c.car), Some(c.car_sigma())),
            Err(_) => (acq.histogram.sum_between(-window / 2.0, window / 2.0) as f64, None, None, None),
        };
        let (pgr_v, pgr_s) = match &pairs {
            Ok(s) => {
                let v = infer_onchip_pgr(s, es, ei, t)?;
                let sigma = (s.raw_coincidences + s.accidentals_in_window).sqrt() / (es * ei * t);
                (Some(v), Some(sigma))
            }
            Err(_) => (None, None),
        };
        let _ = writeln!(
            summary,
            "{p_mw},{t},{rate_s},{rate_i},{raw},{},{},{},{},{}",
            fmt_opt(acc),
            fmt_opt(car_v),
            fmt_opt(car_s),
            fmt_opt(pgr_v),
            fmt_opt(pgr_s)
        );

        let net = rate_s - sim.signal_chain.background_rate(sim.pump_power);
        if p_mw > 0.0 && net > 0.0 {
            singles_fit.0.push(p_mw);
            singles_fit.1.push(net);
        }
        if let (Some(c), Some(g), true) = (car_v, pgr_v, resolved) {
            if g > 0.0 && c > 0.0 {
                car_fit.0.push(g);
                car_fit.1.push(c);
            }
        }
        if let Some(g) = pgr_v.filter(|g| *g > 0.0 && p_mw > 0.0) {
            pgr_fit.0.push(p_mw);
            pgr_fit.1.push(g);
        }
    }
    ctx.write(&mut out, "summary.csv", &summary)?;

    let r = &mut out.report;
    r.push("points", run.powers_mw.len());
    r.push("pgr_window_ps", run.pair_window_ns * 1e3);
    r.push("car_window_ps", run.window_ns * 1e3);
    for (name, (x, y)) in [("singles", &singles_fit), ("car", &car_fit), ("pgr", &pgr_fit)] {
        match fit_power_law(x, y) {
            Ok(f) => {
                r.push(&format!("{name}_exponent"), f.value("exponent"));
                r.push(&format!("{name}_exponent_sigma"), f.stderr("exponent"));
                if name == "pgr" {
                    r.push("pgr_amplitude", f.value("amplitude"));
                }
            }
            Err(_) => r.push(&format!("{name}_exponent"), "nan"),
        }
    }
    if !pgr_fit.0.is_empty() {
        // slope of a pure P² law, geometric mean of the per-point ratios
        let n = pgr_fit.0.len() as f64;
        let ln_sum: f64 = pgr_fit.0.iter().zip(&pgr_fit.1).map(|(p, g)| (g / (p * p)).ln()).sum();
        r.push("pgr_per_mw2", (ln_sum / n).exp());
    }
    if !unresolved.is_empty() {
        let list: Vec<String> = unresolved.iter().map(|p| p.to_string()).collect();
        r.push("unresolved_powers_mw", list.join(" "));
        out.insufficient =
            Some(format!("accidental floor unresolved after {} s at {} mW", run.max_duration_s, list.join(", ")));
    }
    let report = out.report.render(ctx.format);
    ctx.write(&mut out, &ctx.report_name("simulate"), &report)?;
    Ok(out)
}

fn write_tags(path: &Path, streams: &[&TimeTagStream]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    let f = File::create(path).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    write_timetags(BufWriter::new(f), streams).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

/// Phase sweep of the folded interferometer and its visibility.
pub fn franson(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let f = &cfg.franson;
    let mut sim = cfg.sim_at_pgr(f.pgr_hz)?;
    sim.duration = f.duration_s;
    let phases = phase_grid(f.phase_start_pi * PI, f.phase_stop_pi * PI, f.phase_points);
    let points = phase_sweep(&sim, &cfg.franson(), &phases)?;
    let mut out = Outcome::default();
    ctx.write(&mut out, "franson_sweep.csv", &sweep_to_csv(&points))?;
    let vis = extract_visibility(&points)?;
    let r = &mut out.report;
    r.push("v_in", f.intrinsic_visibility);
    r.push("v_raw", vis.v_raw);
    r.push("v_fit", vis.v_fit);
    r.push("sigma_v", vis.sigma_v);
    r.push("bell_sigmas", vis.bell_sigmas());
    for w in &vis.warnings {
        r.push("warning", w);
    }
    let report = out.report.render(ctx.format);
    ctx.write(&mut out, &ctx.report_name("franson"), &report)?;
    Ok(out)
}

/// Three-fold counts summed over segments of the configured run.
pub fn threefold(sim: &SimConfig, segment: f64, splitter_ratio: f64, window: f64) -> Result<ThreefoldCounts, CliError> {
    if sim.duration <= 0.0 {
        return Ok(ThreefoldCounts::default());
    }
    let parts: Vec<ThreefoldCounts> = sim
        .segments(segment)?
        .par_iter()
        .map(|seg| {
            let (a, b, c) = simulate_three_channel(seg, splitter_ratio)?;
            Ok(count_threefold(&a, &b, &c, window)?)
        })
        .collect::<Result<_, CliError>>()?;
    let mut total = ThreefoldCounts::default();
    for p in parts {
        total += p;
    }
    Ok(total)
}

/// Heralded g² from herald, idler-B and idler-C detectors.
pub fn g2h(ctx: &Context) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let g = &cfg.g2h;
    let mut sim = cfg.sim_at_pgr(g.pgr_hz)?;
    sim.duration = g.duration_s;
    let n = threefold(&sim, cfg.run.segment_s, g.splitter_ratio, g.window_ns / 1e9)?;
    let mut out = Outcome::default();
    let r = &mut out.report;
    r.push("pgr_hz", g.pgr_hz);
    r.push("duration_s", g.duration_s);
    r.push("window_ns", g.window_ns);
    r.push("n_a", n.n_a);
    r.push("n_ab", n.n_ab);
    r.push("n_ac", n.n_ac);
    r.push("n_abc", n.n_abc);
    match (n.g2(), n.g2_sigma()) {
        (Ok(v), Ok(s)) => {
            r.push("g2h", v);
            r.push("g2h_sigma", s);
        }
        (Err(e), _) | (_, Err(e)) => {
            r.push("g2h", "nan");
            r.push("g2h_sigma", "nan");
            out.insufficient = Some(e.to_string());
        }
    }
    let report = out.report.render(ctx.format);
    ctx.write(&mut out, &ctx.report_name("g2h"), &report)?;
    Ok(out)
}

/// Published comparison table, brightness ratios and optional isolines.
pub fn compare(ctx: &Context, isolines: bool) -> Result<Outcome, CliError> {
    let mut out = Outcome::default();
    ctx.write(&mut out, "platforms.csv", &table_csv())?;
    out.preamble = match ctx.format {
        Format::Csv => table_csv(),
        Format::Kv => table_kv(),
    };
    let mut ratios = String::from("platform,brightness_ratio\n");
    for (name, ratio) in brightness_ratios() {
        let _ = writeln!(ratios, "{name},{ratio}");
        out.report.push(&format!("ratio_{name}"), ratio);
    }
    ctx.write(&mut out, "brightness_ratios.csv", &ratios)?;
    if isolines {
        let spec = ctx.config.spec();
        let gammas: Vec<f64> = (0..=40).map(|i| 10f64.powf(-1.0 + i as f64 * 0.1)).collect();
        let csv = isolines_csv(&spec, &[-4.0, -3.0, -2.0, -1.0, 0.0, 1.0], &gammas)?;
        ctx.write(&mut out, "isolines.csv", &csv)?;
    }
    Ok(out)
}

/// Analysis of an externally recorded time-tag file.
pub fn replay(ctx: &Context, input: &Path, duration: Option<f64>) -> Result<Outcome, CliError> {
    let cfg = &ctx.config;
    let f = File::open(input).map_err(|e| CliError::Io(format!("cannot read {}: {e}", input.display())))?;
    let parsed = read_timetags(BufReader::new(f)).map_err(|e| match e {
        ringpair::Error::Io(m) => CliError::Io(format!("{}: {m}", input.display())),
        other => CliError::Config(format!("{}: {other}", input.display())),
    })?;
    let last = parsed.values().filter_map(|v| v.last()).max().copied().unwrap_or(0);
    let duration = duration.unwrap_or((last + 1) as f64 / 1e12);
    let streams = streams_from_file(&parsed, &[0, 1, 2], duration)?;
    let (s, i, c) = (&streams[0], &streams[1], &streams[2]);

    let run = &cfg.run;
    let h = build_histogram(s, i, run.bin_width_ps / 1e12, run.max_delay_ns / 1e9)?;
    let mut out = Outcome::default();
    ctx.write(&mut out, "replay_histogram.csv", &h.to_csv())?;
    let r = &mut out.report;
    r.push("duration_s", duration);
    r.push("singles_s_hz", s.rate());
    r.push("singles_i_hz", i.rate());
    let window = run.window_ns / 1e9;
    match summarize_with(&h, &SummaryOptions::new(window)) {
        Ok(sum) => {
            r.push("peak_delay_ps", sum.center * 1e12);
            r.push("coincidences", sum.raw_coincidences);
            r.push("accidentals", sum.accidentals_in_window);
            r.push("car", sum.car);
            r.push("car_sigma", sum.car_sigma());
            let pairs = summarize_with(&h, &SummaryOptions::new(run.pair_window_ns / 1e9).centered_at(sum.center))?;
            let (es, ei) = (cfg.chain.signal.to_chain().efficiency(), cfg.chain.idler.to_chain().efficiency());
            r.push("pgr_onchip_hz", infer_onchip_pgr(&pairs, es, ei, duration)?);
        }
        Err(e) => {
            r.push("car", "nan");
            out.insufficient = Some(e.to_string());
        }
    }
    if !c.is_empty() {
        let n = count_threefold(s, i, c, cfg.g2h.window_ns / 1e9)?;
        let r = &mut out.report;
        r.push("n_a", n.n_a);
        r.push("n_ab", n.n_ab);
        r.push("n_ac", n.n_ac);
        r.push("n_abc", n.n_abc);
        r.push("g2h", fmt_opt(n.g2().ok()));
    }
    let report = out.report.render(ctx.format);
    ctx.write(&mut out, &ctx.report_name("replay"), &report)?;
    Ok(out)
}
