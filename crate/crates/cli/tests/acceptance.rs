//! End-to-end acceptance checks. Each test prints one PASS/FAIL line.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::Rng;
use ringpair::eventsim::{ps_to_seconds, seconds_to_ps, SimConfig, TimeTagStream};
use ringpair::fitting::{fit_lorentzian, LeastSquaresProblem, LorentzianGuess, LorentzianProblem};
use ringpair::franson::{extract_visibility, phase_grid, phase_sweep, simulate_franson, PhasePoint};
use ringpair::resonator::{linewidth, pgr_from_pump, synthesize_trace, ResonatorSpec};
use ringpair::rng::{derive_seed, seeded};
use ringpair::tcspc::{build_histogram, infer_onchip_pgr, summarize_with, SummaryOptions};
use ringpair_cli::platforms::{brightness_ratios, table_csv, PLATFORMS};
use ringpair_cli::{commands, Context, ExperimentConfig, Format, Outcome};

struct Verdict {
    checks: Vec<(String, bool)>,
    started: Instant,
}

impl Verdict {
    fn new() -> Self {
        Self { checks: Vec::new(), started: Instant::now() }
    }

    fn check(&mut self, label: impl Into<String>, ok: bool) {
        self.checks.push((label.into(), ok));
    }

    /// Print the line and fail the test if any check failed.
    fn finish(mut self, n: u32, budget: Duration) {
        let elapsed = self.started.elapsed();
        self.check(format!("runtime {:.1} s < {} s", elapsed.as_secs_f64(), budget.as_secs()), elapsed < budget);
        let pass = self.checks.iter().all(|(_, ok)| *ok);
        let details: Vec<String> =
            self.checks.iter().map(|(l, ok)| format!("[{}] {l}", if *ok { "ok" } else { "FAIL" })).collect();
        let line = format!("criterion {n}: {}  {}\n", if pass { "PASS" } else { "FAIL" }, details.join("; "));
        // straight to the handle so the line survives output capture
        let _ = std::io::stderr().write_all(line.as_bytes());
        assert!(pass, "{line}");
    }
}

fn reference() -> ExperimentConfig {
    ExperimentConfig::reference()
}

fn context(dir: &Path) -> Context {
    Context { config: reference(), out_dir: dir.to_path_buf(), format: Format::Kv }
}

fn capture_fraction(window: f64, tau: f64) -> f64 {
    1.0 - (-window / (2.0 * tau)).exp()
}

/// CAR expected from pair flux, singles and background in a window `w`.
fn car_oracle(pgr: f64, sim: &SimConfig, w: f64) -> f64 {
    let (es, ei) = (sim.signal_chain.efficiency(), sim.idler_chain.efficiency());
    let rs = pgr * es + sim.signal_chain.background_rate(sim.pump_power);
    let ri = pgr * ei + sim.idler_chain.background_rate(sim.pump_power);
    1.0 + pgr * es * ei * capture_fraction(w, sim.correlation_time) / (rs * ri * w)
}

/// Heralded g² in the few-pair limit: one extra photon at either idler detector.
fn g2_oracle(pgr: f64, sim: &SimConfig, split: f64, w: f64) -> f64 {
    let ea = sim.signal_chain.efficiency();
    let ei = sim.idler_chain.efficiency();
    let (eb, ec) = (ei * split, sim.third_chain.efficiency() * (1.0 - split));
    let f = capture_fraction(w, sim.correlation_time);
    let ra = pgr * ea + sim.signal_chain.dark_rate;
    let rb = pgr * eb + sim.idler_chain.dark_rate;
    let rc = pgr * ec + sim.third_chain.dark_rate;
    let n_ab = pgr * ea * eb * f + ra * rb * w;
    let n_ac = pgr * ea * ec * f + ra * rc * w;
    let n_abc = pgr * ea * eb * f * rc * w + pgr * ea * ec * f * rb * w + ra * rb * w * rc * w;
    n_abc * ra / (n_ab * n_ac)
}

#[test]
fn criterion_1_headline_rate() {
    let mut v = Verdict::new();
    let dir = tempfile::tempdir().unwrap();
    let out = commands::pgr(&context(dir.path())).unwrap();
    let rate = out.report.number("pgr_per_mw2").unwrap();
    v.check(format!("PGR/mW² = {rate:.6e}"), (rate / 2e10 - 1.0).abs() < 1e-6);
    v.finish(1, Duration::from_secs(1));
}

#[test]
fn criterion_2_scaling_laws() {
    let mut v = Verdict::new();
    let spec = ResonatorSpec::reference_device();
    let base = pgr_from_pump(&spec, 1e-3).unwrap();
    let q2 = pgr_from_pump(&ResonatorSpec { q_loaded: 2.0 * spec.q_loaded, ..spec }, 1e-3).unwrap() / base;
    let r2 = pgr_from_pump(&ResonatorSpec { radius: 2.0 * spec.radius, ..spec }, 1e-3).unwrap() / base;
    v.check(format!("PGR(2Q)/PGR(Q) = {q2}"), (q2 / 8.0 - 1.0).abs() < 1e-12);
    v.check(format!("PGR(2R)/PGR(R) = {r2}"), (r2 / 0.25 - 1.0).abs() < 1e-12);
    let worst = [1e-6, 3.7e-5, 1e-3, 0.02]
        .iter()
        .map(|&p| (pgr_from_pump(&spec, p).unwrap() / (base * (p / 1e-3).powi(2)) - 1.0).abs())
        .fold(0.0, f64::max);
    v.check(format!("quadratic in power, worst deviation {worst:.1e}"), worst < 1e-12);
    v.finish(2, Duration::from_secs(1));
}

#[test]
fn criterion_3_pgr_inference() {
    let mut v = Verdict::new();
    let cfg = reference();
    let bin = cfg.run.bin_width_ps / 1e12;
    let max_delay = cfg.run.max_delay_ns / 1e9;
    let pair = SummaryOptions::new(cfg.run.pair_window_ns / 1e9).centered_at(0.0);
    for (k, &truth) in [1e5, 1e6, 1e7].iter().enumerate() {
        let started = Instant::now();
        let mut sim = cfg.sim_at_pgr(truth).unwrap();
        sim.duration = 60.0;
        sim.rng_seed = derive_seed(cfg.run.seed, k as u64);
        let acq = commands::acquire(&sim, 60.0, 60.0, &pair, bin, max_delay, false).unwrap();
        let s = summarize_with(&acq.histogram, &pair).unwrap();
        let (es, ei) = (sim.signal_chain.efficiency(), sim.idler_chain.efficiency());
        let inferred = infer_onchip_pgr(&s, es, ei, acq.duration).unwrap();
        let sigma = (s.raw_coincidences + s.accidentals_in_window).sqrt() / (es * ei * acq.duration);
        let z = (inferred - truth) / sigma;
        v.check(format!("{truth:.0e}: inferred {inferred:.4e} ({z:+.2}σ)"), z.abs() <= 3.0);
        let t = started.elapsed();
        v.check(format!("{truth:.0e} in {:.1} s", t.as_secs_f64()), t < Duration::from_secs(60));
    }
    v.finish(3, Duration::from_secs(180));
}

struct Sweep {
    outcome: Outcome,
    rows: Vec<BTreeMap<String, f64>>,
    elapsed: Duration,
}

/// The default pump-power sweep, run once and shared.
fn default_sweep() -> &'static Sweep {
    static SWEEP: OnceLock<Sweep> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let started = Instant::now();
        let outcome = commands::simulate(&context(dir.path())).unwrap();
        let elapsed = started.elapsed();
        let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        let mut lines = csv.lines();
        let header: Vec<&str> = lines.next().unwrap().split(',').collect();
        let rows = lines
            .map(|l| header.iter().zip(l.split(',')).map(|(k, x)| (k.to_string(), x.parse().unwrap())).collect())
            .collect();
        Sweep { outcome, rows, elapsed }
    })
}

#[test]
fn criterion_4_singles_quadratic() {
    let mut v = Verdict::new();
    let sweep = default_sweep();
    let e = sweep.outcome.report.number("singles_exponent").unwrap();
    let s = sweep.outcome.report.number("singles_exponent_sigma").unwrap();
    v.check(format!("{} powers", sweep.rows.len()), sweep.rows.len() == 5);
    v.check(format!("singles exponent {e:.4} ± {s:.4}"), (e - 2.0).abs() <= 0.05);
    v.check(format!("sweep {:.1} s", sweep.elapsed.as_secs_f64()), sweep.elapsed < Duration::from_secs(120));
    v.finish(4, Duration::from_secs(120));
}

#[test]
fn criterion_5_car_inverse_law() {
    let mut v = Verdict::new();
    let sweep = default_sweep();
    let cfg = reference();
    let w = cfg.run.window_ns / 1e9;
    let e = sweep.outcome.report.number("car_exponent").unwrap();
    v.check(format!("CAR exponent {e:.3}"), (e + 1.0).abs() <= 0.1);

    let pgrs: Vec<f64> = sweep.rows.iter().map(|r| pgr_from_pump(&cfg.spec(), r["power_mw"] / 1e3).unwrap()).collect();
    let span = pgrs.iter().cloned().fold(0.0, f64::max) / pgrs.iter().cloned().fold(f64::INFINITY, f64::min);
    v.check(format!("PGR span {span:.1}×"), span >= 10.0);

    let mut cars = Vec::new();
    for (row, &pgr) in sweep.rows.iter().zip(&pgrs) {
        let sim = cfg.sim(row["power_mw"] / 1e3);
        let pred = car_oracle(pgr, &sim, w);
        let z = (row["car"] - pred) / row["car_sigma"];
        v.check(format!("{pgr:.2e}/s: CAR {:.1} vs oracle {pred:.1} ({z:+.2}σ)", row["car"]), z.abs() <= 3.0);
        cars.push((pgr, row["car"]));
    }

    // published absolute values at the two ends of the sweep
    for (pgr, published) in [(2.3e5, 4389.0), (12e6, 353.0)] {
        let (_, car) =
            cars.iter().min_by(|a, b| (a.0 / pgr).ln().abs().total_cmp(&(b.0 / pgr).ln().abs())).copied().unwrap();
        let ratio = car / published;
        v.check(format!("absolute CAR {car:.0} vs {published} (×{ratio:.2})"), (0.5..=2.0).contains(&ratio));
    }
    v.finish(5, Duration::from_secs(300));
}

#[test]
fn criterion_6_franson_visibility() {
    let mut v = Verdict::new();
    let cfg = reference();
    let f = &cfg.franson;
    let mut sim = cfg.sim_at_pgr(f.pgr_hz).unwrap();
    sim.duration = f.duration_s;
    let phases = phase_grid(f.phase_start_pi * PI, f.phase_stop_pi * PI, f.phase_points);
    let points = phase_sweep(&sim, &cfg.franson(), &phases).unwrap();
    let vis = extract_visibility(&points).unwrap();
    v.check(format!("V_fit {:.4} ± {:.4}", vis.v_fit, vis.sigma_v), (vis.v_fit - f.intrinsic_visibility).abs() <= 0.01);
    v.check(format!("Bell {:.1}σ", vis.bell_sigmas()), vis.bell_sigmas() > 40.0);

    let invariant = |name: &str, get: &dyn Fn(&PhasePoint) -> f64, v: &mut Verdict| {
        let xs: Vec<f64> = points.iter().map(get).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let worst = xs.iter().map(|x| (x - mean).abs() / mean.sqrt()).fold(0.0, f64::max);
        v.check(format!("{name} flat, worst {worst:.2}σ"), worst <= 3.0);
    };
    invariant("side peaks", &|p| p.side_coincidences, &mut v);
    invariant("signal singles", &|p| p.singles_signal, &mut v);
    invariant("idler singles", &|p| p.singles_idler, &mut v);

    let central = |phase: f64, k: u64| {
        let mut s = sim;
        s.rng_seed = derive_seed(sim.rng_seed, k);
        simulate_franson(&s, &cfg.franson().with_phase(phase)).unwrap().central.true_coincidences
    };
    let (c0, cpi) = (central(0.0, phases.len() as u64), central(PI, phases.len() as u64 + 1));
    let ratio = cpi / c0;
    v.check(format!("central(π)/central(0) = {:.2}%", 100.0 * ratio), ratio < 0.05);
    v.finish(6, Duration::from_secs(300));
}

#[test]
fn criterion_7_heralded_antibunching() {
    let mut v = Verdict::new();
    let cfg = reference();
    let g = &cfg.g2h;
    let w = g.window_ns / 1e9;
    let dir = tempfile::tempdir().unwrap();
    let low = commands::g2h(&context(dir.path())).unwrap().report;
    let (g2, sigma) = (low.number("g2h").unwrap(), low.number("g2h_sigma").unwrap());
    v.check(format!("{} min: g²_H = {g2:.4} ± {sigma:.4}", g.duration_s / 60.0), g2 <= 0.01);
    let z = (g2 - 0.004) / (sigma * sigma + 0.01 * 0.01).sqrt();
    v.check(format!("vs 0.004±0.01 ({z:+.2}σ)"), z.abs() <= 3.0);

    // a decade of pair rate, shorter runs where three-folds are plentiful
    let mut trend = vec![(g.pgr_hz, g2, sigma)];
    for (k, (pgr, duration)) in [(3.0 * g.pgr_hz, 3600.0), (10.0 * g.pgr_hz, 1800.0)].into_iter().enumerate() {
        let mut sim = cfg.sim_at_pgr(pgr).unwrap();
        sim.duration = duration;
        sim.rng_seed = derive_seed(cfg.run.seed, k as u64 + 1);
        let n = commands::threefold(&sim, cfg.run.segment_s, g.splitter_ratio, w).unwrap();
        trend.push((pgr, n.g2().unwrap(), n.g2_sigma().unwrap()));
    }
    for &(pgr, g2, sigma) in &trend {
        let sim = cfg.sim_at_pgr(pgr).unwrap();
        let pred = g2_oracle(pgr, &sim, g.splitter_ratio, w);
        let z = (g2 - pred) / sigma;
        v.check(format!("{pgr:.0e}: {g2:.4} vs oracle {pred:.4} ({z:+.2}σ)"), z.abs() <= 3.0);
    }
    let rising = trend.windows(2).all(|p| p[1].1 > p[0].1);
    v.check("rises with pump power", rising);
    v.finish(7, Duration::from_secs(300));
}

#[test]
fn criterion_8_lorentzian_q() {
    let mut v = Verdict::new();
    let spec = ResonatorSpec::reference_device();
    let trace = |noise: f64, seed: u64| {
        synthesize_trace(&spec, &[spec.pump_wavelength], 10e-12, 0.01e-12, noise, seed).unwrap()
    };
    let q = fit_lorentzian(&trace(0.0, 0), None).unwrap().value("q");
    v.check(
        format!("noiseless Q error {:.1e}", (q / spec.q_loaded - 1.0).abs()),
        (q / spec.q_loaded - 1.0).abs() < 1e-6,
    );
    let worst = (0..100)
        .map(|seed| (fit_lorentzian(&trace(0.01, seed), None).unwrap().value("q") / spec.q_loaded - 1.0).abs())
        .fold(0.0, f64::max);
    v.check(format!("1% noise, 100 seeds, worst {:.2}%", 100.0 * worst), worst < 0.01);
    let fwhm = linewidth(&spec).unwrap().fwhm_wavelength;
    v.check(format!("FWHM {:.3} pm", fwhm * 1e12), (fwhm * 1e12 - 1.26).abs() < 0.005 && fwhm < 2e-12);
    v.finish(8, Duration::from_secs(30));
}

fn random_stream(ch: u8, n: usize, span_ps: i64, seed: u64) -> TimeTagStream {
    let mut rng = seeded(seed, ch as u64);
    let mut ts: Vec<i64> = (0..n).map(|_| rng.gen_range(0..=span_ps)).collect();
    ts.sort_unstable();
    TimeTagStream::new(ch, ts, ps_to_seconds(span_ps)).unwrap()
}

#[test]
fn criterion_9_brute_force_oracles() {
    let mut v = Verdict::new();
    let a = random_stream(0, 10_000, 1_000_000_000, 9);
    let b = random_stream(1, 10_000, 1_000_000_000, 9);
    for (bw, max) in [(100e-12, 100e-9), (1e-9, 500e-9), (37e-12, 3e-9)] {
        let h = build_histogram(&a, &b, bw, max).unwrap();
        let (bw_ps, max_ps) = (seconds_to_ps(bw), seconds_to_ps(max));
        let mut reference: BTreeMap<i64, u64> = BTreeMap::new();
        for &ta in a.timestamps() {
            for &tb in b.timestamps() {
                let d = tb - ta;
                if d.abs() <= max_ps {
                    *reference.entry((2 * d + bw_ps).div_euclid(2 * bw_ps)).or_insert(0) += 1;
                }
            }
        }
        let same = (0..h.len()).all(|i| h.counts()[i] == reference.get(&(h.delay_ps(i) / bw_ps)).copied().unwrap_or(0))
            && h.total() == reference.values().sum::<u64>();
        v.check(format!("histogram {bw_ps} ps bins, {} pairs", h.total()), same);
    }

    let spec = ResonatorSpec::reference_device();
    let trace = synthesize_trace(&spec, &[spec.pump_wavelength], 10e-12, 0.01e-12, 0.0, 0).unwrap();
    let guess = LorentzianGuess { center: spec.pump_wavelength + 0.3e-12, fwhm: 2e-12, depth: 0.4, baseline: 0.98 };
    let problem = LorentzianProblem::new(&trace, guess.center, guess.fwhm);
    let x = problem.encode(&guess);
    let (m, n) = (problem.n_residuals(), problem.n_params());
    let mut analytic = vec![0.0; m * n];
    problem.jacobian(&x, &mut analytic);
    let (mut plus, mut minus) = (vec![0.0; m], vec![0.0; m]);
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let h = 1e-6 * x[j].abs().max(1e-3);
        let (mut xp, mut xm) = (x.to_vec(), x.to_vec());
        xp[j] += h;
        xm[j] -= h;
        problem.residuals(&xp, &mut plus);
        problem.residuals(&xm, &mut minus);
        let (mut diff, mut norm) = (0.0, 0.0);
        for i in 0..m {
            let fd = (plus[i] - minus[i]) / (2.0 * h);
            diff += (analytic[i * n + j] - fd).powi(2);
            norm += analytic[i * n + j].powi(2);
        }
        worst = worst.max((diff / norm).sqrt());
    }
    v.check(format!("Jacobian vs central differences {worst:.1e}"), worst < 1e-6);
    v.finish(9, Duration::from_secs(60));
}

#[test]
fn criterion_10_comparison_data() {
    let mut v = Verdict::new();
    let golden =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/platforms.csv")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let mut ctx = context(dir.path());
    ctx.format = Format::Csv;
    commands::compare(&ctx, false).unwrap();
    let written = std::fs::read_to_string(dir.path().join("platforms.csv")).unwrap();
    v.check("table matches golden file", written == golden && table_csv() == golden);
    v.check(format!("{} rows", PLATFORMS.len()), PLATFORMS.len() == 6);

    let ratios: BTreeMap<&str, f64> = brightness_ratios().into_iter().collect();
    let sin = ratios["Si₃N₄"];
    let soi = ratios["SOI"];
    // the published brightnesses carry one or two significant figures
    let one_figure = |x: f64| {
        let p = 10f64.powf(x.log10().floor());
        (x / p).round() * p
    };
    v.check(format!("vs Si₃N₄ ×{sin:.0} (≈{:.0})", one_figure(sin)), one_figure(sin) >= 500.0);
    v.check(format!("vs SOI ×{soi:.0}"), soi > 1000.0);
    v.finish(10, Duration::from_secs(1));
}
