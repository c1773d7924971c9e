#![allow(dead_code)]

use ringpair::eventsim::SimConfig;
use ringpair::resonator::pump_for_pgr;

/// Config of the default device pumped to the given on-chip pair rate.
pub fn config_at_pgr(pgr: f64, duration: f64, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::reference(0.0);
    cfg.pump_power = pump_for_pgr(&cfg.spec, pgr).unwrap();
    cfg.duration = duration;
    cfg.rng_seed = seed;
    cfg
}

/// Fraction of pairs whose photons leave within `window` of each other when
/// both escape after independent exponential delays of mean `tau`.
pub fn capture_fraction(window: f64, tau: f64) -> f64 {
    1.0 - (-window / (2.0 * tau)).exp()
}

/// Expected raw CAR in a window: one plus true over accidental coincidences.
pub fn car_pred(pgr: f64, eta_s: f64, eta_i: f64, dark_s: f64, dark_i: f64, window: f64, tau: f64) -> f64 {
    let accidentals = (pgr * eta_s + dark_s) * (pgr * eta_i + dark_i) * window;
    1.0 + pgr * eta_s * eta_i * capture_fraction(window, tau) / accidentals
}

/// Small-µ heralded g² with herald A, idlers B and C, rates per second.
pub fn g2_pred(pgr: f64, eta_a: f64, eta_b: f64, eta_c: f64, dark: [f64; 3], window: f64, tau: f64) -> f64 {
    let f = capture_fraction(window, tau);
    let a = pgr * eta_a + dark[0];
    let rb = pgr * eta_b + dark[1];
    let rc = pgr * eta_c + dark[2];
    let n_ab = pgr * eta_a * eta_b * f + a * rb * window;
    let n_ac = pgr * eta_a * eta_c * f + a * rc * window;
    let n_abc =
        pgr * eta_a * eta_b * f * rc * window + pgr * eta_a * eta_c * f * rb * window + a * rb * window * rc * window;
    n_abc * a / (n_ab * n_ac)
}

/// All-pairs delay histogram by brute force: count of `b − a` delays per bin.
pub fn brute_force_histogram(a: &[i64], b: &[i64], bw: i64, max: i64) -> std::collections::BTreeMap<i64, u64> {
    let mut out = std::collections::BTreeMap::new();
    for &ta in a {
        for &tb in b {
            let d = tb - ta;
            if d.abs() <= max {
                *out.entry((2 * d + bw).div_euclid(2 * bw)).or_insert(0) += 1;
            }
        }
    }
    out
}
