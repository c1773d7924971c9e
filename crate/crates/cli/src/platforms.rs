//! Published figures of merit for integrated pair sources.
//!
//! Each cell keeps the printed text next to its numeric value so the table can
//! be reproduced exactly and still used in arithmetic. Blank cells are `None`.
//! Brightness and PGR are normalized to 1 mW on-chip pump; CAR, visibility and
//! heralded g² were reported at a 1 MHz pair rate.

use std::fmt::Write as _;

use ringpair::resonator::{linewidth, pgr_from_pump, ResonatorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Process {
    Sfwm,
    Spdc,
}

impl Process {
    pub fn as_str(self) -> &'static str {
        match self {
            Process::Sfwm => "SFWM",
            Process::Spdc => "SPDC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub text: &'static str,
    pub value: f64,
    pub sigma: Option<f64>,
}

const fn cell(text: &'static str, value: f64, sigma: Option<f64>) -> Option<Cell> {
    Some(Cell { text, value, sigma })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlatformRecord {
    pub platform: &'static str,
    pub process: Process,
    pub q: Option<Cell>,
    pub pgr_ghz: Option<Cell>,
    /// Pairs s⁻¹ GHz⁻¹.
    pub brightness: Option<Cell>,
    pub car: Option<Cell>,
    /// As a fraction; the text keeps the percent form.
    pub visibility: Option<Cell>,
    pub g2h: Option<Cell>,
    pub reference: &'static str,
}

pub const PLATFORMS: [PlatformRecord; 6] = [
    PlatformRecord {
        platform: "AlGaAsOI",
        process: Process::Sfwm,
        q: cell("1.2×10⁶", 1.2e6, None),
        pgr_ghz: cell("20", 20.0, None),
        brightness: cell("2×10¹¹", 2e11, None),
        car: cell("2697±260", 2697.0, Some(260.0)),
        visibility: cell("97.1±0.6%", 0.971, Some(0.006)),
        g2h: cell("0.004±0.01", 0.004, Some(0.01)),
        reference: "this work",
    },
    PlatformRecord {
        platform: "SOI",
        process: Process::Sfwm,
        q: cell("~10⁵", 1e5, None),
        pgr_ghz: cell("0.149", 0.149, None),
        brightness: cell("7.1×10⁷", 7.1e7, None),
        car: cell("532±35", 532.0, Some(35.0)),
        visibility: cell("98.9±0.6%", 0.989, Some(0.006)),
        g2h: cell("0.0053±0.021", 0.0053, Some(0.021)),
        reference: "Ma2017",
    },
    PlatformRecord {
        platform: "InP",
        process: Process::Sfwm,
        q: cell("4×10⁴", 4e4, None),
        pgr_ghz: cell("0.145", 0.145, None),
        brightness: cell("3.1×10⁷", 3.1e7, None),
        car: cell("277", 277.0, None),
        visibility: cell("78.4±2%", 0.784, Some(0.02)),
        g2h: None,
        reference: "Kumar2019",
    },
    PlatformRecord {
        platform: "Si₃N₄",
        process: Process::Sfwm,
        q: cell("2×10⁶", 2e6, None),
        pgr_ghz: cell("0.004", 0.004, None),
        brightness: cell("4.3×10⁸", 4.3e8, None),
        car: cell("~10", 10.0, None),
        visibility: cell("90±7%", 0.90, Some(0.07)),
        g2h: None,
        reference: "Ramelow2015",
    },
    PlatformRecord {
        platform: "LiNbO₃",
        process: Process::Spdc,
        q: None,
        pgr_ghz: cell("0.023", 0.023, None),
        brightness: cell("3×10⁵", 3e5, None),
        car: cell("668±1.7", 668.0, Some(1.7)),
        visibility: None,
        g2h: None,
        reference: "Zhao2020",
    },
    PlatformRecord {
        platform: "AlN",
        process: Process::Spdc,
        q: cell("1.1×10⁵", 1.1e5, None),
        pgr_ghz: cell("0.006", 0.006, None),
        brightness: cell("5.3×10⁶", 5.3e6, None),
        car: None,
        visibility: None,
        g2h: cell("0.088±0.004", 0.088, Some(0.004)),
        reference: "Guo2017",
    },
];

pub const TABLE_HEADER: &str = "platform,type,q,pgr_ghz,brightness,car,visibility,g2h,ref";

fn text(c: &Option<Cell>) -> &'static str {
    c.as_ref().map_or("-", |c| c.text)
}

pub fn table_csv() -> String {
    let mut out = format!("{TABLE_HEADER}\n");
    for r in &PLATFORMS {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.platform,
            r.process.as_str(),
            text(&r.q),
            text(&r.pgr_ghz),
            text(&r.brightness),
            text(&r.car),
            text(&r.visibility),
            text(&r.g2h),
            r.reference
        );
    }
    out
}

pub fn table_kv() -> String {
    let mut out = String::new();
    for r in &PLATFORMS {
        let fields = [
            ("type", r.process.as_str()),
            ("q", text(&r.q)),
            ("pgr_ghz", text(&r.pgr_ghz)),
            ("brightness", text(&r.brightness)),
            ("car", text(&r.car)),
            ("visibility", text(&r.visibility)),
            ("g2h", text(&r.g2h)),
            ("ref", r.reference),
        ];
        for (k, v) in fields {
            let _ = writeln!(out, "{}.{k}={v}", r.platform);
        }
    }
    out
}

/// Brightness of the first row over each row's brightness. Rows without a
/// brightness are skipped.
pub fn brightness_ratios() -> Vec<(&'static str, f64)> {
    let ours = PLATFORMS[0].brightness.expect("reference brightness").value;
    PLATFORMS[1..].iter().filter_map(|r| r.brightness.map(|b| (r.platform, ours / b.value))).collect()
}

/// Points on lines of constant `Q³/R²` in the (γ, pair-rate) plane.
///
/// The rate equation gives PGR ∝ γ²·Q³/R² at fixed group index and
/// wavelength, so each line is a parabola through the given device scaled by
/// its `Q³/R²`. Rates are per mW² of on-chip pump; brightness uses the
/// device linewidth.
pub fn isolines_csv(device: &ResonatorSpec, decades: &[f64], gammas: &[f64]) -> ringpair::Result<String> {
    let k0 = device.q_loaded.powi(3) / device.radius.powi(2);
    let pgr0 = pgr_from_pump(device, 1e-3)?;
    let fwhm_ghz = linewidth(device)?.fwhm_frequency / 1e9;
    let mut out = String::from("q3_per_r2_per_m2,gamma_per_w_per_m,pgr_per_mw2,brightness_at_device_linewidth\n");
    for &d in decades {
        let k = k0 * 10f64.powf(d);
        for &g in gammas {
            let pgr = pgr0 * (g / device.gamma_eff).powi(2) * (k / k0);
            let _ = writeln!(out, "{k:e},{g},{pgr:e},{:e}", pgr / fwhm_ghz);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_rows() {
        assert_eq!(PLATFORMS.len(), 6);
        assert_eq!(table_csv().lines().count(), 7);
    }

    #[test]
    fn ratios_support_the_headline_claims() {
        let r: std::collections::HashMap<_, _> = brightness_ratios().into_iter().collect();
        assert!((r["Si₃N₄"] - 465.116).abs() < 1e-3);
        assert!((r["SOI"] - 2816.901).abs() < 1e-3);
        assert!(r["SOI"] > 1000.0);
    }

    #[test]
    fn isolines_are_exact_at_the_device() {
        let d = ResonatorSpec::reference_device();
        let csv = isolines_csv(&d, &[0.0], &[d.gamma_eff]).unwrap();
        let row: Vec<f64> = csv.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
        assert!((row[2] / 2e10 - 1.0).abs() < 1e-12);
    }
}
