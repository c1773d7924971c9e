use proptest::prelude::*;
use ringpair::resonator::*;

fn spec_strategy() -> impl Strategy<Value = ResonatorSpec> {
    (5e-6f64..100e-6, 1e4f64..1e7, 0.1f64..1000.0, 1.5f64..4.5, 1.3e-6f64..1.7e-6).prop_map(|(r, q, g, ng, lam)| {
        ResonatorSpec {
            radius: r,
            q_loaded: q,
            gamma_eff: g,
            group_index: ng,
            pump_wavelength: lam,
            extinction_depth: 0.5,
        }
    })
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

#[test]
fn headline_rate_and_scaling() {
    let spec = ResonatorSpec::reference_device();
    assert!(rel(pgr_from_pump(&spec, 1e-3).unwrap(), 2e10) < 1e-12);
    let doubled_q = ResonatorSpec { q_loaded: 2.0 * spec.q_loaded, ..spec };
    let doubled_r = ResonatorSpec { radius: 2.0 * spec.radius, ..spec };
    let base = pgr_from_pump(&spec, 1e-3).unwrap();
    assert!(rel(pgr_from_pump(&doubled_q, 1e-3).unwrap() / base, 8.0) < 1e-12);
    assert!(rel(pgr_from_pump(&doubled_r, 1e-3).unwrap() / base, 0.25) < 1e-12);
}

proptest! {
    #[test]
    fn rate_is_quadratic_in_pump(spec in spec_strategy(), p in 1e-5f64..1e-3) {
        let a = pgr_from_pump(&spec, p).unwrap() / (p * p);
        let b = pgr_from_pump(&spec, 1e-3).unwrap() / 1e-6;
        prop_assert!(rel(a, b) < 1e-12);
    }

    #[test]
    fn rate_scales_as_q_cubed_over_r_squared(spec in spec_strategy(), k in 0.25f64..4.0) {
        let base = pgr_from_pump(&spec, 1e-3).unwrap();
        let q = ResonatorSpec { q_loaded: k * spec.q_loaded, ..spec };
        let r = ResonatorSpec { radius: k * spec.radius, ..spec };
        prop_assert!(rel(pgr_from_pump(&q, 1e-3).unwrap() / base, k.powi(3)) < 1e-12);
        prop_assert!(rel(pgr_from_pump(&r, 1e-3).unwrap() / base, k.powi(-2)) < 1e-12);
    }

    #[test]
    fn calibration_inverts_the_rate(spec in spec_strategy(), p in 1e-5f64..1e-2) {
        let target = pgr_from_pump(&spec, p).unwrap();
        let g = calibrate_gamma(&spec, target, p).unwrap();
        prop_assert!(rel(g, spec.gamma_eff) < 1e-12);
        prop_assert!(rel(pump_for_pgr(&spec, target).unwrap(), p) < 1e-12);
    }

    #[test]
    fn dip_is_symmetric(spec in spec_strategy(), delta in 0.0f64..1e-10) {
        let c = spec.pump_wavelength;
        let lo = lorentzian_transmission(&spec, c, c - delta);
        let hi = lorentzian_transmission(&spec, c, c + delta);
        prop_assert!((lo - hi).abs() < 1e-12);
    }
}
