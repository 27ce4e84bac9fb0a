//! Property tests of structural invariants.

use proptest::prelude::*;

use weyl_principal::canonical::normalized_pair;
use weyl_principal::classify::{normalized_det, positivity_class, PositivityClass};
use weyl_principal::cli::parse_complex;
use weyl_principal::greens::greens_kernel;
use weyl_principal::ladder::LadderParams;
use weyl_principal::linalg::{self, C64};
use weyl_principal::problem::{builtins, Endpoint, Side, SpectralParameter};
use weyl_principal::quasi::{wronskian, QuasiState, WronskianForm};
use weyl_principal::weyl::{alpha_mobius, m_limit, WeylParams};

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig { cases, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg(24))]

    #[test]
    fn wronskian_of_normalized_pair_is_one(re in -4.0f64..4.0, im in -2.0f64..2.0, q0 in -1.0f64..1.0, x in -3.0f64..3.0) {
        let p = builtins::scalar_exponential(Endpoint::minus_infinity(), Endpoint::plus_infinity(), 0.0, q0, 0.3);
        let pair = normalized_pair(&p, SpectralParameter::new(re, im), 0.0, &[x], 1e-12).unwrap();
        let t = pair.theta.state_at(&p, x).unwrap();
        let f = pair.phi.state_at(&p, x).unwrap();
        let w = wronskian(&t.unscaled(), &f.unscaled(), WronskianForm::Plain).unwrap()[(0, 0)];
        prop_assert!((w - C64::new(1.0, 0.0)).norm() < 1e-8 * (1.0 + t.u_true().norm() * f.v_true().norm()));
    }

    #[test]
    fn m_plus_is_herglotz_and_conjugate_symmetric(re in -5.0f64..5.0, im in 0.2f64..3.0) {
        let p = builtins::free_line();
        let params = LadderParams::default();
        let m = m_limit(&p, SpectralParameter::new(re, im), Side::Plus, &params).unwrap().value[(0, 0)];
        let mb = m_limit(&p, SpectralParameter::new(re, -im), Side::Plus, &params).unwrap().value[(0, 0)];
        prop_assert!(m.im > 0.0);
        prop_assert!((m - mb.conj()).norm() < 1e-8);
    }

    #[test]
    fn greens_function_is_symmetric(x in -2.5f64..2.5, xp in -2.5f64..2.5, re in -3.0f64..3.0, im in 0.3f64..2.0) {
        let p = builtins::free_line();
        let k = greens_kernel(&p, SpectralParameter::new(re, im), -3.0, 3.0, &WeylParams::default()).unwrap();
        let (a, b) = (k.eval(&p, x, xp).unwrap(), k.eval(&p, xp, x).unwrap());
        prop_assert!((a - b).norm() <= 1e-12 * (1.0 + a.norm()));
    }
}

proptest! {
    #![proptest_config(cfg(256))]

    #[test]
    fn complex_numbers_round_trip(re in -1e6f64..1e6, im in -1e6f64..1e6) {
        let text = if im < 0.0 { format!("{re:e}{im:e}i") } else { format!("{re:e}+{im:e}i") };
        prop_assert_eq!(parse_complex(&text).unwrap(), C64::new(re, im));
    }

    #[test]
    fn mobius_at_zero_angle_is_identity_and_pi_half_inverts(re in -3.0f64..3.0, im in 0.1f64..3.0) {
        let m = C64::new(re, im);
        prop_assert!((alpha_mobius(m, 0.0) - m).norm() < 1e-12 * (1.0 + m.norm()));
        let inv = alpha_mobius(m, std::f64::consts::FRAC_PI_2);
        prop_assert!((inv + 1.0 / m).norm() < 1e-12 * (1.0 + inv.norm()));
    }

    #[test]
    fn normalized_det_ignores_right_factors(entries in prop::collection::vec(-2.0f64..2.0, 16), k in prop::collection::vec(-2.0f64..2.0, 4)) {
        let u = linalg::from_real(2, 2, &entries[..4]);
        let v = linalg::from_real(2, 2, &entries[4..8]);
        let f = linalg::from_real(2, 2, &k);
        prop_assume!(linalg::det(&f).norm() > 1e-2);
        let s = QuasiState::new(0.0, u.clone(), v.clone());
        let t = QuasiState::new(0.0, &u * &f, &v * &f);
        prop_assert!((normalized_det(&s) - normalized_det(&t)).abs() < 1e-9);
        prop_assert!(normalized_det(&s) <= 1.0 + 1e-12);
    }

    #[test]
    fn improving_plus_nonnegative_stays_improving(a in prop::collection::vec(0.01f64..5.0, 4), b in prop::collection::vec(0.0f64..5.0, 4)) {
        let sum: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        prop_assert_eq!(positivity_class(&linalg::from_real(2, 2, &a)).unwrap(), PositivityClass::Improving);
        prop_assert_eq!(positivity_class(&linalg::from_real(2, 2, &sum)).unwrap(), PositivityClass::Improving);
    }
}
