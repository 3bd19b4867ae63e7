use bsde_core::inequalities::{bihari_bound, divergence_test, gronwall_bound, linear_envelope, Divergence};
use bsde_core::Modulus;
use proptest::prelude::*;

fn modulus() -> impl Strategy<Value = Modulus> {
    prop_oneof![
        (0.1f64..3.0).prop_map(|a| Modulus::Linear { a }),
        (0.2f64..2.0, 0.3f64..1.0).prop_map(|(c, e)| Modulus::Power { c, e }),
        (0.02f64..0.35, 0.5f64..2.0).prop_map(|(delta, scale)| Modulus::LogOsgood { delta, scale }),
        (0.02f64..0.35, 1.5f64..4.0, 0.5f64..2.0).prop_map(|(delta, p, scale)| Modulus::LogRoot { delta, p, scale }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn bihari_is_nondecreasing(rho in modulus(), u0 in 0.01f64..5.0, du in 0.0f64..2.0, tau in 0.0f64..2.0, dt in 0.0f64..1.0) {
        let base = bihari_bound(u0, &rho, tau).unwrap();
        let slack = 1e-9 * base;
        prop_assert!(bihari_bound(u0 + du, &rho, tau).unwrap() >= base - slack);
        prop_assert!(bihari_bound(u0, &rho, tau + dt).unwrap() >= base - slack);
        prop_assert!(base >= u0 * (1.0 - 1e-12));
    }

    #[test]
    fn linear_bihari_is_gronwall(a in 0.0f64..4.0, u0 in 0.0f64..10.0, tau in 0.0f64..3.0) {
        let g = gronwall_bound(u0, a, tau).unwrap();
        let b = if a == 0.0 { u0 } else { bihari_bound(u0, &Modulus::linear(a), tau).unwrap() };
        prop_assert!((b - g).abs() <= 1e-6 * g.max(f64::MIN_POSITIVE), "{} vs {}", b, g);
    }

    #[test]
    fn envelope_dominates(rho in modulus(), m in 1u32..200, x in 0.0f64..50.0) {
        prop_assert!(linear_envelope(&rho, m, x) >= rho.eval(x) * (1.0 - 1e-12));
    }
}

#[test]
fn closed_form_divergence_verdicts() {
    assert_eq!(
        divergence_test(&Modulus::linear(1.0), 1.0).unwrap(),
        Divergence::Diverges
    );
    assert_eq!(
        divergence_test(&Modulus::Power { c: 1.0, e: 0.5 }, 1.0).unwrap(),
        Divergence::Converges
    );
    assert_eq!(
        divergence_test(&Modulus::log_osgood(0.1), 1.0).unwrap(),
        Divergence::Diverges
    );
}
