//! Invariants over random drives, on short Volterra runs.

use floquet_decay::timedomain::volterra_survival;
use floquet_decay::ModelConfig;
use proptest::prelude::*;

fn config(pair: bool, a: f64, r: f64, omega: f64) -> ModelConfig {
    if pair {
        ModelConfig::u2(a, r, omega).unwrap()
    } else {
        ModelConfig::u1(a, r, omega).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn survival_amplitude_is_bounded(pair: bool, a in 0.2f64..2.5, r in 0.0f64..1.5, omega in 0.3f64..3.0) {
        let tr = volterra_survival(&config(pair, a, r, omega), 10.0, 0.02).unwrap();
        for z in &tr.theta {
            prop_assert!(z.norm() <= 1.0 + 1e-6, "{}", z.norm());
        }
    }

    #[test]
    fn pair_survival_is_even_in_r(a in 0.2f64..2.5, r in 0.05f64..1.5, omega in 0.3f64..3.0) {
        let cfg = ModelConfig::u2(a, r, omega).unwrap();
        let up = volterra_survival(&cfg, 10.0, 0.02).unwrap();
        let down = volterra_survival(&cfg.with_r(-r), 10.0, 0.02).unwrap();
        for (p, m) in up.theta.iter().zip(&down.theta) {
            prop_assert!((p.norm_sqr() - m.norm_sqr()).abs() < 1e-12);
        }
    }

    #[test]
    fn undriven_state_only_rotates(pair: bool, a in 0.2f64..2.5, omega in 0.3f64..3.0) {
        let tr = volterra_survival(&config(pair, a, 0.0, omega), 10.0, 0.02).unwrap();
        for (t, z) in tr.t_grid.iter().zip(&tr.theta) {
            prop_assert!((z.norm_sqr() - 1.0).abs() < 1e-10, "t={t}: {}", z.norm_sqr());
        }
    }
}
