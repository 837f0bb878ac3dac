use proptest::prelude::*;

use surfwave::dispersion::{
    dispersion_residual, find_roots, sigma_of, ParameterCase, PhysicalConfig, Regime,
};

fn config() -> impl Strategy<Value = PhysicalConfig> {
    (-3.0..3.0f64, 0.0..4.0f64, -3.0..3.0f64, 0.3..3.0f64)
        .prop_map(|(v, b, h, nu)| PhysicalConfig::new(v, b, h, nu).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn roots_solve_the_relation(cfg in config()) {
        for r in find_roots(&cfg).unwrap() {
            if r.regime == Regime::BoundaryRoot {
                prop_assert!((cfg.nu * r.lambda.abs() - 1.0).abs() <= 1e-12);
                continue;
            }
            prop_assert!(cfg.nu * r.lambda.abs() < 1.0);
            let res = dispersion_residual(r.lambda, &cfg).unwrap();
            prop_assert!(res.abs() <= 1e-10 * (1.0 + r.d.abs()), "residual {res}");
            let expected_d = cfg.h1 * cfg.h1 * sigma_of(r.lambda, cfg.nu).unwrap();
            prop_assert!((r.d - expected_d).abs() <= 1e-10 * expected_d.abs().max(1.0));
        }
    }

    #[test]
    fn root_count_matches_regime(cfg in config()) {
        let roots = find_roots(&cfg).unwrap();
        match roots.first().map(|r| r.regime) {
            None => prop_assert!(matches!(cfg.parameter_case(), ParameterCase::FieldDominated | ParameterCase::FlowDominated | ParameterCase::Intermediate)),
            Some(Regime::OneRoot) | Some(Regime::DoubleRoot) => prop_assert_eq!(roots.len(), 1),
            Some(Regime::TwoRoots) => prop_assert_eq!(roots.len(), 2),
            Some(Regime::BoundaryRoot) => prop_assert_eq!(cfg.parameter_case(), ParameterCase::Boundary),
            Some(Regime::NoRoot) => prop_assert!(false, "NoRoot tag on a root"),
        }
        if cfg.parameter_case() == ParameterCase::FieldDominated {
            prop_assert!(roots.is_empty());
        }
    }

    #[test]
    fn boundary_case_sits_on_light_cone(v in -3.0..3.0f64, h in 0.1..3.0f64, nu in 0.3..3.0f64) {
        let cfg = PhysicalConfig::new(v, v.abs() + 1.0 / nu, h, nu).unwrap();
        let roots = find_roots(&cfg).unwrap();
        prop_assert!(!roots.is_empty());
        for r in roots {
            prop_assert_eq!(r.regime, Regime::BoundaryRoot);
            prop_assert!(!r.is_usable());
            prop_assert!((r.lambda.abs() - 1.0 / nu).abs() <= 1e-12);
        }
    }
}
