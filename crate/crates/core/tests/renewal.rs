use std::f64::consts::LN_2;

use splitree::renewal::{
    overshoot_classes, renewal_u, top_contribution, vlem_integral, FringeConfig, RenewalConfig, RenewalMethod,
};
use splitree::ModelSpec;

#[test]
fn enumeration_and_tilted_walks_agree_on_bst() {
    let bst = ModelSpec::bst();
    let mut be = RenewalConfig::new(10.0, 0.5, RenewalMethod::BranchingEnumeration, 3);
    be.replicas = 40;
    let enumerated = renewal_u(&bst, &be).unwrap();
    let walks = renewal_u(&bst, &RenewalConfig::new(10.0, 0.5, RenewalMethod::TiltedWalkMc, 3)).unwrap();
    for (i, &t) in enumerated.t.iter().enumerate() {
        if t < 2.0 {
            continue;
        }
        let exact = 2.0 - 2.0 * (-t).exp();
        let (a, b) = (enumerated.u_hat[i], walks.u_hat[i]);
        let se = enumerated.se[i].hypot(walks.se[i]);
        assert!((a - b).abs() <= 4.0 * se + 1e-3, "t={t}: {a} vs {b} (se {se})");
        assert!((b - exact).abs() <= 4.0 * walks.se[i] + 1e-3, "t={t}: {b} vs {exact}");
    }
}

#[test]
fn lattice_renewal_is_periodic() {
    let lattice = ModelSpec::lattice_example();
    let mut cfg = RenewalConfig::new(10.0, 0.05, RenewalMethod::BranchingEnumeration, 5);
    cfg.replicas = 200;
    let tab = renewal_u(&lattice, &cfg).unwrap();
    for k in 8..12 {
        let t = (k as f64 + 0.5) * LN_2;
        let (a, b) = (tab.u_hat_at(t).unwrap(), tab.u_hat_at(t + LN_2).unwrap());
        assert!((a - b).abs() < 0.02 * a, "{t}: {a} vs {b}");
    }
    // within one period the sawtooth is far from flat
    let lo = tab.u_hat_at(9.0 * LN_2 + 0.05).unwrap();
    let hi = tab.u_hat_at(10.0 * LN_2 - 0.05).unwrap();
    assert!(lo / hi > 1.5, "{lo} {hi}");
    assert!(vlem_integral(&lattice, 6.0, &tab).is_ok());
}

#[test]
fn bst_vlem_approaches_minus_two() {
    let bst = ModelSpec::bst();
    let mut cfg = RenewalConfig::new(8.0, 0.05, RenewalMethod::BranchingEnumeration, 9);
    cfg.replicas = 1_000;
    let tab = renewal_u(&bst, &cfg).unwrap();
    for x in [1.0f64, 4.0, 8.0] {
        let exact = -2.0 * (1.0 - (-x).exp());
        let v = vlem_integral(&bst, x, &tab).unwrap();
        assert!((v - exact).abs() < 0.06, "x={x}: {v} vs {exact}");
    }
}

#[test]
fn top_of_tree_grows_by_two_ln_two_per_doubling() {
    let bst = ModelSpec::bst();
    let big_b = 50.0;
    let mut prev: Option<f64> = None;
    for n in [50_000u64, 100_000, 200_000] {
        let (est, se) = top_contribution(&bst, n, big_b, 300, 4).unwrap();
        let per_item = est / n as f64;
        if let Some(p) = prev {
            let step = per_item - p;
            assert!((step - 2.0 * LN_2).abs() < 4.0 * (2.0f64).sqrt() * se / n as f64 + 0.02, "{step}");
        }
        prev = Some(per_item);
    }
}

#[test]
fn overshoot_masses_are_flat_for_bst() {
    let cfg = FringeConfig { n: 100_000, big_b: 100.0, gamma: 0.1, eps: 0.3, replicas: 50, seed: 1 };
    let h = overshoot_classes(&ModelSpec::bst(), &cfg).unwrap();
    for (m, se) in h.mass.iter().zip(&h.se) {
        assert!((m - 0.2).abs() <= 4.0 * se, "{m} +- {se}");
    }
    assert!(h.total() <= 4.0);
}
