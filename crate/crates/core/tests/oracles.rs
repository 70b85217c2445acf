//! Values checked against oracles computed here, independently of the
//! library's own numerics.

use splitree::constants::compute_constants;
use splitree::experiments::depth_clt_check;
use splitree::fixpoint::{iterate_to_fixpoint, quicksort_fixpoint};
use splitree::rng::substream;
use splitree::split::sample_insertion_depth;
use splitree::ModelSpec;

/// Midpoint rule on (0, 1); fine enough for integrands with `x ln x`
/// endpoint behaviour.
fn midpoint(f: impl Fn(f64) -> f64) -> f64 {
    let m = 1_000_000;
    let h = 1.0 / m as f64;
    (0..m).map(|i| f((i as f64 + 0.5) * h)).sum::<f64>() * h
}

fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

#[test]
fn quicksort_constants_from_quadrature() {
    let toll = |u: f64| 1.0 + 2.0 * (xlnx(u) + xlnx(1.0 - u));
    let e_c2 = midpoint(|u| toll(u).powi(2));
    let zeta = e_c2 / (1.0 - 2.0 / 3.0);
    assert!((zeta - 0.420_263_7).abs() < 1e-6);
    let c = compute_constants(&ModelSpec::bst()).unwrap();
    assert!((c.zeta - zeta).abs() < 1e-6);
}

#[test]
fn quicksort_limit_is_right_skewed() {
    // E[Y^3] (1 - E[U^3 + (1-U)^3]) = E[C^3] + 3 zeta E[(U^2 + (1-U)^2) C]
    let toll = |u: f64| 1.0 + 2.0 * (xlnx(u) + xlnx(1.0 - u));
    let zeta = midpoint(|u| toll(u).powi(2)) * 3.0;
    let third =
        (midpoint(|u| toll(u).powi(3)) + 3.0 * zeta * midpoint(|u| (u * u + (1.0 - u).powi(2)) * toll(u))) / 0.5;
    let apery = 1.202_056_903_159_594_3;
    assert!((third - (16.0 * apery - 19.0)).abs() < 1e-5, "{third}");
    assert!(third > 0.0);

    for seed in [1, 2, 3] {
        let run = quicksort_fixpoint(100_000, 5e-3, 60, seed).unwrap();
        assert!((run.third_central_moment - third).abs() < 0.04, "{}", run.third_central_moment);
    }
}

#[test]
fn constants_of_other_presets() {
    let m3 = compute_constants(&ModelSpec::mary(3).unwrap()).unwrap();
    assert!((m3.mu - (1.0 + 0.5 + 1.0 / 3.0 - 1.0)).abs() < 1e-8);
    assert!((m3.contraction_factor - 0.5).abs() < 1e-8);

    let med = compute_constants(&ModelSpec::median_of(1).unwrap()).unwrap();
    // b E[-V ln V] with V ~ Beta(2, 2), density 6v(1-v)
    let mu = 2.0 * midpoint(|v| -xlnx(v) * 6.0 * v * (1.0 - v));
    assert!((med.mu - mu).abs() < 1e-6 && (mu - 7.0 / 12.0).abs() < 1e-6);

    let q2 = compute_constants(&ModelSpec::quadtree(2).unwrap()).unwrap();
    assert!((q2.mu - 1.0).abs() < 1e-6);
    assert!((q2.sigma2 - 0.5).abs() < 1e-6);
    assert!((q2.contraction_factor - 4.0 / 9.0).abs() < 1e-6);

    let lat = compute_constants(&ModelSpec::lattice_example()).unwrap();
    assert!((lat.mu - 1.75 * std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn bst_insertion_depth_mean() {
    // Classical insertion depth is 2(H_n - 1); the arriving item stays put
    // with probability 1/2 when its parent is a leaf, which happens with
    // probability 2/3.
    let n = 2_000u64;
    let h: f64 = (1..=n).map(|k| 1.0 / k as f64).sum();
    let oracle = 2.0 * (h - 1.0) - 1.0 / 3.0;
    let bst = ModelSpec::bst();
    let d: Vec<f64> =
        (0..40_000u64).map(|r| f64::from(sample_insertion_depth(n, &bst, &mut substream(6, &[r])).unwrap())).collect();
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (d.len() - 1) as f64;
    assert!((mean - oracle).abs() < 4.0 * (var / d.len() as f64).sqrt(), "{mean} vs {oracle}");
}

#[test]
fn digital_case_is_degenerate() {
    let trie = ModelSpec::trie(&[0.5, 0.5]).unwrap();
    let fp = iterate_to_fixpoint(&trie, 1_000, 1e-3, 10, 0).unwrap();
    assert_eq!(fp.variance, 0.0);
    assert!(fp.distribution.samples().iter().all(|&x| x == 0.0));
    assert!(depth_clt_check(&trie, 1_000, 100, 0).is_err());
}
