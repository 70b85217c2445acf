use splitree::fixpoint::check_contraction;
use splitree::ModelSpec;

#[test]
fn bst_ratios_sit_below_the_root_of_the_second_moment() {
    let rep = check_contraction(&ModelSpec::bst(), 8, 50_000, 2).unwrap();
    let sharp = (2.0f64 / 3.0).sqrt();
    assert_eq!(rep.records.len(), 8);
    assert!(rep.max_ratio() <= sharp + 0.05, "{}", rep.max_ratio());
    assert!(rep.records.iter().all(|r| r.ratio > 0.5));
}

#[test]
fn trie_ratio_is_root_sum_of_squares() {
    let p = [0.7, 0.3];
    let rep = check_contraction(&ModelSpec::trie(&p).unwrap(), 4, 50_000, 3).unwrap();
    let sharp = (p[0] * p[0] + p[1] * p[1]).sqrt();
    for r in &rep.records {
        assert!((r.ratio - sharp).abs() < 0.03, "{} vs {sharp}", r.ratio);
    }
}
