//! Bound-suite plumbing: skips, reports and serialization.

use gridmetric::corpus::{equal_center_pairs, random_pairs};
use gridmetric::equivalence::{
    run_suite, to_json, write_csv, BoundReport, CheckConfig, LabeledPair,
};
use gridmetric::GridMeasure;

#[test]
fn mass_mismatched_pair_is_skipped_and_suite_continues() {
    let mut pairs = random_pairs(3, 2, 4, 3, "ok");
    let half: Vec<f64> = pairs[0].nu.weights().iter().map(|w| 0.5 * w).collect();
    pairs.insert(
        1,
        LabeledPair {
            id: "light".into(),
            mu: pairs[0].mu.clone(),
            nu: GridMeasure::new(2, 4, half).unwrap(),
        },
    );
    let res = run_suite(&pairs, &CheckConfig::default());
    let note = res.skipped.iter().find(|s| s.pair_id == "light").unwrap();
    assert!(note.reason.contains("masses differ"), "{}", note.reason);
    assert!(res.reports.iter().all(|r| r.pair_id != "light"));
    for id in ["ok0", "ok1", "ok2"] {
        assert_eq!(res.reports.iter().filter(|r| r.pair_id == id).count(), 4);
    }
    assert!(res.all_converged_pass());
}

#[test]
fn equal_center_pairs_get_all_six_bounds() {
    let pairs = equal_center_pairs(5, 6, 4, "e");
    let res = run_suite(&pairs, &CheckConfig::default());
    assert!(res.skipped.is_empty(), "{:?}", res.skipped);
    assert_eq!(res.reports.len(), 24);
    assert!(res.all_converged_pass());
}

#[test]
fn translated_variant_covers_unequal_centers() {
    let pairs = random_pairs(9, 2, 4, 4, "t");
    let cfg = CheckConfig {
        translated_f22: true,
        ..CheckConfig::default()
    };
    let res = run_suite(&pairs, &cfg);
    let lower = res
        .reports
        .iter()
        .filter(|r| r.bound_name == "w2sq_le_c_f22")
        .count();
    assert_eq!(lower, 4);
    // the 2√2 upper bound needs equal centers and stays skipped
    assert_eq!(
        res.skipped
            .iter()
            .filter(|s| s.check == "f22_le_c_w2")
            .count(),
        4
    );
}

#[test]
fn csv_and_json_round_trip() {
    let res = run_suite(&equal_center_pairs(1, 4, 2, "j"), &CheckConfig::default());
    let mut buf = Vec::new();
    write_csv(&mut buf, &res.reports).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "bound_name,N,pair_id,lhs,rhs,constant,slack,converged,pass"
    );
    assert_eq!(lines.count(), res.reports.len());
    let back: Vec<BoundReport> = serde_json::from_str(&to_json(&res.reports).unwrap()).unwrap();
    assert_eq!(back, res.reports);
    assert!(to_json(&res.reports).unwrap().contains("\"N\": 4"));
}
