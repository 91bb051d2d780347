mod common;

use fourthdown::bootstrap::{BootstrapEnsemble, GridMode};

#[test]
fn save_load_round_trip_preserves_fingerprint_and_reports() {
    let f = common::fixture();
    let dir = tempfile::tempdir().unwrap();
    let manifest = f.ensemble.save(dir.path()).unwrap();
    assert_eq!(manifest.b, 7);
    assert_eq!(manifest.ensemble_fingerprint, f.ensemble.fingerprint().unwrap());

    let loaded = BootstrapEnsemble::load(dir.path()).unwrap();
    assert_eq!(loaded.fingerprint().unwrap(), manifest.ensemble_fingerprint);
    for (y, z) in [(36, 2), (60, 4), (8, 3), (85, 10)] {
        let s = common::state(y, z);
        let a = f.ensemble.report(&s, 0.9).unwrap();
        let b = loaded.report(&s, 0.9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

#[test]
fn tampered_replicate_is_rejected_on_load() {
    let f = common::fixture();
    let dir = tempfile::tempdir().unwrap();
    f.ensemble.save(dir.path()).unwrap();
    std::fs::copy(dir.path().join("point.model"), dir.path().join("rep_000.model")).unwrap();
    assert!(BootstrapEnsemble::load(dir.path()).is_err());
}

#[test]
fn prefix_keeps_leading_replicates() {
    let f = common::fixture();
    let p = f.ensemble.prefix(3).unwrap();
    assert_eq!(p.b(), 3);
    let s = common::state(40, 3);
    let full = f.ensemble.replicate_values(&s).unwrap();
    let head = p.replicate_values(&s).unwrap();
    for (a, b) in full.iter().zip(&head) {
        assert_eq!(a.wp_go, b.wp_go);
    }
    assert!(f.ensemble.prefix(0).is_err());
    assert!(f.ensemble.prefix(8).is_err());
}

#[test]
fn report_is_internally_consistent() {
    let f = common::fixture();
    for (y, z) in [(36, 2), (50, 1), (70, 8), (3, 3), (95, 15)] {
        let r = f.ensemble.report(&common::state(y, z), 0.9).unwrap();
        assert_eq!(r.gains.len(), 7);
        assert!(r.ci_lo <= r.ci_hi);
        assert!((0.0..=100.0).contains(&r.boot_pct));
    }
}

#[test]
fn boundary_modes_differ_only_in_boot_pct() {
    let f = common::fixture();
    let template = common::state(50, 1);
    let point = f.ensemble.boundary(&template, 30..=40, 1..=5, GridMode::Point).unwrap();
    let boot = f.ensemble.boundary(&template, 30..=40, 1..=5, GridMode::Boot).unwrap();
    assert_eq!(point.len(), boot.len());
    for (p, b) in point.iter().zip(&boot) {
        let (Some(pv), Some(bv)) = (&p.value, &b.value) else {
            assert!(p.value.is_none() && b.value.is_none());
            continue;
        };
        assert_eq!(pv.best, bv.best);
        assert!(pv.boot_pct.is_none());
        assert!(bv.boot_pct.is_some());
    }
}
