use d2dpc::audit::{
    audit_colluding, audit_privacy, range_constant_library, view_distribution, AuditOptions,
    KeyKind,
};
use d2dpc::delivery::DemandVector;
use d2dpc::placement::{Library, SchemeParams};

#[test]
fn singleton_colluding_audit_is_the_plain_audit() {
    let p = SchemeParams::with_piece_bits(2, 2, 2, 1).unwrap();
    let lib = Library::random(2, p.b, 1, 12).unwrap();
    let opts = AuditOptions::exhaustive();
    for k in 1..=2 {
        assert_eq!(
            audit_privacy(&p, &lib, k, &opts).unwrap(),
            audit_colluding(&p, &lib, &[k], &opts).unwrap()
        );
    }
}

#[test]
fn sampled_mode_is_self_consistent_across_seeds() {
    let p = SchemeParams::with_piece_bits(2, 3, 2, 1).unwrap();
    let lib = range_constant_library(&p, 4).unwrap();
    let d = DemandVector::new(vec![2, 3], 3).unwrap();
    let a = view_distribution(&p, &lib, &d, &[1], &AuditOptions::sampled(40_000, 1)).unwrap();
    let b = view_distribution(&p, &lib, &d, &[1], &AuditOptions::sampled(40_000, 2)).unwrap();
    let tv: f64 = num::ToPrimitive::to_f64(&a.total_variation(&b)).unwrap();
    assert!(tv < 0.03, "tv {tv}");
}

#[test]
fn exhaustive_audit_of_colluding_pair_is_vacuous_for_two_users() {
    let p = SchemeParams::with_piece_bits(2, 2, 1, 1).unwrap();
    let lib = Library::random(2, p.b, 1, 3).unwrap();
    let r = audit_colluding(&p, &lib, &[1, 2], &AuditOptions::exhaustive().with_key(KeyKind::Relabeled)).unwrap();
    assert!(r.pairs.is_empty() && r.passed());
}

#[test]
fn report_serializes_to_the_documented_shape() {
    let p = SchemeParams::with_piece_bits(2, 2, 1, 1).unwrap();
    let lib = Library::random(2, p.b, 1, 3).unwrap();
    let r = audit_privacy(&p, &lib, 1, &AuditOptions::exhaustive()).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["observer"], serde_json::json!([1]));
    assert_eq!(v["mode"]["kind"], "exhaustive");
    let pair = &v["pairs"][0];
    for field in ["d", "d_prime", "distance", "verdict"] {
        assert!(pair.get(field).is_some(), "missing {field}");
    }
}
