use proptest::prelude::*;

use d2dpc::analysis::load_coded;
use d2dpc::delivery::{run_delivery, DemandVector};
use d2dpc::placement::{build_caches, build_placement, memory_check, Library, SchemeParams};
use d2dpc::session::measure_load;

fn instance() -> impl Strategy<Value = (usize, usize, usize, u64, Vec<usize>)> {
    (2usize..=4, 2usize..=3)
        .prop_flat_map(|(k, n)| {
            let u = (k - 1) * n;
            (
                Just(k),
                Just(n),
                1..=u + 1,
                any::<u64>(),
                proptest::collection::vec(1..=n, k),
            )
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn placement_and_delivery_invariants((k, n, t, seed, d) in instance()) {
        let params = SchemeParams::with_piece_bits(k, n, t, 3).unwrap();
        let lib = Library::random(n, params.b, params.piece_bits, seed ^ 0x5a5a).unwrap();
        let placement = build_placement(&params, seed).unwrap();
        let caches = build_caches(&params, &lib, &placement).unwrap();
        for c in &caches {
            memory_check(c, &params).unwrap();
        }

        let d = DemandVector::new(d, n).unwrap();
        let signals = run_delivery(&params, &lib, &placement, &d, seed).unwrap();
        prop_assert_eq!(signals.len(), k);
        for s in &signals {
            s.check_encoding(&caches[s.sender - 1]).unwrap();
            prop_assert_eq!(s.messages.len(), params.retained_messages_per_user());
            for m in &s.messages {
                prop_assert_eq!(m.composition.len(), t);
                prop_assert_eq!(m.payload.len(), params.piece_bits);
            }
        }
        prop_assert_eq!(measure_load(&signals, params.b), load_coded(k, n, t).unwrap().r);

        let again = run_delivery(&params, &lib, &placement, &d, seed).unwrap();
        prop_assert_eq!(signals, again);
    }
}
