//! Golden vectors for the two-user, three-file example with `M = 2`.
//!
//! With `p_{i,1} = (1,2,3)`, `p_{i,2} = (4,5,6)` and identity `q_k`, the six
//! multicast messages are known in closed form for the demand vectors `(1,2)`
//! and `(1,1)`. Messages are compared as sets keyed by the effective users
//! they serve, since their order within a signal carries no meaning.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::analysis::load_uncoded;
use crate::baselines::{uncoded_deliver, uncoded_place, UncodedPlan};
use crate::decoding::{gf2_decode, peel_decode, recover_file, ReceiverView};
use crate::delivery::{run_delivery_with, DemandVector, Signal, TransmissionDraws};
use crate::error::Result;
use crate::placement::{build_caches, Library, PieceRef, PlacementRecord, SchemeParams};
use crate::session::measure_load;
use crate::{ratio, Rational};

/// `(sender, served effective users) -> pieces XORed together`.
pub type MessageTable = BTreeMap<(usize, Vec<usize>), BTreeSet<PieceRef>>;

/// `(sender, served users, [(file, piece); 2])`.
type Row = (usize, [usize; 2], [(usize, usize); 2]);

fn table(entries: &[Row]) -> MessageTable {
    entries
        .iter()
        .map(|&(sender, users, pieces)| {
            (
                (sender, users.to_vec()),
                pieces.iter().map(|&(f, p)| PieceRef::new(f, p)).collect(),
            )
        })
        .collect()
}

/// Expected messages for `d = (1,2)`.
pub fn expected_messages_12() -> MessageTable {
    table(&[
        (1, [2, 3], [(2, 2), (1, 1)]),
        (1, [2, 4], [(2, 3), (3, 1)]),
        (1, [3, 4], [(1, 3), (3, 2)]),
        (2, [1, 3], [(1, 5), (2, 4)]),
        (2, [1, 4], [(1, 6), (3, 4)]),
        (2, [3, 4], [(2, 6), (3, 5)]),
    ])
}

/// Expected messages for `d = (1,1)`.
pub fn expected_messages_11() -> MessageTable {
    table(&[
        (1, [2, 3], [(1, 2), (2, 1)]),
        (1, [3, 4], [(2, 3), (3, 2)]),
        (1, [2, 4], [(1, 3), (3, 1)]),
        (2, [1, 3], [(1, 5), (2, 4)]),
        (2, [1, 4], [(1, 6), (3, 4)]),
        (2, [3, 4], [(2, 6), (3, 5)]),
    ])
}

pub fn example_params(piece_bits: usize) -> Result<SchemeParams> {
    SchemeParams::with_piece_bits(2, 3, 2, piece_bits)
}

pub fn example_placement(params: &SchemeParams) -> Result<PlacementRecord> {
    PlacementRecord::from_permutations(params, vec![vec![vec![1, 2, 3], vec![4, 5, 6]]; 3])
}

pub fn example_draws(params: &SchemeParams) -> Vec<TransmissionDraws> {
    (1..=params.k).map(|k| TransmissionDraws::identity(params, k)).collect()
}

/// Tabulates signals produced under `draws`.
pub fn message_table(signals: &[Signal], draws: &[TransmissionDraws]) -> MessageTable {
    let mut out = MessageTable::new();
    for s in signals {
        let q = &draws[s.sender - 1].q;
        for m in &s.messages {
            let mut users: Vec<usize> = m.index_set.iter().map(|&j| q[j - 1]).collect();
            users.sort_unstable();
            out.insert((s.sender, users), m.composition.iter().copied().collect());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check {
        name: name.into(),
        passed,
        detail,
    }
}

/// Runs every golden check with `B = 6 * piece_bits` and a library drawn
/// from `seed`.
pub fn run_selftest(piece_bits: usize, seed: u64) -> Result<Vec<Check>> {
    let params = example_params(piece_bits)?;
    let lib = Library::random(3, params.b, params.piece_bits, seed)?;
    let placement = example_placement(&params)?;
    let caches = build_caches(&params, &lib, &placement)?;
    let draws = example_draws(&params);
    let mut checks = Vec::new();

    for (d, expected) in [
        (vec![1, 2], expected_messages_12()),
        (vec![1, 1], expected_messages_11()),
    ] {
        let dv = DemandVector::for_params(d.clone(), &params)?;
        let signals = run_delivery_with(&params, &lib, &placement, &dv, &draws)?;
        let got = message_table(&signals, &draws);
        checks.push(check(
            &format!("messages {dv}"),
            got == expected,
            format!("{} messages", got.len()),
        ));
        let load = measure_load(&signals, params.b);
        checks.push(check(&format!("load {dv}"), load == ratio(1, 1), format!("R = {load}")));
        let mut decoded_all = true;
        for c in &caches {
            let view = ReceiverView {
                user: c.user,
                demand: dv.of(c.user),
                pieces_per_file: params.pieces_per_file,
                piece_bits: params.piece_bits,
                cache: c,
                signals: &signals,
            };
            let gf2 = gf2_decode(&view).and_then(|x| recover_file(&view, &x));
            let peel = peel_decode(&view);
            decoded_all &= gf2.map(|f| f == lib.file(view.demand)).unwrap_or(false)
                && peel.complete
                && recover_file(&view, &peel.decoded).map(|f| f == lib.file(view.demand)).unwrap_or(false);
        }
        checks.push(check(&format!("decode {dv}"), decoded_all, String::new()));
    }

    let m: Rational = ratio(2, 1);
    let plan = UncodedPlan::new(2, 3, m.clone(), params.b)?;
    let ulib = Library::random(3, params.b, plan.unit_bits, seed)?;
    let ucaches = uncoded_place(&plan, &ulib)?;
    let usignals = uncoded_deliver(&plan, &ucaches)?;
    let uload = measure_load(&usignals, params.b);
    checks.push(check(
        "uncoded load",
        uload == ratio(2, 1) && load_uncoded(2, 3, &m)?.r == uload,
        format!("R = {uload}"),
    ));
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_golden_checks_pass() {
        for pb in [1, 3] {
            let checks = run_selftest(pb, 5).unwrap();
            assert_eq!(checks.len(), 7);
            for c in checks {
                assert!(c.passed, "{c:?}");
            }
        }
    }
}
