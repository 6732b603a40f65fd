//! Trusted-server delivery logic.
//!
//! The D2D delivery is split into K shared-link transmissions. In
//! transmission `k` user `k` acts as the server for the `U` effective users
//! `[U+1] \ {k}`: the real users keep their demands, virtual users are
//! assigned files so that every file has exactly `K-1` demanders, one leader
//! per file is drawn, and the effective users are relabelled by a secret
//! permutation `q_k`. For every `t`-subset `S` of positions `[U]`,
//! `S' = q_k(S)` and
//!
//! ```text
//! W^k_S = XOR_{j in S} f^k_{ d^k(q_k(j)), S' \ {q_k(j)} }
//! ```
//!
//! Only messages with `S' ∩ L_k ≠ ∅` are retained.
//!
//! The server never touches payloads: it emits a [`Query`] listing global
//! piece indices, and the sending user turns it into a [`Signal`] using its
//! own cache ([`encode_signal`]).

use serde::Serialize;

use crate::bits::{Bits, BitsRef};
use crate::combinatorics::{derive_stream, lex_subsets, random_permutation, Purpose, StreamLabel};
use crate::error::{Error, Result};
use crate::placement::{CacheState, Library, PieceRef, PlacementRecord, SchemeParams};

/// `(d_1, …, d_K)`, 1-based file indices.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DemandVector(Vec<usize>);

impl DemandVector {
    pub fn new(demands: Vec<usize>, n: usize) -> Result<Self> {
        if let Some(&bad) = demands.iter().find(|&&d| d == 0 || d > n) {
            return Err(Error::InvalidArgument(format!(
                "demand {bad} outside [1 : {n}]"
            )));
        }
        Ok(Self(demands))
    }

    pub fn for_params(demands: Vec<usize>, params: &SchemeParams) -> Result<Self> {
        if demands.len() != params.k {
            return Err(Error::InvalidArgument(format!(
                "demand vector has {} entries, expected K = {}",
                demands.len(),
                params.k
            )));
        }
        Self::new(demands, params.n)
    }

    /// Demand of real user `user` (1-based).
    pub fn of(&self, user: usize) -> usize {
        self.0[user - 1]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// All `N^K` demand vectors in lexicographic order.
    pub fn all(k: usize, n: usize) -> Vec<DemandVector> {
        let total = n.pow(k as u32);
        (0..total)
            .map(|mut idx| {
                let mut d = vec![0; k];
                for slot in d.iter_mut().rev() {
                    *slot = idx % n + 1;
                    idx /= n;
                }
                DemandVector(d)
            })
            .collect()
    }
}

impl std::fmt::Display for DemandVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

/// Demands of the effective users of transmission `owner`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EffectiveDemands {
    pub owner: usize,
    /// indexed by effective-user label; slot 0 and slot `owner` are unused (0)
    demands: Vec<usize>,
    /// `n_{i,owner}` for `i = 1..=N`, at index `i-1`
    pub real_counts: Vec<usize>,
}

impl EffectiveDemands {
    pub fn demand_of(&self, user: usize) -> usize {
        self.demands[user]
    }

    /// `(effective user, file)` pairs in ascending user order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.demands
            .iter()
            .enumerate()
            .filter(|&(_, &f)| f != 0)
            .map(|(u, &f)| (u, f))
    }

    /// Effective users demanding `file`, ascending.
    pub fn demanders(&self, file: usize) -> Vec<usize> {
        self.iter().filter(|&(_, f)| f == file).map(|(u, _)| u).collect()
    }
}

pub fn assign_virtual_demands(
    params: &SchemeParams,
    d: &DemandVector,
    owner: usize,
) -> Result<EffectiveDemands> {
    if d.len() != params.k {
        return Err(Error::Inconsistent(format!(
            "demand vector length {} != K = {}",
            d.len(),
            params.k
        )));
    }
    if owner == 0 || owner > params.k {
        return Err(Error::InvalidArgument(format!("no user {owner}")));
    }
    let (k, n) = (params.k, params.n);
    let mut demands = vec![0usize; params.u + 2];
    let mut real_counts = vec![0usize; n];
    for user in (1..=k).filter(|&v| v != owner) {
        demands[user] = d.of(user);
        real_counts[d.of(user) - 1] += 1;
    }
    // virtual users K+1.. get file i on the block
    // [1 + K + (i-1)(K-1) - sum_{q<i} n_q : K + i(K-1) - sum_{q<=i} n_q]
    let mut assigned_before = 0usize;
    for i in 1..=n {
        let first = 1 + k + (i - 1) * (k - 1) - assigned_before;
        assigned_before += real_counts[i - 1];
        let last = k + i * (k - 1) - assigned_before;
        for slot in demands.iter_mut().take(last + 1).skip(first) {
            *slot = i;
        }
    }
    let eff = EffectiveDemands {
        owner,
        demands,
        real_counts,
    };
    debug_assert!((1..=n).all(|i| eff.demanders(i).len() == k - 1));
    Ok(eff)
}

/// `L_owner`: one leader per file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeaderSet {
    pub owner: usize,
    /// leader of file `i` at index `i-1`
    pub leaders: Vec<usize>,
}

impl LeaderSet {
    /// `choices[i-1]` indexes the ascending demander list of file `i`.
    pub fn from_choices(eff: &EffectiveDemands, n: usize, choices: &[usize]) -> Result<Self> {
        if choices.len() != n {
            return Err(Error::Inconsistent(format!(
                "{} leader choices for {n} files",
                choices.len()
            )));
        }
        let leaders = (1..=n)
            .map(|i| {
                let demanders = eff.demanders(i);
                demanders.get(choices[i - 1]).copied().ok_or_else(|| {
                    Error::Inconsistent(format!(
                        "leader choice {} for file {i} but only {} demanders",
                        choices[i - 1],
                        demanders.len()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            owner: eff.owner,
            leaders,
        })
    }

    pub fn contains(&self, user: usize) -> bool {
        self.leaders.contains(&user)
    }
}

fn leader_choices(params: &SchemeParams, root_seed: u64, owner: usize) -> Vec<usize> {
    (1..=params.n)
        .map(|i| {
            derive_stream(
                root_seed,
                StreamLabel::new(Purpose::Leader, i as u64, owner as u64),
            )
            .below(params.k - 1)
        })
        .collect()
}

/// Uniform leader per file, drawn from `(root_seed, (Leader, i, owner))`.
pub fn select_leaders(
    params: &SchemeParams,
    eff: &EffectiveDemands,
    root_seed: u64,
) -> Result<LeaderSet> {
    LeaderSet::from_choices(eff, params.n, &leader_choices(params, root_seed, eff.owner))
}

/// All random choices of one transmission.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmissionDraws {
    /// `q_k`: position `j` (1-based) maps to effective user `q[j-1]`
    pub q: Vec<usize>,
    /// index into the ascending demander list of each file
    pub leader_choices: Vec<usize>,
    /// optional extra permutation of the retained messages
    pub message_order: Option<Vec<usize>>,
}

impl TransmissionDraws {
    pub fn derive(params: &SchemeParams, root_seed: u64, owner: usize, shuffle: bool) -> Self {
        let mut qs = derive_stream(
            root_seed,
            StreamLabel::new(Purpose::EffectivePermutation, 0, owner as u64),
        );
        let q = random_permutation(&mut qs, &params.effective_users(owner))
            .expect("U >= 2 effective users");
        let message_order = shuffle.then(|| {
            let m = params.retained_messages_per_user();
            let mut s = derive_stream(
                root_seed,
                StreamLabel::new(Purpose::MessageOrder, 0, owner as u64),
            );
            let domain: Vec<usize> = (0..m).collect();
            if m == 0 {
                domain
            } else {
                random_permutation(&mut s, &domain).expect("non-empty")
            }
        });
        Self {
            q,
            leader_choices: leader_choices(params, root_seed, owner),
            message_order,
        }
    }

    /// `q_k` = identity on `[U+1] \ {k}` and the first demander as leader.
    pub fn identity(params: &SchemeParams, owner: usize) -> Self {
        Self {
            q: params.effective_users(owner),
            leader_choices: vec![0; params.n],
            message_order: None,
        }
    }
}

/// Metadata of one multicast message as disclosed to users.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct MessageSpec {
    /// the position set `S ⊆ [U]`
    pub index_set: Vec<usize>,
    pub composition: Vec<PieceRef>,
}

/// `M(P_k)`: what the trusted server tells user `k` to broadcast.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Query {
    pub sender: usize,
    pub messages: Vec<MessageSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MulticastMessage {
    pub index_set: Vec<usize>,
    pub composition: Vec<PieceRef>,
    pub payload: Bits,
}

/// `X_k = (M(P_k), P_k)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signal {
    pub sender: usize,
    pub messages: Vec<MulticastMessage>,
}

impl Signal {
    pub fn payload_bits(&self) -> usize {
        self.messages.iter().map(|m| m.payload.len()).sum()
    }

    /// Every referenced piece must be in the sender's cache.
    pub fn check_encoding(&self, sender_cache: &CacheState) -> Result<()> {
        for m in &self.messages {
            if let Some(p) = m.composition.iter().find(|p| !sender_cache.contains(p)) {
                return Err(Error::ProtocolViolation(format!(
                    "user {} broadcasts piece {p:?} it does not cache",
                    self.sender
                )));
            }
        }
        Ok(())
    }
}

/// Builds `M(P_owner)` from the placement record, effective demands, leaders
/// and `q_owner`. Retained messages come out in lexicographic order of `S`
/// unless `draws.message_order` says otherwise.
pub fn build_query(
    params: &SchemeParams,
    placement: &PlacementRecord,
    eff: &EffectiveDemands,
    leaders: &LeaderSet,
    draws: &TransmissionDraws,
) -> Result<Query> {
    let owner = eff.owner;
    if leaders.owner != owner {
        return Err(Error::Inconsistent(format!(
            "leader set of transmission {} used for transmission {owner}",
            leaders.owner
        )));
    }
    let mut sorted_q = draws.q.clone();
    sorted_q.sort_unstable();
    if sorted_q != params.effective_users(owner) {
        return Err(Error::Inconsistent(format!(
            "q = {:?} is not a permutation of the effective users of transmission {owner}",
            draws.q
        )));
    }
    let mut messages = Vec::new();
    if params.t <= params.u {
        let positions: Vec<usize> = (1..=params.u).collect();
        for s in lex_subsets(&positions, params.t)? {
            let users: Vec<usize> = s.iter().map(|&j| draws.q[j - 1]).collect();
            if !users.iter().any(|&v| leaders.contains(v)) {
                continue;
            }
            let mut sorted_users = users.clone();
            sorted_users.sort_unstable();
            let mut composition = Vec::with_capacity(params.t);
            for &v in &users {
                let set: Vec<usize> = sorted_users.iter().copied().filter(|&w| w != v).collect();
                let file = eff.demand_of(v);
                composition.push(PieceRef::new(file, placement.piece_of(owner, file, &set)?));
            }
            messages.push(MessageSpec {
                index_set: s,
                composition,
            });
        }
    }
    if let Some(order) = &draws.message_order {
        let mut check = order.clone();
        check.sort_unstable();
        if check != (0..messages.len()).collect::<Vec<_>>() {
            return Err(Error::Inconsistent(format!(
                "message order {order:?} does not permute {} messages",
                messages.len()
            )));
        }
        messages = order.iter().map(|&i| messages[i].clone()).collect();
    }
    Ok(Query {
        sender: owner,
        messages,
    })
}

pub(crate) fn xor_pieces<'a>(
    piece_bits: usize,
    composition: &[PieceRef],
    mut lookup: impl FnMut(&PieceRef) -> Option<&'a BitsRef>,
) -> Option<Bits> {
    let mut acc = Bits::repeat(false, piece_bits);
    for p in composition {
        acc ^= lookup(p)?;
    }
    Some(acc)
}

/// User-side encoding: `X_k` is a function of `(Z_k, M(P_k))` only.
pub fn encode_signal(cache: &CacheState, query: &Query, piece_bits: usize) -> Result<Signal> {
    if cache.user != query.sender {
        return Err(Error::Inconsistent(format!(
            "query for user {} handed to user {}",
            query.sender, cache.user
        )));
    }
    let messages = query
        .messages
        .iter()
        .map(|spec| {
            let payload = xor_pieces(piece_bits, &spec.composition, |p| cache.get(p)).ok_or_else(
                || {
                    Error::ProtocolViolation(format!(
                        "user {} asked to send uncached piece in {:?}",
                        cache.user, spec.composition
                    ))
                },
            )?;
            Ok(MulticastMessage {
                index_set: spec.index_set.clone(),
                composition: spec.composition.clone(),
                payload,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Signal {
        sender: query.sender,
        messages,
    })
}

/// Query construction plus payload assembly straight from the library.
pub fn build_transmission(
    params: &SchemeParams,
    library: &Library,
    placement: &PlacementRecord,
    eff: &EffectiveDemands,
    leaders: &LeaderSet,
    draws: &TransmissionDraws,
) -> Result<Signal> {
    let query = build_query(params, placement, eff, leaders, draws)?;
    let messages = query
        .messages
        .into_iter()
        .map(|spec| {
            let payload = xor_pieces(params.piece_bits, &spec.composition, |p| {
                Some(library.piece(*p))
            })
            .expect("library holds every piece");
            MulticastMessage {
                index_set: spec.index_set,
                composition: spec.composition,
                payload,
            }
        })
        .collect();
    Ok(Signal {
        sender: query.sender,
        messages,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DeliveryOptions {
    /// Apply an extra random permutation to each user's retained messages.
    pub shuffle_messages: bool,
}

/// Server-side queries for all K transmissions from explicit draws.
pub fn build_queries(
    params: &SchemeParams,
    placement: &PlacementRecord,
    d: &DemandVector,
    draws: &[TransmissionDraws],
) -> Result<Vec<Query>> {
    if draws.len() != params.k {
        return Err(Error::Inconsistent(format!(
            "{} transmission draws for K = {}",
            draws.len(),
            params.k
        )));
    }
    (1..=params.k)
        .map(|owner| {
            let eff = assign_virtual_demands(params, d, owner)?;
            let leaders =
                LeaderSet::from_choices(&eff, params.n, &draws[owner - 1].leader_choices)?;
            build_query(params, placement, &eff, &leaders, &draws[owner - 1])
        })
        .collect()
}

pub fn derive_draws(
    params: &SchemeParams,
    root_seed: u64,
    options: DeliveryOptions,
) -> Vec<TransmissionDraws> {
    (1..=params.k)
        .map(|owner| TransmissionDraws::derive(params, root_seed, owner, options.shuffle_messages))
        .collect()
}

/// All K signals for demand vector `d`, with the randomness derived from
/// `root_seed`.
pub fn run_delivery(
    params: &SchemeParams,
    library: &Library,
    placement: &PlacementRecord,
    d: &DemandVector,
    root_seed: u64,
) -> Result<Vec<Signal>> {
    let draws = derive_draws(params, root_seed, DeliveryOptions::default());
    run_delivery_with(params, library, placement, d, &draws)
}

pub fn run_delivery_with(
    params: &SchemeParams,
    library: &Library,
    placement: &PlacementRecord,
    d: &DemandVector,
    draws: &[TransmissionDraws],
) -> Result<Vec<Signal>> {
    if draws.len() != params.k {
        return Err(Error::Inconsistent(format!(
            "{} transmission draws for K = {}",
            draws.len(),
            params.k
        )));
    }
    (1..=params.k)
        .map(|owner| {
            let eff = assign_virtual_demands(params, d, owner)?;
            let leaders =
                LeaderSet::from_choices(&eff, params.n, &draws[owner - 1].leader_choices)?;
            build_transmission(params, library, placement, &eff, &leaders, &draws[owner - 1])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::placement::{build_caches, build_placement};
    use std::collections::HashMap;

    fn example() -> SchemeParams {
        SchemeParams::new(2, 3, 2, 6).unwrap()
    }

    fn dv(d: &[usize], n: usize) -> DemandVector {
        DemandVector::new(d.to_vec(), n).unwrap()
    }

    #[test]
    fn example_virtual_demands() {
        let p = example();
        let e1 = assign_virtual_demands(&p, &dv(&[1, 2], 3), 1).unwrap();
        assert_eq!(e1.iter().collect::<Vec<_>>(), vec![(2, 2), (3, 1), (4, 3)]);
        let e2 = assign_virtual_demands(&p, &dv(&[1, 2], 3), 2).unwrap();
        assert_eq!(e2.iter().collect::<Vec<_>>(), vec![(1, 1), (3, 2), (4, 3)]);
    }

    #[test]
    fn every_file_has_k_minus_one_demanders() {
        for (k, n) in [(2, 3), (3, 2), (3, 3), (4, 2), (2, 4), (5, 3)] {
            let p = SchemeParams::with_piece_bits(k, n, 1, 1).unwrap();
            for d in DemandVector::all(k, n) {
                for owner in 1..=k {
                    let eff = assign_virtual_demands(&p, &d, owner).unwrap();
                    for i in 1..=n {
                        assert_eq!(eff.demanders(i).len(), k - 1, "d={d} owner={owner}");
                    }
                    for v in (1..=k).filter(|&v| v != owner) {
                        assert_eq!(eff.demand_of(v), d.of(v));
                    }
                    assert_eq!(eff.iter().count(), p.u);
                }
            }
        }
    }

    #[test]
    fn k2_leaders_are_forced() {
        let p = example();
        let eff = assign_virtual_demands(&p, &dv(&[2, 2], 3), 1).unwrap();
        for seed in 0..20 {
            let l = select_leaders(&p, &eff, seed).unwrap();
            let mut got = l.leaders.clone();
            got.sort_unstable();
            assert_eq!(got, vec![2, 3, 4]);
        }
    }

    #[test]
    fn leader_choice_is_uniform() {
        // K=3: every file has two demanders, each should lead about half the time
        let p = SchemeParams::with_piece_bits(3, 2, 1, 1).unwrap();
        let eff = assign_virtual_demands(&p, &dv(&[1, 1, 2], 2), 1).unwrap();
        let draws = 10_000u64;
        let mut counts: HashMap<usize, u64> = HashMap::new();
        for seed in 0..draws {
            let l = select_leaders(&p, &eff, seed).unwrap();
            assert_eq!(l.leaders.len(), 2);
            assert!(eff.demanders(1).contains(&l.leaders[0]));
            *counts.entry(l.leaders[0]).or_default() += 1;
        }
        assert_eq!(counts.len(), 2);
        let sigma = (draws as f64 * 0.25).sqrt();
        for c in counts.values() {
            assert!((*c as f64 - draws as f64 / 2.0).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn retained_count_and_sender_locality() {
        for (k, n) in [(2, 2), (2, 3), (3, 2), (3, 3)] {
            let u = (k - 1) * n;
            for t in 1..=u + 1 {
                let p = SchemeParams::with_piece_bits(k, n, t, 2).unwrap();
                let lib = Library::random(n, p.b, 2, 5).unwrap();
                for seed in 0..3 {
                    let rec = build_placement(&p, seed).unwrap();
                    let caches = build_caches(&p, &lib, &rec).unwrap();
                    for d in DemandVector::all(k, n) {
                        let signals = run_delivery(&p, &lib, &rec, &d, seed + 17).unwrap();
                        for s in &signals {
                            assert_eq!(s.messages.len(), p.retained_messages_per_user());
                            s.check_encoding(&caches[s.sender - 1]).unwrap();
                            for m in &s.messages {
                                assert_eq!(m.composition.len(), t);
                                assert_eq!(m.payload.len(), p.piece_bits);
                                for piece in &m.composition {
                                    assert_eq!(p.owner_of_piece(piece.piece), s.sender);
                                }
                                let mut c = m.composition.clone();
                                c.sort();
                                c.dedup();
                                assert_eq!(c.len(), t);
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn encode_from_cache_matches_library_assembly() {
        let p = SchemeParams::with_piece_bits(3, 2, 3, 3).unwrap();
        let lib = Library::random(2, p.b, 3, 8).unwrap();
        let rec = build_placement(&p, 1).unwrap();
        let caches = build_caches(&p, &lib, &rec).unwrap();
        let d = dv(&[2, 1, 2], 2);
        let draws = derive_draws(&p, 4, DeliveryOptions::default());
        let from_lib = run_delivery_with(&p, &lib, &rec, &d, &draws).unwrap();
        let queries = build_queries(&p, &rec, &d, &draws).unwrap();
        for (q, expected) in queries.iter().zip(&from_lib) {
            let s = encode_signal(&caches[q.sender - 1], q, p.piece_bits).unwrap();
            assert_eq!(&s, expected);
            // any other user lacks some referenced piece
            let other = q.sender % 3;
            assert!(encode_signal(&caches[other], q, p.piece_bits).is_err());
        }
    }

    #[test]
    fn full_memory_corner_sends_nothing() {
        let p = SchemeParams::with_piece_bits(2, 3, 4, 1).unwrap();
        let lib = Library::random(3, p.b, 1, 0).unwrap();
        let rec = build_placement(&p, 0).unwrap();
        let signals = run_delivery(&p, &lib, &rec, &dv(&[1, 2], 3), 0).unwrap();
        assert!(signals.iter().all(|s| s.messages.is_empty()));
    }

    #[test]
    fn shuffle_permutes_without_changing_the_set() {
        let p = SchemeParams::with_piece_bits(2, 3, 2, 1).unwrap();
        let lib = Library::random(3, p.b, 1, 0).unwrap();
        let rec = build_placement(&p, 2).unwrap();
        let d = dv(&[3, 1], 3);
        let plain = derive_draws(&p, 9, DeliveryOptions::default());
        let shuffled = derive_draws(&p, 9, DeliveryOptions { shuffle_messages: true });
        let a = run_delivery_with(&p, &lib, &rec, &d, &plain).unwrap();
        let b = run_delivery_with(&p, &lib, &rec, &d, &shuffled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let mut xs = x.messages.clone();
            let mut ys = y.messages.clone();
            xs.sort_by(|m, n| m.index_set.cmp(&n.index_set));
            ys.sort_by(|m, n| m.index_set.cmp(&n.index_set));
            assert_eq!(xs, ys);
        }
    }

    #[test]
    fn rejects_bad_q() {
        let p = example();
        let rec = build_placement(&p, 0).unwrap();
        let eff = assign_virtual_demands(&p, &dv(&[1, 2], 3), 1).unwrap();
        let leaders = select_leaders(&p, &eff, 0).unwrap();
        let mut draws = TransmissionDraws::identity(&p, 1);
        draws.q = vec![1, 2, 3];
        assert!(matches!(
            build_query(&p, &rec, &eff, &leaders, &draws),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn all_demand_vectors_enumerated_in_order() {
        let all = DemandVector::all(2, 3);
        assert_eq!(all.len(), 9);
        assert_eq!(all[0].as_slice(), &[1, 1]);
        assert_eq!(all[1].as_slice(), &[1, 2]);
        assert_eq!(all[8].as_slice(), &[3, 3]);
    }
}
