//! Demand-privacy audits.
//!
//! For a fixed file realization, the view of an observer set `O` (the caches
//! of its members and all `K` signals) is a random variable over the
//! protocol's randomness tape. Privacy holds when that distribution is the
//! same for every demand vector that agrees with the observers' own demands.
//! This module computes those distributions either exactly, by enumerating
//! every tape, or empirically from seeded samples, and reports the total
//! variation distance for each pair of demand vectors.
//!
//! Views are compared through a [`ViewKey`]. The exact key serializes the
//! whole view. The relabeled key replaces piece indices by the order in which
//! they first appear within their public class (file, owner range, which
//! observers cache it). It is a function of the view, so equal view
//! distributions give equal relabeled distributions; its much smaller support
//! is what makes sampled comparisons meaningful.

use std::collections::{BTreeMap, HashMap};

use num::{BigInt, Signed, ToPrimitive, Zero};
use rand::RngCore;
use serde::Serialize;

use crate::bits::{Bits, BitsRef};
use crate::combinatorics::{derive_stream, factorial, nth_permutation, Purpose, StreamLabel};
use crate::delivery::{run_delivery_with, derive_draws, DeliveryOptions, DemandVector, Signal, TransmissionDraws};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::placement::{build_caches, build_placement, CacheState, Library, PieceRef, PlacementRecord, SchemeParams};
use crate::Rational;

/// Exhaustive audits refuse to enumerate more tapes than this by default.
pub const DEFAULT_BUDGET: u128 = 100_000;

/// Default distance tolerance for sampled audits.
pub const SAMPLED_TOLERANCE: f64 = 0.02;

/// One joint draw of every random choice of the coded scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RandomTape {
    /// `perms[i-1][k-1]` = `p_{i,k}`
    pub perms: Vec<Vec<Vec<usize>>>,
    /// per-transmission `q_k` and leader choices
    pub draws: Vec<TransmissionDraws>,
}

/// The full, uniformly weighted space of randomness tapes.
#[derive(Debug, Clone)]
pub struct TapeSpace {
    params: SchemeParams,
    count: u128,
    perm_radix: u128,
    q_radix: u128,
    leader_radix: u128,
}

/// Sizes the tape space: `(C(U,t-1)!)^{NK} (U!)^K (K-1)^{NK}` tapes.
pub fn tape_count(params: &SchemeParams) -> Result<u128> {
    let too_big = || Error::InstanceTooLarge("randomness tape count".into());
    let perm = factorial(params.subfiles_per_owner).map_err(|_| too_big())?;
    let q = factorial(params.u).map_err(|_| too_big())?;
    let leader = (params.k - 1) as u128;
    let nk = (params.n * params.k) as u32;
    perm.checked_pow(nk)
        .and_then(|a| q.checked_pow(params.k as u32).and_then(|b| a.checked_mul(b)))
        .and_then(|ab| leader.checked_pow(nk).and_then(|c| ab.checked_mul(c)))
        .ok_or_else(too_big)
}

/// Every joint assignment of all `p_{i,k}`, all `q_k` and all leader choices.
pub fn enumerate_randomness(params: &SchemeParams, budget: u128) -> Result<TapeSpace> {
    let count = tape_count(params)?;
    if count > budget {
        return Err(Error::BudgetExceeded {
            tapes: count,
            budget,
        });
    }
    Ok(TapeSpace {
        params: params.clone(),
        count,
        perm_radix: factorial(params.subfiles_per_owner)?,
        q_radix: factorial(params.u)?,
        leader_radix: (params.k - 1) as u128,
    })
}

impl TapeSpace {
    pub fn len(&self) -> u128 {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Decodes tape `index` in mixed radix: leader digits vary fastest, then
    /// the `q_k`, then the `p_{i,k}`.
    pub fn tape(&self, mut index: u128) -> Result<RandomTape> {
        if index >= self.count {
            return Err(Error::InvalidArgument(format!(
                "tape {index} out of {}",
                self.count
            )));
        }
        let p = &self.params;
        let mut leader_digits = vec![vec![0usize; p.n]; p.k];
        for per_owner in leader_digits.iter_mut() {
            for c in per_owner.iter_mut() {
                *c = (index % self.leader_radix) as usize;
                index /= self.leader_radix;
            }
        }
        let mut qs = Vec::with_capacity(p.k);
        for owner in 1..=p.k {
            qs.push(nth_permutation(&p.effective_users(owner), index % self.q_radix)?);
            index /= self.q_radix;
        }
        let mut perms = vec![Vec::with_capacity(p.k); p.n];
        for per_file in perms.iter_mut() {
            for owner in 1..=p.k {
                let range: Vec<usize> = p.owner_range(owner).collect();
                per_file.push(nth_permutation(&range, index % self.perm_radix)?);
                index /= self.perm_radix;
            }
        }
        let draws = qs
            .into_iter()
            .zip(leader_digits)
            .map(|(q, leader_choices)| TransmissionDraws {
                q,
                leader_choices,
                message_order: None,
            })
            .collect();
        Ok(RandomTape { perms, draws })
    }

    pub fn iter(&self) -> impl Iterator<Item = RandomTape> + '_ {
        (0..self.count).map(|i| self.tape(i).expect("index in range"))
    }
}

/// Draws tape `index` of the sample stream for demand vector number
/// `demand_index`. Streams differ per demand vector, so the empirical
/// distributions being compared are independent.
pub fn sample_tape(params: &SchemeParams, seed: u64, demand_index: u64, index: u64) -> Result<RandomTape> {
    let mut s = derive_stream(seed, StreamLabel::new(Purpose::AuditSample, demand_index, index));
    let root = s.next_u64();
    let placement = build_placement(params, root)?;
    let perms = (1..=params.n)
        .map(|i| (1..=params.k).map(|k| placement.permutation(i, k).to_vec()).collect())
        .collect();
    Ok(RandomTape {
        perms,
        draws: derive_draws(params, root, DeliveryOptions::default()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeyKind {
    Exact,
    Relabeled,
}

/// The scheme under audit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    #[default]
    Private,
    /// Deliberately broken: `q_k` is the identity, the first demander of each
    /// file is always the leader, and the subfile label of every piece is
    /// disclosed alongside its index.
    Mutated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AuditMode {
    Exhaustive {
        #[serde(serialize_with = "ser_u128")]
        budget: u128,
    },
    Sampled { samples: u64, seed: u64 },
}

fn ser_u128<S: serde::Serializer>(v: &u128, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditOptions {
    pub mode: AuditMode,
    pub key: KeyKind,
    pub variant: Variant,
    /// Largest distance still reported as a pass. Exhaustive audits use 0.
    pub tolerance: f64,
    #[serde(skip)]
    pub execution: Execution,
}

impl AuditOptions {
    pub fn exhaustive() -> Self {
        Self {
            mode: AuditMode::Exhaustive {
                budget: DEFAULT_BUDGET,
            },
            key: KeyKind::Exact,
            variant: Variant::Private,
            tolerance: 0.0,
            execution: Execution::default(),
        }
    }

    pub fn sampled(samples: u64, seed: u64) -> Self {
        Self {
            mode: AuditMode::Sampled { samples, seed },
            key: KeyKind::Relabeled,
            variant: Variant::Private,
            tolerance: SAMPLED_TOLERANCE,
            execution: Execution::default(),
        }
    }

    pub fn with_key(mut self, key: KeyKind) -> Self {
        self.key = key;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }
}

/// Canonical serialization of an observer-set view.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ViewKey(Vec<u32>);

impl ViewKey {
    pub fn words(&self) -> &[u32] {
        &self.0
    }
}

struct KeyWriter(Vec<u32>);

impl KeyWriter {
    fn num(&mut self, v: usize) {
        self.0.push(v as u32);
    }

    fn bits(&mut self, b: &BitsRef) {
        self.num(b.len());
        for chunk in b.chunks(32) {
            let mut w = 0u32;
            for bit in chunk.iter() {
                w = (w << 1) | (*bit as u32);
            }
            self.0.push(w);
        }
    }

    fn label(&mut self, placement: &PlacementRecord, p: PieceRef) {
        let l = placement.label_of(p);
        self.num(l.owner);
        self.num(l.set.len());
        for &v in &l.set {
            self.num(v);
        }
    }
}

/// Builds the key of one view. `caches` are the observers' caches in
/// ascending user order; `placement` is consulted only to disclose labels in
/// the mutated variant.
pub fn view_key(
    params: &SchemeParams,
    caches: &[&CacheState],
    signals: &[Signal],
    key: KeyKind,
    disclose: Option<&PlacementRecord>,
) -> ViewKey {
    let mut w = KeyWriter(Vec::new());
    match key {
        KeyKind::Exact => {
            for c in caches {
                w.num(c.user);
                w.num(c.len());
                for (p, bits) in c.entries() {
                    w.num(p.file);
                    w.num(p.piece);
                    w.bits(bits);
                }
            }
            for s in signals {
                w.num(s.sender);
                w.num(s.messages.len());
                for m in &s.messages {
                    w.num(m.composition.len());
                    for p in &m.composition {
                        w.num(p.file);
                        w.num(p.piece);
                        if let Some(rec) = disclose {
                            w.label(rec, *p);
                        }
                    }
                    w.bits(&m.payload);
                }
            }
        }
        KeyKind::Relabeled => {
            let mask = |p: &PieceRef| -> usize {
                caches
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.contains(p))
                    .fold(0usize, |acc, (i, _)| acc | (1 << i))
            };
            let cached_bits = |p: &PieceRef| caches.iter().find_map(|c| c.get(p));
            let mut ordinal: HashMap<PieceRef, usize> = HashMap::new();
            let mut next: HashMap<(usize, usize, usize), usize> = HashMap::new();
            for c in caches {
                w.num(c.user);
            }
            for s in signals {
                w.num(s.sender);
                w.num(s.messages.len());
                for m in &s.messages {
                    w.num(m.composition.len());
                    for p in &m.composition {
                        let owner = params.owner_of_piece(p.piece);
                        let msk = mask(p);
                        w.num(p.file);
                        w.num(owner);
                        w.num(msk);
                        match ordinal.get(p) {
                            Some(&o) => w.num(o),
                            None => {
                                let slot = next.entry((p.file, owner, msk)).or_default();
                                *slot += 1;
                                ordinal.insert(*p, *slot);
                                w.num(*slot);
                                if let Some(b) = cached_bits(p) {
                                    w.bits(b);
                                }
                            }
                        }
                        if let Some(rec) = disclose {
                            w.label(rec, *p);
                        }
                    }
                    w.bits(&m.payload);
                }
            }
            // cached pieces never mentioned in a message, as a sorted multiset
            let mut rest: BTreeMap<(usize, usize, usize, Bits), usize> = BTreeMap::new();
            for c in caches {
                for (p, bits) in c.entries() {
                    if !ordinal.contains_key(p) {
                        *rest
                            .entry((p.file, params.owner_of_piece(p.piece), mask(p), bits.clone()))
                            .or_default() += 1;
                    }
                }
            }
            w.num(rest.len());
            for ((file, owner, msk, bits), count) in rest {
                // each distinct piece was counted once per observer caching it
                w.num(file);
                w.num(owner);
                w.num(msk);
                w.bits(&bits);
                w.num(count / msk.count_ones() as usize);
            }
            if let Some(rec) = disclose {
                for c in caches {
                    for p in c.metadata() {
                        w.label(rec, *p);
                    }
                }
            }
        }
    }
    ViewKey(w.0)
}

/// Empirical or exact distribution of views: `counts[key] / total`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewDistribution {
    pub counts: BTreeMap<ViewKey, u64>,
    pub total: u64,
}

impl ViewDistribution {
    pub fn support(&self) -> usize {
        self.counts.len()
    }

    pub fn probability(&self, key: &ViewKey) -> Rational {
        let c = self.counts.get(key).copied().unwrap_or(0);
        Rational::new(c.into(), self.total.into())
    }

    /// Exact total variation distance `½ Σ |p - q|`.
    pub fn total_variation(&self, other: &ViewDistribution) -> Rational {
        let na = BigInt::from(self.total);
        let nb = BigInt::from(other.total);
        let mut acc = BigInt::zero();
        let mut add = |ca: u64, cb: u64| {
            acc += (BigInt::from(ca) * &nb - BigInt::from(cb) * &na).abs();
        };
        for (k, &ca) in &self.counts {
            add(ca, other.counts.get(k).copied().unwrap_or(0));
        }
        for (k, &cb) in &other.counts {
            if !self.counts.contains_key(k) {
                add(0, cb);
            }
        }
        Rational::new(acc, BigInt::from(2) * na * nb)
    }
}

fn check_observers(params: &SchemeParams, observers: &[usize]) -> Result<Vec<usize>> {
    let mut obs = observers.to_vec();
    obs.sort_unstable();
    obs.dedup();
    if obs.is_empty() || obs.len() != observers.len() || obs.iter().any(|&o| o == 0 || o > params.k) {
        return Err(Error::InvalidArgument(format!(
            "observer set {observers:?} must be a nonempty set of distinct users in 1..={}",
            params.k
        )));
    }
    Ok(obs)
}

fn view_of_tape(
    params: &SchemeParams,
    library: &Library,
    d: &DemandVector,
    observers: &[usize],
    tape: RandomTape,
    opts: &AuditOptions,
) -> Result<ViewKey> {
    let placement = PlacementRecord::from_permutations(params, tape.perms)?;
    let draws = match opts.variant {
        Variant::Private => tape.draws,
        Variant::Mutated => (1..=params.k).map(|k| TransmissionDraws::identity(params, k)).collect(),
    };
    let caches = build_caches(params, library, &placement)?;
    let signals = run_delivery_with(params, library, &placement, d, &draws)?;
    let observed: Vec<&CacheState> = observers.iter().map(|&o| &caches[o - 1]).collect();
    let disclose = (opts.variant == Variant::Mutated).then_some(&placement);
    Ok(view_key(params, &observed, &signals, opts.key, disclose))
}

fn demand_index(params: &SchemeParams, d: &DemandVector) -> u64 {
    // lexicographic rank in [N]^K, matching DemandVector::all
    d.as_slice()
        .iter()
        .fold(0u64, |acc, &x| acc * params.n as u64 + (x - 1) as u64)
}

type Counts = HashMap<ViewKey, u64>;

fn merge(mut a: Result<Counts>, b: Result<Counts>) -> Result<Counts> {
    match (&mut a, b) {
        (Ok(x), Ok(y)) => {
            for (k, v) in y {
                *x.entry(k).or_default() += v;
            }
            a
        }
        (Err(_), _) => a,
        (_, Err(e)) => Err(e),
    }
}

/// Distribution of the view of `observers` with the files and `d` fixed.
pub fn view_distribution(
    params: &SchemeParams,
    library: &Library,
    d: &DemandVector,
    observers: &[usize],
    opts: &AuditOptions,
) -> Result<ViewDistribution> {
    let observers = check_observers(params, observers)?;
    if d.len() != params.k || d.as_slice().iter().any(|&x| x == 0 || x > params.n) {
        return Err(Error::InvalidArgument(format!("demand vector {d} invalid for K={}, N={}", params.k, params.n)));
    }
    let (n, tape_at): (u64, Box<dyn Fn(u64) -> Result<RandomTape> + Sync + Send>) = match opts.mode {
        AuditMode::Exhaustive { budget } => {
            let space = enumerate_randomness(params, budget)?;
            let n = u64::try_from(space.len()).map_err(|_| Error::InstanceTooLarge("tape count".into()))?;
            (n, Box::new(move |i| space.tape(i as u128)))
        }
        AuditMode::Sampled { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidArgument("sampled audit needs at least one sample".into()));
            }
            let p = params.clone();
            let di = demand_index(params, d);
            (samples, Box::new(move |i| sample_tape(&p, seed, di, i)))
        }
    };
    let counts = opts.execution.fold_range(
        n,
        || Ok(Counts::new()),
        |acc, i| {
            let mut acc = acc?;
            let key = view_of_tape(params, library, d, &observers, tape_at(i)?, opts)?;
            *acc.entry(key).or_default() += 1;
            Ok(acc)
        },
        merge,
    )?;
    Ok(ViewDistribution {
        counts: counts.into_iter().collect(),
        total: n,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairVerdict {
    pub d: Vec<usize>,
    pub d_prime: Vec<usize>,
    pub distance: f64,
    /// exact distance as `p/q`
    pub distance_exact: String,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub params: SchemeParams,
    pub observer: Vec<usize>,
    pub mode: AuditMode,
    pub key: KeyKind,
    pub variant: Variant,
    pub tolerance: f64,
    /// view support size per demand vector, in the order of the demand list
    pub support: Vec<(Vec<usize>, usize)>,
    pub pairs: Vec<PairVerdict>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.pairs.iter().all(|p| p.verdict == Verdict::Pass)
    }

    pub fn max_distance(&self) -> f64 {
        self.pairs.iter().map(|p| p.distance).fold(0.0, f64::max)
    }

    pub fn min_distance(&self) -> f64 {
        self.pairs.iter().map(|p| p.distance).fold(f64::INFINITY, f64::min)
    }
}

/// Colluding audit: compares every pair of distinct demand vectors that agree
/// on the demands of all observers.
pub fn audit_colluding(
    params: &SchemeParams,
    library: &Library,
    observers: &[usize],
    opts: &AuditOptions,
) -> Result<AuditReport> {
    let obs = check_observers(params, observers)?;
    let demands = DemandVector::all(params.k, params.n);
    // sessions parallelize inside view_distribution; the demand loop stays ordered
    let dists = demands
        .iter()
        .map(|d| view_distribution(params, library, d, &obs, opts))
        .collect::<Result<Vec<_>>>()?;
    let mut pairs = Vec::new();
    for (a, da) in demands.iter().enumerate() {
        for (b, db) in demands.iter().enumerate().skip(a + 1) {
            if obs.iter().any(|&o| da.of(o) != db.of(o)) {
                continue;
            }
            let tv = dists[a].total_variation(&dists[b]);
            let distance = tv.to_f64().unwrap_or(f64::NAN);
            let pass = match opts.mode {
                AuditMode::Exhaustive { .. } => tv.is_zero(),
                AuditMode::Sampled { .. } => distance <= opts.tolerance,
            };
            pairs.push(PairVerdict {
                d: da.as_slice().to_vec(),
                d_prime: db.as_slice().to_vec(),
                distance,
                distance_exact: tv.to_string(),
                verdict: if pass { Verdict::Pass } else { Verdict::Fail },
            });
        }
    }
    Ok(AuditReport {
        params: params.clone(),
        observer: obs,
        mode: opts.mode,
        key: opts.key,
        variant: opts.variant,
        tolerance: match opts.mode {
            AuditMode::Exhaustive { .. } => 0.0,
            AuditMode::Sampled { .. } => opts.tolerance,
        },
        support: demands
            .iter()
            .zip(&dists)
            .map(|(d, dist)| (d.as_slice().to_vec(), dist.support()))
            .collect(),
        pairs,
    })
}

/// Single-observer audit.
pub fn audit_privacy(
    params: &SchemeParams,
    library: &Library,
    observer: usize,
    opts: &AuditOptions,
) -> Result<AuditReport> {
    audit_colluding(params, library, &[observer], opts)
}

/// A library whose bits are constant on each owner range of each file, with
/// the constants drawn from `seed`.
pub fn range_constant_library(params: &SchemeParams, seed: u64) -> Result<Library> {
    let mut s = derive_stream(seed, StreamLabel::new(Purpose::Library, 0, 1));
    let files = (1..=params.n)
        .map(|_| {
            let mut f = Bits::with_capacity(params.b);
            for _ in 1..=params.k {
                let bit = s.next_u32() & 1 == 1;
                f.extend(std::iter::repeat_n(bit, params.subfiles_per_owner * params.piece_bits));
            }
            f
        })
        .collect();
    Library::split(files, params.b, params.piece_bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: usize, n: usize, t: usize) -> SchemeParams {
        SchemeParams::with_piece_bits(k, n, t, 1).unwrap()
    }

    #[test]
    fn tape_counts() {
        assert_eq!(tape_count(&params(2, 2, 1)).unwrap(), 4);
        assert_eq!(tape_count(&params(2, 2, 2)).unwrap(), 64);
        assert_eq!(tape_count(&params(2, 3, 2)).unwrap(), 6u128.pow(6) * 36);
        assert!(matches!(
            enumerate_randomness(&params(2, 3, 2), DEFAULT_BUDGET),
            Err(Error::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn tapes_are_distinct_and_valid() {
        let p = params(2, 2, 2);
        let space = enumerate_randomness(&p, DEFAULT_BUDGET).unwrap();
        let tapes: Vec<RandomTape> = space.iter().collect();
        assert_eq!(tapes.len(), 64);
        for (i, a) in tapes.iter().enumerate() {
            PlacementRecord::from_permutations(&p, a.perms.clone()).unwrap();
            for b in &tapes[i + 1..] {
                assert_ne!(a, b);
            }
        }
    }

    #[test]
    fn total_variation_of_disjoint_and_equal() {
        let k = |v: u32| ViewKey(vec![v]);
        let a = ViewDistribution {
            counts: [(k(1), 2), (k(2), 2)].into_iter().collect(),
            total: 4,
        };
        let b = ViewDistribution {
            counts: [(k(3), 1)].into_iter().collect(),
            total: 1,
        };
        let c = ViewDistribution {
            counts: [(k(1), 1), (k(2), 1)].into_iter().collect(),
            total: 2,
        };
        assert_eq!(a.total_variation(&b), crate::ratio(1, 1));
        assert!(a.total_variation(&c).is_zero());
        assert_eq!(a.probability(&k(1)), crate::ratio(1, 2));
    }

    #[test]
    fn exhaustive_smallest_instance() {
        let p = params(2, 2, 1);
        let lib = Library::random(2, p.b, 1, 4).unwrap();
        let opts = AuditOptions::exhaustive();
        let a = view_distribution(&p, &lib, &DemandVector::new(vec![1, 1], 2).unwrap(), &[1], &opts).unwrap();
        let b = view_distribution(&p, &lib, &DemandVector::new(vec![1, 2], 2).unwrap(), &[1], &opts).unwrap();
        assert_eq!(a.total, 4);
        assert_eq!(a, b);
    }

    #[test]
    fn full_observer_set_is_vacuous() {
        let p = params(2, 2, 1);
        let lib = Library::random(2, p.b, 1, 4).unwrap();
        let report = audit_colluding(&p, &lib, &[1, 2], &AuditOptions::exhaustive()).unwrap();
        assert!(report.pairs.is_empty());
        assert!(report.passed());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let p = params(2, 2, 2);
        let lib = Library::random(2, p.b, 1, 8).unwrap();
        let d = DemandVector::new(vec![2, 1], 2).unwrap();
        let seq = AuditOptions::exhaustive().with_execution(Execution::Sequential);
        let par = AuditOptions::exhaustive().with_execution(Execution::Parallel);
        assert_eq!(
            view_distribution(&p, &lib, &d, &[2], &seq).unwrap(),
            view_distribution(&p, &lib, &d, &[2], &par).unwrap()
        );
    }

    #[test]
    fn relabeled_key_is_coarser() {
        let p = params(2, 2, 2);
        let lib = Library::random(2, p.b, 1, 8).unwrap();
        let d = DemandVector::new(vec![1, 2], 2).unwrap();
        let exact = view_distribution(&p, &lib, &d, &[1], &AuditOptions::exhaustive()).unwrap();
        let coarse = view_distribution(&p, &lib, &d, &[1], &AuditOptions::exhaustive().with_key(KeyKind::Relabeled)).unwrap();
        assert!(coarse.support() <= exact.support());
        assert_eq!(coarse.total, exact.total);
    }

    #[test]
    fn mutation_is_detected_exhaustively() {
        let p = params(2, 2, 2);
        let lib = Library::random(2, p.b, 1, 8).unwrap();
        let opts = AuditOptions::exhaustive().with_variant(Variant::Mutated);
        let report = audit_privacy(&p, &lib, 1, &opts).unwrap();
        assert!(!report.passed());
    }

    #[test]
    fn range_constant_files() {
        let p = params(2, 3, 2);
        let lib = range_constant_library(&p, 3).unwrap();
        for i in 1..=3 {
            for k in 1..=2 {
                let bits: Vec<bool> = p.owner_range(k).map(|j| lib.piece(PieceRef::new(i, j))[0]).collect();
                assert!(bits.windows(2).all(|w| w[0] == w[1]));
            }
        }
    }

    #[test]
    fn bad_observers_rejected() {
        let p = params(2, 2, 1);
        let lib = Library::random(2, p.b, 1, 4).unwrap();
        let d = DemandVector::new(vec![1, 1], 2).unwrap();
        for obs in [&[][..], &[0], &[3], &[1, 1]] {
            assert!(view_distribution(&p, &lib, &d, obs, &AuditOptions::exhaustive()).is_err());
        }
    }
}
