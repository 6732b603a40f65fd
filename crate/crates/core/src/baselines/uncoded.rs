//! Uncoded D2D caching.
//!
//! Every file is cut into `K` equal segments and every segment into `D`
//! units, where `β = (KM - N) / (N(K-1)) = a / D` in lowest terms. User `k`
//! stores all of segment `k` and the first `a` units of every other segment,
//! then broadcasts the remaining `D - a` units of its own segment. Nothing
//! depends on the demands, so every user ends up with the whole library.
//!
//! Units are exposed as pieces: unit `u` of segment `s` is piece
//! `(s-1) D + u` of its file.

use num::ToPrimitive;
use serde::Serialize;

use crate::delivery::{MulticastMessage, Signal};
use crate::error::{Error, Result};
use crate::placement::{CacheState, Library, PieceRef};
use crate::{ratio, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct UncodedPlan {
    pub k: usize,
    pub n: usize,
    #[serde(serialize_with = "crate::transcript::serialize_rational")]
    pub m: Rational,
    pub b: usize,
    #[serde(serialize_with = "crate::transcript::serialize_rational")]
    pub beta: Rational,
    /// `D`, units per segment.
    pub units_per_segment: usize,
    /// `a`, leading units of a foreign segment kept in every cache.
    pub shared_units: usize,
    pub unit_bits: usize,
}

impl UncodedPlan {
    pub fn new(k: usize, n: usize, m: Rational, b: usize) -> Result<Self> {
        if k.min(n) < 2 {
            return Err(Error::InvalidParams(format!(
                "need min(K, N) >= 2, got K={k}, N={n}"
            )));
        }
        let lo = ratio(n as i64, k as i64);
        if m < lo || m > ratio(n as i64, 1) {
            return Err(Error::InvalidParams(format!("M={m} outside [{lo}, {n}]")));
        }
        let beta = (ratio(k as i64, 1) * &m - ratio(n as i64, 1)) / ratio((n * (k - 1)) as i64, 1);
        let d = beta.denom().to_usize().ok_or_else(|| {
            Error::InstanceTooLarge("denominator of the shared fraction".into())
        })?;
        let a = beta.numer().to_usize().expect("0 <= beta <= 1");
        let segments = k * d;
        if b == 0 || !b.is_multiple_of(segments) {
            return Err(Error::InvalidParams(format!(
                "file size B={b} is not a positive multiple of K*D={segments}"
            )));
        }
        Ok(Self {
            k,
            n,
            m,
            b,
            beta,
            units_per_segment: d,
            shared_units: a,
            unit_bits: b / segments,
        })
    }

    /// Smallest `B` accepted for `(K, N, M)`.
    pub fn min_file_bits(k: usize, n: usize, m: &Rational) -> Result<usize> {
        if k < 2 || n == 0 {
            return Err(Error::InvalidParams(format!("K={k}, N={n}")));
        }
        let beta = (ratio(k as i64, 1) * m - ratio(n as i64, 1)) / ratio((n * (k - 1)) as i64, 1);
        let d = beta.denom().to_usize().unwrap_or(usize::MAX);
        k.checked_mul(d)
            .ok_or_else(|| Error::InstanceTooLarge("uncoded segment count".into()))
    }

    pub fn pieces_per_file(&self) -> usize {
        self.k * self.units_per_segment
    }

    pub fn segment_of(&self, piece: usize) -> usize {
        (piece - 1) / self.units_per_segment + 1
    }

    fn unit_of(&self, piece: usize) -> usize {
        (piece - 1) % self.units_per_segment + 1
    }

    pub fn cached_by(&self, user: usize, piece: usize) -> bool {
        self.segment_of(piece) == user || self.unit_of(piece) <= self.shared_units
    }

    /// `K (N - M) / (K - 1)`.
    pub fn load(&self) -> Rational {
        ratio(self.k as i64, (self.k - 1) as i64) * (ratio(self.n as i64, 1) - &self.m)
    }

    fn check_library(&self, library: &Library) -> Result<()> {
        if library.file_count() != self.n
            || library.file_bits() != self.b
            || library.piece_bits() != self.unit_bits
        {
            return Err(Error::Inconsistent(
                "library does not match the uncoded plan".into(),
            ));
        }
        Ok(())
    }
}

/// Caches of all `K` users. The plan fixes everything, so no randomness is
/// involved.
pub fn uncoded_place(plan: &UncodedPlan, library: &Library) -> Result<Vec<CacheState>> {
    plan.check_library(library)?;
    let caches = (1..=plan.k)
        .map(|user| {
            let mut cache = CacheState::new(user);
            for file in 1..=plan.n {
                for piece in (1..=plan.pieces_per_file()).filter(|&p| plan.cached_by(user, p)) {
                    let p = PieceRef::new(file, piece);
                    cache.insert(p, library.piece(p).to_bitvec());
                }
            }
            cache
        })
        .collect();
    Ok(caches)
}

/// User `k` broadcasts units `a+1 ..= D` of segment `k` of every file as
/// single-piece messages.
pub fn uncoded_deliver(plan: &UncodedPlan, caches: &[CacheState]) -> Result<Vec<Signal>> {
    if caches.len() != plan.k {
        return Err(Error::Inconsistent(format!(
            "{} caches for K = {}",
            caches.len(),
            plan.k
        )));
    }
    caches
        .iter()
        .enumerate()
        .map(|(idx, cache)| {
            let sender = idx + 1;
            let base = (sender - 1) * plan.units_per_segment;
            let mut messages = Vec::new();
            for file in 1..=plan.n {
                for unit in plan.shared_units + 1..=plan.units_per_segment {
                    let p = PieceRef::new(file, base + unit);
                    let payload = cache.get(&p).ok_or_else(|| {
                        Error::ProtocolViolation(format!("user {sender} lacks its own piece {p:?}"))
                    })?;
                    messages.push(MulticastMessage {
                        index_set: Vec::new(),
                        composition: vec![p],
                        payload: payload.to_bitvec(),
                    });
                }
            }
            Ok(Signal { sender, messages })
        })
        .collect()
}
