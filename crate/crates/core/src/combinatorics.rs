//! Binomials, lexicographic subset enumeration/ranking, and seeded permutation
//! sampling.
//!
//! Every random draw in the crate goes through an [`RngStream`] keyed by a
//! `(root_seed, StreamLabel)` pair, so any permutation or leader choice can be
//! reproduced from the seed alone.

use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// `C(x, y)`, with `C(x, y) = 0` whenever `x < 0`, `y < 0` or `x < y`.
///
/// Fails with [`Error::InstanceTooLarge`] when the result does not fit a `u64`.
pub fn binom(x: i64, y: i64) -> Result<u64> {
    if x < 0 || y < 0 || x < y {
        return Ok(0);
    }
    let r = y.min(x - y) as u128;
    let x = x as u128;
    let mut c: u128 = 1;
    for i in 1..=r {
        // C(x-r+i, i) is increasing in i, so an overflowing prefix means an
        // overflowing result.
        c = c * (x - r + i) / i;
        if c > u64::MAX as u128 {
            return Err(Error::InstanceTooLarge(format!(
                "binomial C({x}, {y}) exceeds 64 bits"
            )));
        }
    }
    Ok(c as u64)
}

/// `binom` for arguments already known to be small.
pub(crate) fn binom_usize(x: usize, y: usize) -> Result<usize> {
    let v = binom(x as i64, y as i64)?;
    usize::try_from(v).map_err(|_| Error::InstanceTooLarge(format!("C({x}, {y})")))
}

pub fn factorial(n: usize) -> Result<u128> {
    (1..=n as u128).try_fold(1u128, |acc, v| {
        acc.checked_mul(v)
            .ok_or_else(|| Error::InstanceTooLarge(format!("{n}! exceeds 128 bits")))
    })
}

fn check_ground(ground: &[usize]) -> Result<()> {
    if ground.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument(format!(
            "ground set {ground:?} must be strictly ascending"
        )));
    }
    Ok(())
}

/// All `size`-subsets of `ground` as ascending lists, in lexicographic order.
pub fn lex_subsets(ground: &[usize], size: usize) -> Result<Vec<Vec<usize>>> {
    check_ground(ground)?;
    if size > ground.len() {
        return Err(Error::InvalidArgument(format!(
            "subset size {size} exceeds ground set size {}",
            ground.len()
        )));
    }
    let n = ground.len();
    let mut out = Vec::with_capacity(binom_usize(n, size)?);
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        out.push(idx.iter().map(|&i| ground[i]).collect());
        // advance to the next combination of positions
        let mut pos = size;
        loop {
            if pos == 0 {
                return Ok(out);
            }
            pos -= 1;
            if idx[pos] < n - size + pos {
                break;
            }
        }
        idx[pos] += 1;
        for j in pos + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// 1-based position of `subset` in `lex_subsets(ground, subset.len())`.
///
/// `subset` may be given in any order but must not repeat elements.
pub fn subset_rank(ground: &[usize], subset: &[usize]) -> Result<usize> {
    check_ground(ground)?;
    let mut positions = Vec::with_capacity(subset.len());
    for &e in subset {
        let p = ground.binary_search(&e).map_err(|_| {
            Error::InvalidArgument(format!("element {e} is not in ground set {ground:?}"))
        })?;
        positions.push(p);
    }
    positions.sort_unstable();
    if positions.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument(format!(
            "subset {subset:?} repeats an element"
        )));
    }
    Ok(rank_of_positions(ground.len(), &positions)? + 1)
}

/// 0-based lexicographic rank of a strictly increasing position list within
/// the `positions.len()`-subsets of `0..n`.
pub(crate) fn rank_of_positions(n: usize, positions: &[usize]) -> Result<usize> {
    let r = positions.len();
    let mut rank = 0usize;
    let mut next = 0usize;
    for (i, &p) in positions.iter().enumerate() {
        // every subset that agrees on the first i positions and puts a smaller
        // element at slot i precedes this one
        for skipped in next..p {
            rank += binom_usize(n - 1 - skipped, r - 1 - i)?;
        }
        next = p + 1;
    }
    Ok(rank)
}

/// Inverse of [`subset_rank`]: the `rank`-th (1-based) `size`-subset of `ground`.
pub fn subset_unrank(ground: &[usize], size: usize, rank: usize) -> Result<Vec<usize>> {
    check_ground(ground)?;
    let n = ground.len();
    if size > n {
        return Err(Error::InvalidArgument(format!(
            "subset size {size} exceeds ground set size {n}"
        )));
    }
    let total = binom_usize(n, size)?;
    if rank == 0 || rank > total {
        return Err(Error::InvalidArgument(format!(
            "rank {rank} outside [1 : {total}]"
        )));
    }
    let mut rem = rank - 1;
    let mut out = Vec::with_capacity(size);
    let mut p = 0usize;
    for slot in 0..size {
        loop {
            let block = binom_usize(n - 1 - p, size - 1 - slot)?;
            if rem < block {
                break;
            }
            rem -= block;
            p += 1;
        }
        out.push(ground[p]);
        p += 1;
    }
    Ok(out)
}

/// The `index`-th permutation of `domain` in lexicographic order of positions
/// (Lehmer code decoding). `index` must be below `domain.len()!`.
pub fn nth_permutation<T: Clone>(domain: &[T], mut index: u128) -> Result<Vec<T>> {
    let n = domain.len();
    let total = factorial(n)?;
    if index >= total {
        return Err(Error::InvalidArgument(format!(
            "permutation index {index} outside [0 : {total})"
        )));
    }
    let mut pool: Vec<T> = domain.to_vec();
    let mut out = Vec::with_capacity(n);
    for remaining in (1..=n).rev() {
        let block = factorial(remaining - 1)?;
        let pick = (index / block) as usize;
        index %= block;
        out.push(pool.remove(pick));
    }
    Ok(out)
}

/// What a random stream is used for. Part of the stream key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Purpose {
    /// Secret piece-to-subfile permutation `p_{i,k}`.
    Placement,
    /// Effective-user permutation `q_k`.
    EffectivePermutation,
    /// Leader choice for file `i` in transmission `k`.
    Leader,
    /// Optional extra shuffle of retained messages.
    MessageOrder,
    /// Random library contents.
    Library,
    /// Random demand vectors.
    Demand,
    /// One randomness tape of a sampled audit.
    AuditSample,
    /// Baseline schemes.
    Baseline,
}

impl Purpose {
    fn code(self) -> u64 {
        match self {
            Purpose::Placement => 1,
            Purpose::EffectivePermutation => 2,
            Purpose::Leader => 3,
            Purpose::MessageOrder => 4,
            Purpose::Library => 5,
            Purpose::Demand => 6,
            Purpose::AuditSample => 7,
            Purpose::Baseline => 8,
        }
    }
}

/// `(purpose, file index, user index)`; unused coordinates are conventionally 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StreamLabel {
    pub purpose: Purpose,
    pub file: u64,
    pub user: u64,
}

impl StreamLabel {
    pub fn new(purpose: Purpose, file: u64, user: u64) -> Self {
        Self {
            purpose,
            file,
            user,
        }
    }
}

/// A reproducible random stream.
///
/// The ChaCha8 key is the concatenation of the four 64-bit words
/// `(root_seed, purpose, file, user)`, so distinct `(seed, label)` pairs never
/// share a key.
#[derive(Debug, Clone)]
pub struct RngStream {
    root_seed: u64,
    label: StreamLabel,
    rng: ChaCha8Rng,
}

pub fn derive_stream(root_seed: u64, label: StreamLabel) -> RngStream {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&root_seed.to_le_bytes());
    key[8..16].copy_from_slice(&label.purpose.code().to_le_bytes());
    key[16..24].copy_from_slice(&label.file.to_le_bytes());
    key[24..32].copy_from_slice(&label.user.to_le_bytes());
    RngStream {
        root_seed,
        label,
        rng: ChaCha8Rng::from_seed(key),
    }
}

impl RngStream {
    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn label(&self) -> StreamLabel {
        self.label
    }

    /// Uniform integer in `0..bound`.
    pub fn below(&mut self, bound: usize) -> usize {
        self.rng.gen_range(0..bound)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

/// Uniform random permutation of `domain` (Fisher-Yates driven by `stream`).
pub fn random_permutation<T: Clone>(stream: &mut RngStream, domain: &[T]) -> Result<Vec<T>> {
    if domain.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot permute an empty domain".into(),
        ));
    }
    let mut out = domain.to_vec();
    out.shuffle(&mut stream.rng);
    Ok(out)
}
