//! Private precoded placement.
//!
//! Each file is cut into `K * C(U, t-1)` equal pieces. Piece range `k`
//! (`[(k-1)C(U,t-1)+1 : kC(U,t-1)]`) holds the subfiles with superscript `k`;
//! a secret permutation `p_{i,k}` decides which piece plays the role of which
//! subfile `f^k_{i,W}`, where `W` runs over the `(t-1)`-subsets of the
//! effective users `[U+1] \ {k}` in lexicographic order.
//!
//! [`PlacementRecord`] is server-side state. Users only ever see a
//! [`CacheState`], which lists global piece indices and never subfile roles.

use std::collections::BTreeMap;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::bits::{self, Bits, BitsRef};
use crate::combinatorics::{
    binom_usize, derive_stream, lex_subsets, random_permutation, rank_of_positions, Purpose,
    StreamLabel,
};
use crate::error::{Error, Result};
use crate::{ratio, Rational};

/// Instance descriptor `(K, N, t, B)` plus derived quantities.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SchemeParams {
    pub k: usize,
    pub n: usize,
    pub t: usize,
    pub b: usize,
    /// `U = (K-1) N`, the number of effective users served per transmission.
    pub u: usize,
    /// `C(U, t-1)`: subfiles (and pieces) per superscript per file.
    pub subfiles_per_owner: usize,
    /// `K C(U, t-1)`.
    pub pieces_per_file: usize,
    pub piece_bits: usize,
}

pub fn validate_params(k: usize, n: usize, t: usize, b: usize) -> Result<SchemeParams> {
    SchemeParams::new(k, n, t, b)
}

impl SchemeParams {
    pub fn new(k: usize, n: usize, t: usize, b: usize) -> Result<Self> {
        if k.min(n) < 2 {
            return Err(Error::InvalidParams(format!(
                "need min(K, N) >= 2, got K={k}, N={n}"
            )));
        }
        let u = (k - 1) * n;
        if t < 1 || t > u + 1 {
            return Err(Error::InvalidParams(format!(
                "t={t} outside [1 : U+1] = [1 : {}]",
                u + 1
            )));
        }
        let subfiles_per_owner = binom_usize(u, t - 1)?;
        let pieces_per_file = k
            .checked_mul(subfiles_per_owner)
            .ok_or_else(|| Error::InstanceTooLarge("pieces per file".into()))?;
        if b == 0 || !b.is_multiple_of(pieces_per_file) {
            return Err(Error::InvalidParams(format!(
                "file size B={b} is not a positive multiple of K*C(U,t-1)={pieces_per_file}"
            )));
        }
        Ok(Self {
            k,
            n,
            t,
            b,
            u,
            subfiles_per_owner,
            pieces_per_file,
            piece_bits: b / pieces_per_file,
        })
    }

    /// Smallest valid instance for `(K, N, t)` with `piece_bits` bits per piece.
    pub fn with_piece_bits(k: usize, n: usize, t: usize, piece_bits: usize) -> Result<Self> {
        if k.min(n) < 2 {
            return Self::new(k, n, t, 0);
        }
        let u = (k - 1) * n;
        if t < 1 || t > u + 1 {
            return Self::new(k, n, t, 0);
        }
        let ppf = k * binom_usize(u, t - 1)?;
        Self::new(k, n, t, ppf * piece_bits)
    }

    /// Memory in files, `(N + t - 1) / K`.
    pub fn memory(&self) -> Rational {
        ratio((self.n + self.t - 1) as i64, self.k as i64)
    }

    /// Number of effective-user labels, `(K-1)(N-1) + K = U + 1`.
    pub fn effective_label_count(&self) -> usize {
        self.u + 1
    }

    /// `[U+1] \ {owner}`, ascending.
    pub fn effective_users(&self, owner: usize) -> Vec<usize> {
        (1..=self.u + 1).filter(|&v| v != owner).collect()
    }

    /// Global piece indices holding superscript-`owner` subfiles.
    pub fn owner_range(&self, owner: usize) -> RangeInclusive<usize> {
        let m = self.subfiles_per_owner;
        (owner - 1) * m + 1..=owner * m
    }

    pub fn owner_of_piece(&self, piece: usize) -> usize {
        (piece - 1) / self.subfiles_per_owner + 1
    }

    /// `C(U, t-1) + (K-1) C(U-1, t-2)` pieces of every file end up in each cache.
    pub fn cached_pieces_per_file(&self) -> usize {
        let other = if self.t >= 2 {
            binom_usize(self.u - 1, self.t - 2).unwrap_or(0)
        } else {
            0
        };
        self.subfiles_per_owner + (self.k - 1) * other
    }

    /// `C(U, t) - C(U-N, t)` messages broadcast by each user.
    pub fn retained_messages_per_user(&self) -> usize {
        let all = binom_usize(self.u, self.t).unwrap_or(0);
        let omitted = binom_usize(self.u - self.n, self.t).unwrap_or(0);
        all - omitted
    }
}

/// A piece `S_{file, piece}` (both 1-based). This is what users see.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "[usize; 2]", from = "[usize; 2]")]
pub struct PieceRef {
    pub file: usize,
    pub piece: usize,
}

impl PieceRef {
    pub fn new(file: usize, piece: usize) -> Self {
        Self { file, piece }
    }
}

impl From<PieceRef> for [usize; 2] {
    fn from(p: PieceRef) -> Self {
        [p.file, p.piece]
    }
}

impl From<[usize; 2]> for PieceRef {
    fn from(a: [usize; 2]) -> Self {
        Self::new(a[0], a[1])
    }
}

/// The N files and their equal-length pieces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Library {
    file_bits: usize,
    piece_bits: usize,
    files: Vec<Bits>,
}

impl Library {
    /// Cuts every file into consecutive `piece_bits`-bit slices.
    pub fn split(files: Vec<Bits>, file_bits: usize, piece_bits: usize) -> Result<Self> {
        if piece_bits == 0 || !file_bits.is_multiple_of(piece_bits) {
            return Err(Error::InvalidArgument(format!(
                "piece size {piece_bits} does not divide file size {file_bits}"
            )));
        }
        for (i, f) in files.iter().enumerate() {
            if f.len() != file_bits {
                return Err(Error::FileLength {
                    file: i + 1,
                    expected: file_bits,
                    actual: f.len(),
                });
            }
        }
        Ok(Self {
            file_bits,
            piece_bits,
            files,
        })
    }

    pub fn random(n: usize, file_bits: usize, piece_bits: usize, seed: u64) -> Result<Self> {
        let files = (1..=n)
            .map(|i| {
                let mut s = derive_stream(seed, StreamLabel::new(Purpose::Library, i as u64, 0));
                bits::random_bits(&mut s, file_bits)
            })
            .collect();
        Self::split(files, file_bits, piece_bits)
    }

    /// Reads `n` files of `file_bits` bits each from a packed MSB-first blob;
    /// file `i` starts at bit offset `(i-1) * file_bits`.
    pub fn from_blob(blob: &[u8], n: usize, file_bits: usize, piece_bits: usize) -> Result<Self> {
        let total = n * file_bits;
        let bits = BitsRef::from_slice(blob);
        if bits.len() < total || blob.len() != total.div_ceil(8) {
            return Err(Error::InvalidArgument(format!(
                "library blob has {} bytes, expected {} for {n} files of {file_bits} bits",
                blob.len(),
                total.div_ceil(8)
            )));
        }
        let files = (0..n)
            .map(|i| bits[i * file_bits..(i + 1) * file_bits].to_bitvec())
            .collect();
        Self::split(files, file_bits, piece_bits)
    }

    pub fn file_count(&self) -> usize {
        self.files.len()
    }

    pub fn file_bits(&self) -> usize {
        self.file_bits
    }

    pub fn piece_bits(&self) -> usize {
        self.piece_bits
    }

    pub fn pieces_per_file(&self) -> usize {
        self.file_bits / self.piece_bits
    }

    pub fn file(&self, file: usize) -> &BitsRef {
        &self.files[file - 1]
    }

    pub fn piece(&self, p: PieceRef) -> &BitsRef {
        let start = (p.piece - 1) * self.piece_bits;
        &self.files[p.file - 1][start..start + self.piece_bits]
    }
}

pub fn split_files(params: &SchemeParams, files: Vec<Bits>) -> Result<Library> {
    if files.len() != params.n {
        return Err(Error::InvalidArgument(format!(
            "expected {} files, got {}",
            params.n,
            files.len()
        )));
    }
    Library::split(files, params.b, params.piece_bits)
}

/// Server-side role of a piece: subfile `f^owner_{file, set}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct SubfileLabel {
    pub owner: usize,
    pub file: usize,
    pub set: Vec<usize>,
}

/// All secret permutations `p_{i,k}` and the resulting subfile map.
#[derive(Debug, Clone)]
pub struct PlacementRecord {
    params: SchemeParams,
    /// `perms[i-1][k-1][j-1] = p_{i,k}[j]`
    perms: Vec<Vec<Vec<usize>>>,
    /// `slot[i-1][piece-1] = j` such that `p_{i,owner}[j] = piece`
    slot: Vec<Vec<usize>>,
    /// `sets[k-1][j-1] = W(j)` over `[U+1] \ {k}`
    sets: Vec<Vec<Vec<usize>>>,
}

impl PlacementRecord {
    /// Builds the record from explicit permutations, `perms[i-1][k-1]` being a
    /// permutation of `owner_range(k)`.
    pub fn from_permutations(params: &SchemeParams, perms: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        if perms.len() != params.n || perms.iter().any(|p| p.len() != params.k) {
            return Err(Error::Inconsistent(format!(
                "expected {}x{} permutations",
                params.n, params.k
            )));
        }
        let mut slot = vec![vec![0usize; params.pieces_per_file]; params.n];
        for (i, per_file) in perms.iter().enumerate() {
            for (k, perm) in per_file.iter().enumerate() {
                let range = params.owner_range(k + 1);
                if perm.len() != params.subfiles_per_owner {
                    return Err(Error::Inconsistent(format!(
                        "p_{{{},{}}} has length {}, expected {}",
                        i + 1,
                        k + 1,
                        perm.len(),
                        params.subfiles_per_owner
                    )));
                }
                for (j, &piece) in perm.iter().enumerate() {
                    if !range.contains(&piece) || slot[i][piece - 1] != 0 {
                        return Err(Error::Inconsistent(format!(
                            "p_{{{},{}}} = {perm:?} is not a permutation of {range:?}",
                            i + 1,
                            k + 1
                        )));
                    }
                    slot[i][piece - 1] = j + 1;
                }
            }
        }
        let sets = (1..=params.k)
            .map(|k| lex_subsets(&params.effective_users(k), params.t - 1))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params: params.clone(),
            perms,
            slot,
            sets,
        })
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn permutation(&self, file: usize, owner: usize) -> &[usize] {
        &self.perms[file - 1][owner - 1]
    }

    /// `W(j)` for superscript `owner`.
    pub fn subset(&self, owner: usize, j: usize) -> &[usize] {
        &self.sets[owner - 1][j - 1]
    }

    /// Global piece index holding `f^owner_{file, set}`; `set` ascending.
    pub fn piece_of(&self, owner: usize, file: usize, set: &[usize]) -> Result<usize> {
        if set.len() != self.params.t - 1 {
            return Err(Error::Inconsistent(format!(
                "subfile set {set:?} must have t-1 = {} elements",
                self.params.t - 1
            )));
        }
        let mut positions = Vec::with_capacity(set.len());
        for &v in set {
            if v == owner || v == 0 || v > self.params.u + 1 {
                return Err(Error::Inconsistent(format!(
                    "{v} is not an effective user of transmission {owner}"
                )));
            }
            positions.push(if v < owner { v - 1 } else { v - 2 });
        }
        if positions.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Inconsistent(format!("subfile set {set:?} not ascending")));
        }
        let j = rank_of_positions(self.params.u, &positions)? + 1;
        Ok(self.perms[file - 1][owner - 1][j - 1])
    }

    pub fn label_of(&self, p: PieceRef) -> SubfileLabel {
        let owner = self.params.owner_of_piece(p.piece);
        let j = self.slot[p.file - 1][p.piece - 1];
        SubfileLabel {
            owner,
            file: p.file,
            set: self.sets[owner - 1][j - 1].clone(),
        }
    }

    /// Real users caching subfile role `(owner, set)`: `({owner} ∪ set) ∩ [K]`.
    pub fn holders(&self, owner: usize, set: &[usize]) -> Vec<usize> {
        let mut h: Vec<usize> = std::iter::once(owner)
            .chain(set.iter().copied().filter(|&v| v <= self.params.k))
            .collect();
        h.sort_unstable();
        h
    }
}

/// Draws every `p_{i,k}` from `(root_seed, (Placement, i, k))`.
pub fn build_placement(params: &SchemeParams, root_seed: u64) -> Result<PlacementRecord> {
    let perms = (1..=params.n)
        .map(|i| {
            (1..=params.k)
                .map(|k| {
                    let range: Vec<usize> = params.owner_range(k).collect();
                    let mut s = derive_stream(
                        root_seed,
                        StreamLabel::new(Purpose::Placement, i as u64, k as u64),
                    );
                    random_permutation(&mut s, &range)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    PlacementRecord::from_permutations(params, perms)
}

/// `Z_k`: cached piece indices (the metadata) and their contents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CacheState {
    pub user: usize,
    pieces: BTreeMap<PieceRef, Bits>,
}

impl CacheState {
    pub fn new(user: usize) -> Self {
        Self {
            user,
            pieces: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, p: PieceRef, payload: Bits) {
        self.pieces.insert(p, payload);
    }

    pub fn contains(&self, p: &PieceRef) -> bool {
        self.pieces.contains_key(p)
    }

    pub fn get(&self, p: &PieceRef) -> Option<&BitsRef> {
        self.pieces.get(p).map(|b| b.as_bitslice())
    }

    /// Cache metadata in ascending `(file, piece)` order.
    pub fn metadata(&self) -> impl Iterator<Item = &PieceRef> {
        self.pieces.keys()
    }

    pub fn entries(&self) -> impl Iterator<Item = (&PieceRef, &Bits)> {
        self.pieces.iter()
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn payload_bits(&self) -> usize {
        self.pieces.values().map(|b| b.len()).sum()
    }
}

fn check_library(params: &SchemeParams, library: &Library) -> Result<()> {
    if library.file_count() != params.n
        || library.file_bits() != params.b
        || library.piece_bits() != params.piece_bits
    {
        return Err(Error::Inconsistent(format!(
            "library ({} files, {} bits, {}-bit pieces) does not match params (N={}, B={}, {}-bit pieces)",
            library.file_count(),
            library.file_bits(),
            library.piece_bits(),
            params.n,
            params.b,
            params.piece_bits
        )));
    }
    Ok(())
}

/// User `u` caches the piece of `f^k_{i,W}` iff `u ∈ ({k} ∪ W) ∩ [K]`.
pub fn build_caches(
    params: &SchemeParams,
    library: &Library,
    placement: &PlacementRecord,
) -> Result<Vec<CacheState>> {
    check_library(params, library)?;
    if placement.params() != params {
        return Err(Error::Inconsistent("placement built for other params".into()));
    }
    let mut caches: Vec<CacheState> = (1..=params.k).map(CacheState::new).collect();
    for i in 1..=params.n {
        for k in 1..=params.k {
            for j in 1..=params.subfiles_per_owner {
                let piece = PieceRef::new(i, placement.permutation(i, k)[j - 1]);
                for user in placement.holders(k, placement.subset(k, j)) {
                    caches[user - 1].insert(piece, library.piece(piece).to_bitvec());
                }
            }
        }
    }
    Ok(caches)
}

/// Checks the cache size constraint: exactly `M B` payload bits, with the
/// per-file, per-superscript piece counts the placement entitles the user to
/// (`C(U,t-1)` in its own range, `C(U-1,t-2)` in every other range).
pub fn memory_check(cache: &CacheState, params: &SchemeParams) -> Result<()> {
    let mut counts = vec![vec![0usize; params.k]; params.n];
    for (p, payload) in cache.entries() {
        if p.file == 0 || p.file > params.n || p.piece == 0 || p.piece > params.pieces_per_file {
            return Err(Error::MemoryViolation(format!(
                "user {} holds out-of-range piece {p:?}",
                cache.user
            )));
        }
        if payload.len() != params.piece_bits {
            return Err(Error::MemoryViolation(format!(
                "piece {p:?} has {} bits, expected {}",
                payload.len(),
                params.piece_bits
            )));
        }
        counts[p.file - 1][params.owner_of_piece(p.piece) - 1] += 1;
    }
    let other = if params.t >= 2 {
        binom_usize(params.u - 1, params.t - 2)?
    } else {
        0
    };
    for (i, per_file) in counts.iter().enumerate() {
        for (k, &c) in per_file.iter().enumerate() {
            let expected = if k + 1 == cache.user {
                params.subfiles_per_owner
            } else {
                other
            };
            if c != expected {
                return Err(Error::MemoryViolation(format!(
                    "user {} holds {c} pieces of file {} in range {}, entitled to {expected}",
                    cache.user,
                    i + 1,
                    k + 1
                )));
            }
        }
    }
    let expected_bits = params.memory() * ratio(params.b as i64, 1);
    if ratio(cache.payload_bits() as i64, 1) != expected_bits {
        return Err(Error::MemoryViolation(format!(
            "user {} caches {} bits, expected M*B = {expected_bits}",
            cache.user,
            cache.payload_bits()
        )));
    }
    Ok(())
}
