//! Shared-link private scheme with virtual users.
//!
//! The `K` real users are joined by `NK - K` virtual users so that every file
//! is demanded exactly `K` times. Files are cut into `C(NK, t)` pieces, each
//! secretly assigned to a subfile `F_{i,W}` with `W ⊆ [NK]`, `|W| = t`, and
//! real user `k` caches `F_{i,W}` whenever `k ∈ W`. The server then sends every
//! MAN message `⊕_{j∈S} F_{d_j, S∖{j}}`, `|S| = t + 1`, in a secret order.
//! Real users occupy effective labels `1..=K`.

use serde::Serialize;

use crate::combinatorics::{
    binom_usize, derive_stream, lex_subsets, random_permutation, rank_of_positions, Purpose,
    StreamLabel,
};
use crate::delivery::{xor_pieces, DemandVector, MulticastMessage, Signal};
use crate::error::{Error, Result};
use crate::placement::{CacheState, Library, PieceRef};
use crate::{ratio, Rational};

/// Sender id used for the server's signal.
pub const SERVER: usize = 0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SharedLinkInstance {
    pub k: usize,
    pub n: usize,
    pub t_sl: usize,
    pub b: usize,
    /// `NK`.
    pub users: usize,
    /// `C(NK, t_sl)`.
    pub pieces_per_file: usize,
    pub piece_bits: usize,
    /// `perms[i-1][j-1]`: piece holding `F_{i, W(j)}`, `W(j)` the `j`-th
    /// lexicographic `t_sl`-subset of `[NK]`.
    perms: Vec<Vec<usize>>,
    seed: u64,
}

impl SharedLinkInstance {
    pub fn new(k: usize, n: usize, t_sl: usize, b: usize, seed: u64) -> Result<Self> {
        if k.min(n) < 2 {
            return Err(Error::InvalidParams(format!(
                "need min(K, N) >= 2, got K={k}, N={n}"
            )));
        }
        let users = n * k;
        if t_sl > users {
            return Err(Error::InvalidParams(format!("t={t_sl} exceeds NK={users}")));
        }
        let pieces_per_file = binom_usize(users, t_sl)?;
        if b == 0 || !b.is_multiple_of(pieces_per_file) {
            return Err(Error::InvalidParams(format!(
                "file size B={b} is not a positive multiple of C(NK,t)={pieces_per_file}"
            )));
        }
        let domain: Vec<usize> = (1..=pieces_per_file).collect();
        let perms = (1..=n)
            .map(|i| {
                let mut s = derive_stream(seed, StreamLabel::new(Purpose::Baseline, i as u64, 0));
                random_permutation(&mut s, &domain)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k,
            n,
            t_sl,
            b,
            users,
            pieces_per_file,
            piece_bits: b / pieces_per_file,
            perms,
            seed,
        })
    }

    /// Piece holding `F_{file, set}`; `set` ascending.
    pub fn piece_of(&self, file: usize, set: &[usize]) -> Result<usize> {
        let positions: Vec<usize> = set.iter().map(|&w| w - 1).collect();
        let j = rank_of_positions(self.users, &positions)?;
        Ok(self.perms[file - 1][j])
    }

    /// Per-user memory in files, `t_sl / K`.
    pub fn memory(&self) -> Rational {
        ratio(self.t_sl as i64, self.k as i64)
    }

    /// `C(NK, t+1) / C(NK, t)`.
    pub fn load(&self) -> Result<Rational> {
        Ok(ratio(
            binom_usize(self.users, self.t_sl + 1)? as i64,
            self.pieces_per_file as i64,
        ))
    }

    /// Real demands followed by virtual ones filling each file up to `K`
    /// demanders, in file order.
    pub fn effective_demands(&self, d: &DemandVector) -> Result<Vec<usize>> {
        if d.len() != self.k {
            return Err(Error::InvalidArgument(format!(
                "demand vector has {} entries, K = {}",
                d.len(),
                self.k
            )));
        }
        let mut out = d.as_slice().to_vec();
        for file in 1..=self.n {
            let real = d.as_slice().iter().filter(|&&x| x == file).count();
            out.extend(std::iter::repeat_n(file, self.k - real));
        }
        Ok(out)
    }
}

/// Draws the placement and returns the caches of the `K` real users.
pub fn wc_sl_place(
    k: usize,
    n: usize,
    t_sl: usize,
    library: &Library,
    seed: u64,
) -> Result<(SharedLinkInstance, Vec<CacheState>)> {
    let inst = SharedLinkInstance::new(k, n, t_sl, library.file_bits(), seed)?;
    if library.file_count() != n || library.piece_bits() != inst.piece_bits {
        return Err(Error::Inconsistent(
            "library does not match the shared-link instance".into(),
        ));
    }
    let ground: Vec<usize> = (1..=inst.users).collect();
    let subsets = lex_subsets(&ground, t_sl)?;
    let mut caches: Vec<CacheState> = (1..=k).map(CacheState::new).collect();
    for file in 1..=n {
        for (j, w) in subsets.iter().enumerate() {
            let p = PieceRef::new(file, inst.perms[file - 1][j]);
            for &user in w.iter().filter(|&&u| u <= k) {
                caches[user - 1].insert(p, library.piece(p).to_bitvec());
            }
        }
    }
    Ok((inst, caches))
}

/// The server's single signal: all `C(NK, t+1)` MAN messages in a secretly
/// permuted order.
pub fn wc_sl_deliver(
    inst: &SharedLinkInstance,
    library: &Library,
    d: &DemandVector,
) -> Result<Signal> {
    let eff = inst.effective_demands(d)?;
    let ground: Vec<usize> = (1..=inst.users).collect();
    let sets = if inst.t_sl < inst.users {
        lex_subsets(&ground, inst.t_sl + 1)?
    } else {
        Vec::new()
    };
    let mut messages = sets
        .into_iter()
        .map(|s| {
            let composition = s
                .iter()
                .map(|&j| {
                    let rest: Vec<usize> = s.iter().copied().filter(|&x| x != j).collect();
                    Ok(PieceRef::new(eff[j - 1], inst.piece_of(eff[j - 1], &rest)?))
                })
                .collect::<Result<Vec<_>>>()?;
            let payload = xor_pieces(inst.piece_bits, &composition, |p| Some(library.piece(*p)))
                .expect("library holds every piece");
            Ok(MulticastMessage {
                index_set: s,
                composition,
                payload,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if messages.len() > 1 {
        let mut s = derive_stream(inst.seed, StreamLabel::new(Purpose::Baseline, 0, 1));
        let order: Vec<usize> = (0..messages.len()).collect();
        let order = random_permutation(&mut s, &order)?;
        let mut slots: Vec<Option<MulticastMessage>> = messages.into_iter().map(Some).collect();
        messages = order
            .into_iter()
            .map(|i| slots[i].take().expect("permutation"))
            .collect();
    }
    Ok(Signal {
        sender: SERVER,
        messages,
    })
}
