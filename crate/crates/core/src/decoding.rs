//! Receiver-side recovery.
//!
//! A receiver only has its own cache and the broadcast signals. Two decoders
//! work from that view: [`peel_decode`] repeatedly resolves messages with a
//! single uncached piece, and [`gf2_decode`] runs Gaussian elimination over
//! GF(2) on all received messages, which also covers messages the server
//! omitted (they are XORs of transmitted ones).

use std::collections::{BTreeMap, HashMap};

use crate::bits::{Bits, BitsRef};
use crate::delivery::{MulticastMessage, Signal};
use crate::error::{Error, Result};
use crate::placement::{CacheState, PieceRef};

/// Everything user `user` may use to decode: `(X, Z_k, d_k)`.
#[derive(Debug, Clone, Copy)]
pub struct ReceiverView<'a> {
    pub user: usize,
    pub demand: usize,
    pub pieces_per_file: usize,
    pub piece_bits: usize,
    pub cache: &'a CacheState,
    pub signals: &'a [Signal],
}

impl<'a> ReceiverView<'a> {
    fn messages(&self) -> impl Iterator<Item = &'a MulticastMessage> {
        self.signals.iter().flat_map(|s| s.messages.iter())
    }

    fn demanded_pieces(&self) -> impl Iterator<Item = PieceRef> + '_ {
        (1..=self.pieces_per_file).map(move |j| PieceRef::new(self.demand, j))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageClass {
    FullyKnown,
    OneUnknown(PieceRef),
    MultiUnknown(usize),
}

pub fn classify_message(view: &ReceiverView<'_>, message: &MulticastMessage) -> MessageClass {
    classify_with(message, |p| view.cache.contains(p))
}

fn classify_with(message: &MulticastMessage, known: impl Fn(&PieceRef) -> bool) -> MessageClass {
    let mut unknown = message.composition.iter().filter(|p| !known(p));
    match (unknown.next(), unknown.count()) {
        (None, _) => MessageClass::FullyKnown,
        (Some(p), 0) => MessageClass::OneUnknown(*p),
        (Some(_), rest) => MessageClass::MultiUnknown(rest + 1),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PeelOutcome {
    /// uncached pieces resolved by peeling
    pub decoded: BTreeMap<PieceRef, Bits>,
    /// every piece of the demanded file is cached or decoded
    pub complete: bool,
}

/// Resolves one-unknown messages until a fixpoint.
pub fn peel_decode(view: &ReceiverView<'_>) -> PeelOutcome {
    let mut decoded: BTreeMap<PieceRef, Bits> = BTreeMap::new();
    let mut pending: Vec<&MulticastMessage> = view.messages().collect();
    loop {
        let mut progress = false;
        pending.retain(|m| {
            let known = |p: &PieceRef| view.cache.contains(p) || decoded.contains_key(p);
            match classify_with(m, known) {
                MessageClass::FullyKnown => false,
                MessageClass::MultiUnknown(_) => true,
                MessageClass::OneUnknown(target) => {
                    let mut value = m.payload.clone();
                    for p in m.composition.iter().filter(|&&p| p != target) {
                        let v: &BitsRef = match view.cache.get(p) {
                            Some(v) => v,
                            None => &decoded[p],
                        };
                        value ^= v;
                    }
                    decoded.insert(target, value);
                    progress = true;
                    false
                }
            }
        });
        if !progress {
            break;
        }
    }
    let complete = view
        .demanded_pieces()
        .all(|p| view.cache.contains(&p) || decoded.contains_key(&p));
    PeelOutcome { decoded, complete }
}

/// Received messages as linear equations over the uncached pieces.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    /// unknowns sorted by `(file, piece)`; column `c` is `unknowns[c]`
    pub unknowns: Vec<PieceRef>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
struct Row {
    mask: Vec<u64>,
    rhs: Bits,
}

impl Row {
    fn bit(&self, col: usize) -> bool {
        self.mask[col / 64] >> (col % 64) & 1 == 1
    }

    fn xor_with(&mut self, other: &Row) {
        for (a, b) in self.mask.iter_mut().zip(&other.mask) {
            *a ^= b;
        }
        self.rhs ^= other.rhs.as_bitslice();
    }

    fn weight(&self) -> u32 {
        self.mask.iter().map(|w| w.count_ones()).sum()
    }

    fn single_column(&self) -> Option<usize> {
        if self.weight() != 1 {
            return None;
        }
        self.mask
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
    }
}

impl LinearSystem {
    /// One equation per received message, in transcript order; cached
    /// pieces are folded into the right-hand side.
    pub fn from_view(view: &ReceiverView<'_>) -> Self {
        let mut unknowns: Vec<PieceRef> = view
            .messages()
            .flat_map(|m| m.composition.iter().copied())
            .filter(|p| !view.cache.contains(p))
            .collect();
        unknowns.sort_unstable();
        unknowns.dedup();
        let column: HashMap<PieceRef, usize> =
            unknowns.iter().enumerate().map(|(c, p)| (*p, c)).collect();
        let words = unknowns.len().div_ceil(64).max(1);
        let rows = view
            .messages()
            .map(|m| {
                let mut row = Row {
                    mask: vec![0; words],
                    rhs: m.payload.clone(),
                };
                for p in &m.composition {
                    match view.cache.get(p) {
                        Some(v) => row.rhs ^= v,
                        None => {
                            let c = column[p];
                            row.mask[c / 64] ^= 1 << (c % 64);
                        }
                    }
                }
                row
            })
            .collect();
        Self { unknowns, rows }
    }

    pub fn equation_count(&self) -> usize {
        self.rows.len()
    }

    /// Reduced row echelon form. Returns the uniquely determined unknowns,
    /// or an error if the system is inconsistent.
    pub fn solve(mut self) -> Result<BTreeMap<PieceRef, Bits>> {
        let mut pivot_row = 0;
        for col in 0..self.unknowns.len() {
            let Some(found) = (pivot_row..self.rows.len()).find(|&r| self.rows[r].bit(col)) else {
                continue;
            };
            self.rows.swap(pivot_row, found);
            let pivot = self.rows[pivot_row].clone();
            for (r, row) in self.rows.iter_mut().enumerate() {
                if r != pivot_row && row.bit(col) {
                    row.xor_with(&pivot);
                }
            }
            pivot_row += 1;
        }
        let mut determined = BTreeMap::new();
        for row in &self.rows {
            if row.weight() == 0 {
                if row.rhs.any() {
                    return Err(Error::ProtocolViolation(
                        "received messages are mutually inconsistent".into(),
                    ));
                }
                continue;
            }
            if let Some(c) = row.single_column() {
                determined.insert(self.unknowns[c], row.rhs.clone());
            }
        }
        Ok(determined)
    }
}

/// Every uncached piece the received messages pin down. Fails if some piece
/// of the demanded file is neither cached nor determined.
pub fn gf2_decode(view: &ReceiverView<'_>) -> Result<BTreeMap<PieceRef, Bits>> {
    let determined = LinearSystem::from_view(view).solve()?;
    if let Some(p) = view
        .demanded_pieces()
        .find(|p| !view.cache.contains(p) && !determined.contains_key(p))
    {
        return Err(Error::ProtocolViolation(format!(
            "user {} cannot determine demanded piece {p:?}",
            view.user
        )));
    }
    Ok(determined)
}

/// Reassembles `F_{d_k}` from cached and decoded pieces.
pub fn recover_file(view: &ReceiverView<'_>, decoded: &BTreeMap<PieceRef, Bits>) -> Result<Bits> {
    let mut file = Bits::with_capacity(view.pieces_per_file * view.piece_bits);
    for p in view.demanded_pieces() {
        let piece = view
            .cache
            .get(&p)
            .or_else(|| decoded.get(&p).map(|b| b.as_bitslice()))
            .ok_or_else(|| {
                Error::ProtocolViolation(format!("user {} is missing piece {p:?}", view.user))
            })?;
        file.extend_from_bitslice(piece);
    }
    Ok(file)
}
