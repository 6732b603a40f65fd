//! Bit-string helpers. Files, pieces and payloads are MSB-first bit vectors.

use bitvec::prelude::*;

use crate::combinatorics::RngStream;
use crate::error::{Error, Result};

pub type Bits = BitVec<u8, Msb0>;
pub type BitsRef = BitSlice<u8, Msb0>;

/// `acc ^= other`; lengths must match.
pub fn xor_into(acc: &mut BitsRef, other: &BitsRef) {
    debug_assert_eq!(acc.len(), other.len());
    *acc ^= other;
}

/// Packed bytes, MSB-first, with trailing padding bits cleared.
pub fn to_bytes(bits: &BitsRef) -> Vec<u8> {
    let mut owned = bits.to_bitvec();
    owned.set_uninitialized(false);
    owned.into_vec()
}

pub fn to_hex(bits: &BitsRef) -> String {
    hex::encode(to_bytes(bits))
}

pub fn from_hex(s: &str, len: usize) -> Result<Bits> {
    let bytes = hex::decode(s).map_err(|e| Error::InvalidArgument(format!("bad hex: {e}")))?;
    if bytes.len() * 8 < len {
        return Err(Error::InvalidArgument(format!(
            "hex string holds {} bits, need {len}",
            bytes.len() * 8
        )));
    }
    let mut bits = Bits::from_vec(bytes);
    bits.truncate(len);
    Ok(bits)
}

/// Parses a string of `0`/`1` characters.
pub fn from_str01(s: &str) -> Result<Bits> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(false),
            '1' => Ok(true),
            other => Err(Error::InvalidArgument(format!("bad bit character {other:?}"))),
        })
        .collect()
}

pub fn random_bits(stream: &mut RngStream, len: usize) -> Bits {
    let mut bytes = vec![0u8; len.div_ceil(8)];
    rand::RngCore::fill_bytes(stream, &mut bytes);
    let mut bits = Bits::from_vec(bytes);
    bits.truncate(len);
    bits
}
