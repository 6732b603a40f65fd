//! JSON-lines transcripts of broadcast signals.
//!
//! One line per signal:
//! `{"scheme":"coded","sender":1,"messages":[{"composition":[[1,2],[2,4]],"payload_hex":"a0"}]}`.
//! Pieces are `[file, piece]` pairs and payloads are MSB-first hex with the
//! trailing bits of the last byte cleared.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize, Serializer};

use crate::analysis::SchemeTag;
use crate::bits;
use crate::delivery::Signal;
use crate::error::Result;
use crate::placement::PieceRef;
use crate::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptMessage {
    pub composition: Vec<PieceRef>,
    pub payload_hex: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub scheme: String,
    pub sender: usize,
    pub messages: Vec<TranscriptMessage>,
}

impl TranscriptRecord {
    pub fn from_signal(scheme: SchemeTag, signal: &Signal) -> Self {
        Self {
            scheme: scheme.as_str().to_string(),
            sender: signal.sender,
            messages: signal
                .messages
                .iter()
                .map(|m| TranscriptMessage {
                    composition: m.composition.clone(),
                    payload_hex: bits::to_hex(&m.payload),
                })
                .collect(),
        }
    }
}

pub fn write_transcript<W: Write>(mut out: W, scheme: SchemeTag, signals: &[Signal]) -> Result<()> {
    for s in signals {
        serde_json::to_writer(&mut out, &TranscriptRecord::from_signal(scheme, s))?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn transcript_string(scheme: SchemeTag, signals: &[Signal]) -> String {
    let mut buf = Vec::new();
    write_transcript(&mut buf, scheme, signals).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn read_transcript<R: BufRead>(input: R) -> Result<Vec<TranscriptRecord>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

/// Serializes a rational as `"p/q"` (or `"p"` when integral).
pub fn serialize_rational<S: Serializer>(r: &Rational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bits::from_str01;
    use crate::delivery::MulticastMessage;

    #[test]
    fn roundtrip() {
        let signals = vec![Signal {
            sender: 2,
            messages: vec![MulticastMessage {
                index_set: vec![1, 2],
                composition: vec![PieceRef::new(1, 3), PieceRef::new(2, 6)],
                payload: from_str01("101").unwrap(),
            }],
        }];
        let text = transcript_string(SchemeTag::Coded, &signals);
        assert_eq!(
            text,
            "{\"scheme\":\"coded\",\"sender\":2,\"messages\":[{\"composition\":[[1,3],[2,6]],\"payload_hex\":\"a0\"}]}\n"
        );
        let back = read_transcript(text.as_bytes()).unwrap();
        assert_eq!(back[0], TranscriptRecord::from_signal(SchemeTag::Coded, &signals[0]));
    }
}
