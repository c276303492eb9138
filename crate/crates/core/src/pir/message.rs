use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::MheCiphertext;
use crate::paillier::PaillierCiphertext;

/// Protocol messages. Ciphertexts travel as hex of their byte encodings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type")]
pub enum PirMessage {
    /// Bitwise MHE encryptions of the index, least significant first.
    Query { bits: Vec<String> },
    /// Index one-time-padded in the clear plus MHE encryptions of the pad.
    MaskedQuery { masked_index: Vec<u8>, keys: Vec<String> },
    /// Measured word `DB_i ⊕ a'₂` with encryptions of `a'₂`.
    Answer { word: u64, mask: Vec<String> },
    /// MHE control bits the server wants as Paillier ciphertexts. `converter`
    /// names how the server will turn Paillier masks back into MHE.
    ConversionRequest { bits: Vec<String>, converter: String },
    /// Paillier encryptions of the requested bits and bitwise MHE
    /// encryptions of the Paillier decryption key `(λ, μ)`.
    ConversionReply { paillier: Vec<String>, modulus: u64, encrypted_keys: Vec<String> },
}

pub fn encode_mhe(cts: &[MheCiphertext]) -> Vec<String> {
    cts.iter().map(|c| hex::encode(c.to_bytes())).collect()
}

pub fn decode_mhe(hexes: &[String]) -> Result<Vec<MheCiphertext>> {
    hexes
        .iter()
        .map(|h| MheCiphertext::from_bytes(&hex::decode(h).map_err(|e| Error::Malformed(e.to_string()))?))
        .collect()
}

pub fn decode_paillier(hexes: &[String], modulus: u64) -> Result<Vec<PaillierCiphertext>> {
    let n = num_bigint::BigUint::from(modulus);
    hexes.iter().map(|h| PaillierCiphertext::from_hex(h, &n)).collect()
}

impl PirMessage {
    pub fn kind(&self) -> &'static str {
        match self {
            PirMessage::Query { .. } => "Query",
            PirMessage::MaskedQuery { .. } => "MaskedQuery",
            PirMessage::Answer { .. } => "Answer",
            PirMessage::ConversionRequest { .. } => "ConversionRequest",
            PirMessage::ConversionReply { .. } => "ConversionReply",
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("messages serialize")
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        serde_json::from_slice(bytes).map_err(|e| Error::Malformed(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Client,
    Server,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: usize,
    pub sender: Party,
    pub round: usize,
    #[serde(rename = "type")]
    pub kind: String,
    /// Hex of the serialized message.
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct Footer {
    verdict: Option<String>,
    seeds: BTreeMap<String, u64>,
}

/// Ordered message log. The opening query belongs to round 1, each
/// conversion exchange opens a new round and the answer closes the last one.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
    pub seeds: BTreeMap<String, u64>,
    pub verdict: Option<String>,
    conversions: usize,
}

impl Transcript {
    pub fn new(seeds: BTreeMap<String, u64>) -> Self {
        Transcript { seeds, ..Default::default() }
    }

    pub fn record(&mut self, sender: Party, msg: &PirMessage) {
        if let PirMessage::ConversionRequest { .. } = msg {
            self.conversions += 1;
        }
        let round = self.conversions.max(1);
        self.entries.push(TranscriptEntry {
            seq: self.entries.len(),
            sender,
            round,
            kind: msg.kind().into(),
            payload: hex::encode(msg.to_bytes()),
        });
    }

    pub fn rounds(&self) -> usize {
        self.entries.iter().map(|e| e.round).max().unwrap_or(0)
    }

    pub fn count(&self, kind: &str) -> usize {
        self.entries.iter().filter(|e| e.kind == kind).count()
    }

    pub fn message_lengths(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.payload.len() / 2).collect()
    }

    pub fn messages(&self) -> Result<Vec<PirMessage>> {
        self.entries
            .iter()
            .map(|e| PirMessage::from_bytes(&hex::decode(&e.payload).map_err(|x| Error::Malformed(x.to_string()))?))
            .collect()
    }

    /// One JSON object per message, then a footer with the verdict and seeds.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entries serialize"));
            out.push('\n');
        }
        let footer = Footer { verdict: self.verdict.clone(), seeds: self.seeds.clone() };
        out.push_str(&serde_json::to_string(&footer).expect("footer serializes"));
        out.push('\n');
        out
    }

    pub fn from_jsonl(s: &str) -> Result<Self> {
        let lines: Vec<&str> = s.lines().filter(|l| !l.trim().is_empty()).collect();
        let (last, body) = lines.split_last().ok_or_else(|| Error::Malformed("empty transcript".into()))?;
        let footer: Footer = serde_json::from_str(last).map_err(|e| Error::Malformed(e.to_string()))?;
        let entries: Vec<TranscriptEntry> = body
            .iter()
            .map(|l| serde_json::from_str(l).map_err(|e| Error::Malformed(e.to_string())))
            .collect::<Result<_>>()?;
        let conversions = entries.iter().filter(|e| e.kind == "ConversionRequest").count();
        Ok(Transcript { entries, seeds: footer.seeds, verdict: footer.verdict, conversions })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_round_trip() {
        let msgs = [
            PirMessage::Query { bits: vec!["00ff".into()] },
            PirMessage::MaskedQuery { masked_index: vec![1, 0], keys: vec![] },
            PirMessage::Answer { word: 9, mask: vec!["ab".into(), "cd".into()] },
            PirMessage::ConversionRequest { bits: vec![], converter: "oracle-assisted".into() },
            PirMessage::ConversionReply { paillier: vec!["0e".into()], modulus: 15, encrypted_keys: vec![] },
        ];
        for m in &msgs {
            assert_eq!(&PirMessage::from_bytes(&m.to_bytes()).unwrap(), m);
        }
        assert!(PirMessage::from_bytes(b"{\"type\":\"Nope\"}").is_err());
    }

    #[test]
    fn transcript_rounds_and_jsonl() {
        let mut t = Transcript::new([("client".to_string(), 3u64)].into());
        t.record(Party::Client, &PirMessage::MaskedQuery { masked_index: vec![1], keys: vec![] });
        for _ in 0..3 {
            t.record(Party::Server, &PirMessage::ConversionRequest { bits: vec![], converter: "x".into() });
            t.record(Party::Client, &PirMessage::ConversionReply { paillier: vec![], modulus: 15, encrypted_keys: vec![] });
        }
        t.record(Party::Server, &PirMessage::Answer { word: 1, mask: vec![] });
        t.verdict = Some("ok".into());
        assert_eq!(t.rounds(), 3);
        let back = Transcript::from_jsonl(&t.to_jsonl()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.messages().unwrap().len(), 8);
    }
}
