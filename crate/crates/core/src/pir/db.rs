use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"QBDB";

/// `N = 2^l` words of `word_bits` bits each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Database {
    entries: Vec<u64>,
    word_bits: usize,
}

impl Database {
    pub fn new(entries: Vec<u64>, word_bits: usize) -> Result<Self> {
        if entries.is_empty() || !entries.len().is_power_of_two() {
            return Err(Error::InvalidParams(format!("database size {} is not a power of two", entries.len())));
        }
        if word_bits == 0 || word_bits > 64 {
            return Err(Error::InvalidParams(format!("word width {word_bits} outside 1..=64")));
        }
        if let Some(&v) = entries.iter().find(|&&v| word_bits < 64 && v >> word_bits != 0) {
            return Err(Error::PlaintextOutOfRange { value: v, modulus: 1 << word_bits });
        }
        Ok(Database { entries, word_bits })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, word_bits: usize, rng: &mut R) -> Result<Self> {
        let mask = if word_bits >= 64 { u64::MAX } else { (1u64 << word_bits) - 1 };
        Self::new((0..n).map(|_| rng.gen::<u64>() & mask).collect(), word_bits)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn index_bits(&self) -> usize {
        self.entries.len().trailing_zeros() as usize
    }

    pub fn word_bits(&self) -> usize {
        self.word_bits
    }

    pub fn entries(&self) -> &[u64] {
        &self.entries
    }

    pub fn get(&self, i: u64) -> Result<u64> {
        self.entries.get(i as usize).copied().ok_or(Error::IndexOutOfRange { index: i, size: self.len() as u64 })
    }

    fn word_bytes(&self) -> usize {
        self.word_bits.div_ceil(8)
    }

    /// 16-byte header (`QBDB`, `N` as u64, `l̃` as u32, all little-endian)
    /// followed by `⌈l̃/8⌉`-byte little-endian words.
    pub fn to_bytes(&self) -> Vec<u8> {
        let wb = self.word_bytes();
        let mut out = Vec::with_capacity(16 + wb * self.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.word_bits as u32).to_le_bytes());
        for &e in &self.entries {
            out.extend_from_slice(&e.to_le_bytes()[..wb]);
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != MAGIC {
            return Err(Error::Malformed("missing QBDB header".into()));
        }
        let n = u64::from_le_bytes(bytes[4..12].try_into().unwrap()) as usize;
        let word_bits = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
        let wb = word_bits.div_ceil(8);
        if word_bits == 0 || word_bits > 64 || bytes.len() != 16 + n.saturating_mul(wb) {
            return Err(Error::Malformed(format!("{} payload bytes for N = {n}, l̃ = {word_bits}", bytes.len() - 16)));
        }
        let entries = bytes[16..]
            .chunks(wb)
            .map(|c| {
                let mut w = [0u8; 8];
                w[..wb].copy_from_slice(c);
                u64::from_le_bytes(w)
            })
            .collect();
        Self::new(entries, word_bits)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_bytes(&bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn file_round_trip(l in 0u32..7, w in 1usize..20, seed in any::<u64>()) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
            let db = Database::random(1 << l, w, &mut rng).unwrap();
            let bytes = db.to_bytes();
            prop_assert_eq!(bytes.len(), 16 + (1usize << l) * w.div_ceil(8));
            prop_assert_eq!(Database::from_bytes(&bytes).unwrap(), db);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Database::new(vec![0; 3], 1).is_err());
        assert!(Database::new(vec![2, 0], 1).is_err());
        let mut b = Database::new(vec![1, 0], 1).unwrap().to_bytes();
        b.pop();
        assert!(Database::from_bytes(&b).is_err());
        assert!(matches!(Database::new(vec![0; 4], 1).unwrap().get(4), Err(Error::IndexOutOfRange { .. })));
    }
}
