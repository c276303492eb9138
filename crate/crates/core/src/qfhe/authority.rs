use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lattice::{MheCiphertext, MheParams, MhePublicKey, MheSecretKey};
use crate::qsim::{Gate, QuantumState, SlotId};

/// One line of the append-only audit log.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditEntry {
    pub op: &'static str,
    pub qubit: Option<SlotId>,
    /// SHA-256 commitment to the sampled mask bits and a salt.
    pub commit: String,
}

impl fmt::Display for AuditEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.qubit {
            Some(q) => write!(f, "CALL {} {} {}", self.op, q, self.commit),
            None => write!(f, "CALL {} - {}", self.op, self.commit),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AuthorityCounts {
    pub crot: usize,
    pub ecnot: usize,
    pub refresh: usize,
    pub convert: usize,
}

/// Trusted service standing in for the encrypted conditional rotation.
///
/// It holds the MHE secret key, privately decrypts the encrypted angle
/// bits, applies `Z^d R_α` with a fresh uniform `d`, and hands back only
/// an encryption of `d`. Every call is logged; nothing else touches the key.
pub struct CrotAuthority {
    sk: MheSecretKey,
    pk: MhePublicKey,
    rng: ChaCha20Rng,
    log: Vec<AuditEntry>,
    counts: AuthorityCounts,
}

impl CrotAuthority {
    pub fn new(sk: MheSecretKey, pk: MhePublicKey, seed: u64) -> Self {
        CrotAuthority { sk, pk, rng: ChaCha20Rng::seed_from_u64(seed), log: Vec::new(), counts: AuthorityCounts::default() }
    }

    pub fn params(&self) -> &MheParams {
        self.pk.params()
    }

    pub fn public_key(&self) -> &MhePublicKey {
        &self.pk
    }

    pub fn log(&self) -> &[AuditEntry] {
        &self.log
    }

    pub fn log_lines(&self) -> Vec<String> {
        self.log.iter().map(|e| e.to_string()).collect()
    }

    pub fn counts(&self) -> AuthorityCounts {
        self.counts
    }

    /// Public-key encryption with the authority's randomness.
    pub fn encrypt(&mut self, bit: u8) -> Result<MheCiphertext> {
        self.pk.encrypt(bit, &mut self.rng)
    }

    pub(crate) fn rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.rng
    }

    pub(crate) fn record(&mut self, op: &'static str, qubit: Option<SlotId>, bits: &[u8]) {
        let salt: [u8; 16] = self.rng.gen();
        let mut h = Sha256::new();
        h.update((self.log.len() as u64).to_le_bytes());
        h.update(op.as_bytes());
        h.update(bits);
        h.update(salt);
        let commit = hex::encode(h.finalize());
        self.log.push(AuditEntry { op, qubit, commit });
    }

    fn open(&self, ct: &MheCiphertext) -> Result<u8> {
        let p = self.params();
        if ct.params.log_q != p.log_q || ct.params.n != p.n {
            return Err(Error::ParamsMismatch("ciphertext not under the authority key".into()));
        }
        if ct.phase_noise_bound() >= (p.q() / 4) as f64 {
            return Err(Error::NoiseBudget(format!("ledger {} past the decryption margin", ct.noise)));
        }
        self.sk.decrypt(ct)
    }

    /// Encrypted conditional rotation: with `α = Σ w_j · bit_j` (turns) over
    /// public weights and encrypted bits, applies `Z^d R_α` to `q` and
    /// returns `Enc(d)`.
    pub fn crot(&mut self, state: &mut QuantumState, q: SlotId, terms: &[(f64, &MheCiphertext)]) -> Result<MheCiphertext> {
        let mut alpha = 0.0f64;
        for &(w, ct) in terms {
            if self.open(ct)? == 1 {
                alpha += w;
            }
        }
        let d: u8 = self.rng.gen_range(0..2);
        Gate::R(q, alpha.rem_euclid(1.0)).apply(state)?;
        if d == 1 {
            Gate::Z(q).apply(state)?;
        }
        self.counts.crot += 1;
        self.record("CROT", Some(q), &[d]);
        self.encrypt(d)
    }

    /// Encrypted CNOT: applies `CNOT^s` then `Z_c^e X_t^f` with fresh
    /// uniform masks, returning `(Enc(e), Enc(f))`.
    pub fn ecnot(&mut self, state: &mut QuantumState, c: SlotId, t: SlotId, s: &MheCiphertext) -> Result<(MheCiphertext, MheCiphertext)> {
        let s = self.open(s)?;
        if s == 1 {
            Gate::Cnot(c, t).apply(state)?;
        }
        let e: u8 = self.rng.gen_range(0..2);
        let f: u8 = self.rng.gen_range(0..2);
        if e == 1 {
            Gate::Z(c).apply(state)?;
        }
        if f == 1 {
            Gate::X(t).apply(state)?;
        }
        self.counts.ecnot += 1;
        self.record("ECNOT", Some(c), &[e, f]);
        Ok((self.encrypt(e)?, self.encrypt(f)?))
    }

    /// Stand-in for classical MHE bootstrapping: a fresh encryption of the
    /// same bit, used when a key's noise ledger would pass `beta_acc`.
    pub fn refresh(&mut self, ct: &MheCiphertext) -> Result<MheCiphertext> {
        let bit = self.open(ct)?;
        self.counts.refresh += 1;
        self.record("REFRESH", None, &[]);
        self.encrypt(bit)
    }

    pub(crate) fn note_convert(&mut self, qubit: SlotId) {
        self.counts.convert += 1;
        self.record("CONVERT", Some(qubit), &[]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::mhe;

    pub(crate) fn authority(seed: u64) -> (CrotAuthority, MheSecretKey) {
        let p = MheParams::new(32, 2, 4, 1e7).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (sk, pk) = mhe::keygen(&p, &mut rng);
        (CrotAuthority::new(sk.clone(), pk, seed + 1), sk)
    }

    #[test]
    fn zero_angle_only_masks() {
        let (mut auth, sk) = authority(1);
        let zero = auth.encrypt(0).unwrap();
        let mut s = QuantumState::qubits(1);
        Gate::H(0).apply(&mut s).unwrap();
        let before = s.clone();
        let d = auth.crot(&mut s, 0, &[(0.5, &zero)]).unwrap();
        if sk.decrypt(&d).unwrap() == 1 {
            Gate::Z(0).apply(&mut s).unwrap();
        }
        assert!((s.fidelity(&before).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(auth.log().len(), 1);
        assert!(auth.log_lines()[0].starts_with("CALL CROT 0 "));
    }

    #[test]
    fn two_half_turns_cancel() {
        let (mut auth, sk) = authority(2);
        let one = auth.encrypt(1).unwrap();
        let mut s = QuantumState::qubits(1);
        Gate::H(0).apply(&mut s).unwrap();
        let before = s.clone();
        let d1 = auth.crot(&mut s, 0, &[(0.5, &one)]).unwrap();
        let d2 = auth.crot(&mut s, 0, &[(0.5, &one)]).unwrap();
        if sk.decrypt(&d1).unwrap() ^ sk.decrypt(&d2).unwrap() == 1 {
            Gate::Z(0).apply(&mut s).unwrap();
        }
        assert!((s.fidelity(&before).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mask_bits_are_uniform() {
        let (mut auth, sk) = authority(3);
        let zero = auth.encrypt(0).unwrap();
        let mut s = QuantumState::qubits(1);
        let mut ones = 0;
        for _ in 0..10_000 {
            let d = auth.crot(&mut s, 0, &[(0.25, &zero)]).unwrap();
            ones += sk.decrypt(&d).unwrap() as u32;
        }
        assert!((ones as f64 / 1e4 - 0.5).abs() < 0.02);
        assert_eq!(auth.counts().crot, 10_000);
    }
}
