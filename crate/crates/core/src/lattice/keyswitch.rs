use rand::Rng;

use super::gaussian::DiscreteGaussian;
use super::lwe::{encrypt_with_error, LweCiphertext, LweSecretKey};
use super::params::{round_div, LweParams};
use crate::error::{Error, Result};

/// Which `a_{i,j}` terms enter the key-switching sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeySwitchMode {
    /// Every bit `j < log Q'`.
    Full,
    /// Skips bits whose scale `floor(2^j Q/Q')` is zero; tighter bound.
    Truncated,
}

/// Table of `LWE_{Q,n}` encryptions of source-key bits `s'_i` at scale
/// `floor(2^j Q/Q')` for every `j < log Q'`.
#[derive(Debug, Clone)]
pub struct KeySwitchKey {
    entries: Vec<Vec<LweCiphertext>>,
    src_log_q: u32,
    dest: LweParams,
}

impl KeySwitchKey {
    /// `dest.noise_bound` is the fresh-noise bound `Err(LWE(sk))`.
    pub fn generate<R: Rng + ?Sized>(
        src_key: &LweSecretKey,
        src_log_q: u32,
        dest_key: &LweSecretKey,
        dest: &LweParams,
        rng: &mut R,
    ) -> Result<Self> {
        if dest.log_q > src_log_q {
            return Err(Error::InvalidParams("key switching expects Q <= Q'".into()));
        }
        if dest_key.dim() != dest.n {
            return Err(Error::ParamsMismatch("destination key dimension".into()));
        }
        let gauss = DiscreteGaussian::new(dest.noise_bound);
        // plaintext bits are irrelevant here; each entry carries its own scale
        let carrier = dest.with_plaintext_bits(0)?;
        let mut entries = Vec::with_capacity(src_key.dim());
        for &bit in src_key.bits() {
            let mut row = Vec::with_capacity(src_log_q as usize);
            for j in 0..src_log_q {
                let scale = Self::scale(j, src_log_q, dest.log_q);
                let mut ct = encrypt_with_error(dest_key, 0, gauss.sample(rng), &carrier, rng)?;
                ct.b = ct.b.wrapping_add(scale * bit as u64) & dest.mask();
                ct.noise_bound = dest.noise_bound as f64;
                row.push(ct);
            }
            entries.push(row);
        }
        Ok(KeySwitchKey { entries, src_log_q, dest: *dest })
    }

    fn scale(j: u32, src_log_q: u32, dest_log_q: u32) -> u64 {
        let shift = j as i64 + dest_log_q as i64 - src_log_q as i64;
        if shift < 0 {
            0
        } else {
            1u64 << shift
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> &LweCiphertext {
        &self.entries[i][j]
    }

    pub fn source_dim(&self) -> usize {
        self.entries.len()
    }

    pub fn dest(&self) -> &LweParams {
        &self.dest
    }

    pub fn fresh_noise(&self) -> u64 {
        self.dest.noise_bound
    }

    /// Output noise bound for an input with ledger `err_m`:
    /// `Err(sk)·n'·log Q' + Err(m)·Q/Q' + sqrt(n'·log Q')`, with `log Q`
    /// replacing `log Q'` in the truncated sum.
    pub fn noise_bound(&self, err_m: f64, mode: KeySwitchMode) -> f64 {
        let n_src = self.entries.len() as f64;
        let bits = match mode {
            KeySwitchMode::Full => self.src_log_q,
            KeySwitchMode::Truncated => self.dest.log_q,
        } as f64;
        let ratio = (self.dest.log_q as f64 - self.src_log_q as f64).exp2();
        self.fresh_noise() as f64 * n_src * bits + err_m * ratio + (n_src * bits).sqrt()
    }

    /// `(0, round(b Q/Q')) - Σ a_{i,j} · ksk[i][j]`.
    pub fn switch(&self, ct: &LweCiphertext, mode: KeySwitchMode) -> Result<LweCiphertext> {
        if ct.params.log_q != self.src_log_q || ct.params.n != self.entries.len() {
            return Err(Error::ParamsMismatch(format!(
                "ciphertext over (2^{}, {}) but key expects (2^{}, {})",
                ct.params.log_q,
                ct.params.n,
                self.src_log_q,
                self.entries.len()
            )));
        }
        let out_params = LweParams { log_l: ct.params.log_l.min(self.dest.log_q), ..self.dest };
        let mask = self.dest.mask();
        let b = round_div(ct.b as u128 * self.dest.q() as u128, 1u128 << self.src_log_q) as u64 & mask;
        let start = match mode {
            KeySwitchMode::Full => 0,
            KeySwitchMode::Truncated => self.src_log_q - self.dest.log_q,
        };
        let mut a = vec![0u64; self.dest.n];
        let mut b = b;
        for (i, &ai) in ct.a.iter().enumerate() {
            for j in start..self.src_log_q {
                if (ai >> j) & 1 == 1 {
                    let e = &self.entries[i][j as usize];
                    for (acc, &x) in a.iter_mut().zip(&e.a) {
                        *acc = acc.wrapping_sub(x);
                    }
                    b = b.wrapping_sub(e.b);
                }
            }
        }
        a.iter_mut().for_each(|x| *x &= mask);
        Ok(LweCiphertext { a, b: b & mask, params: out_params, noise_bound: self.noise_bound(ct.noise_bound, mode) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::lwe::{encrypt, keygen};
    use crate::lattice::params::centered;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy() -> (LweParams, LweParams, LweSecretKey, LweSecretKey, KeySwitchKey, ChaCha20Rng) {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let src = LweParams::new(20, 2, 8, 8).unwrap();
        let dst = LweParams::new(16, 2, 4, 8).unwrap();
        let s_src = keygen(&src, &mut rng);
        let s_dst = keygen(&dst, &mut rng);
        let ksk = KeySwitchKey::generate(&s_src, 20, &s_dst, &dst, &mut rng).unwrap();
        (src, dst, s_src, s_dst, ksk, rng)
    }

    #[test]
    fn entries_decrypt_to_scaled_bits() {
        let (_, dst, s_src, s_dst, ksk, _) = toy();
        for i in 0..8 {
            for j in 0..20 {
                let e = ksk.entry(i, j);
                let expect = KeySwitchKey::scale(j as u32, 20, 16) * s_src.bits()[i] as u64;
                let err = centered(e.phase(&s_dst).unwrap().wrapping_sub(expect), dst.log_q);
                assert!(err.unsigned_abs() <= dst.noise_bound);
            }
        }
    }

    #[test]
    fn zero_ciphertext_switches_to_zero() {
        let (src, _, _, s_dst, ksk, _) = toy();
        let out = ksk.switch(&LweCiphertext::zero(src), KeySwitchMode::Full).unwrap();
        assert_eq!(out.a, vec![0; 4]);
        assert_eq!(out.decrypt(&s_dst).unwrap(), 0);
    }

    #[test]
    fn roundtrip_within_bound() {
        let (src, _, s_src, s_dst, ksk, mut rng) = toy();
        for mode in [KeySwitchMode::Full, KeySwitchMode::Truncated] {
            for _ in 0..300 {
                let m = rng.gen_range(0..4);
                let ct = encrypt(&s_src, m, &src, &mut rng).unwrap();
                let out = ksk.switch(&ct, mode).unwrap();
                assert_eq!(out.decrypt(&s_dst).unwrap(), m);
                assert!(out.error_for(&s_dst, m).unwrap().unsigned_abs() as f64 <= out.noise_bound);
            }
        }
        assert!(ksk.noise_bound(8.0, KeySwitchMode::Truncated) < ksk.noise_bound(8.0, KeySwitchMode::Full));
    }

    #[test]
    fn rejects_wrong_source() {
        let (_, dst, _, _, ksk, _) = toy();
        assert!(ksk.switch(&LweCiphertext::zero(dst), KeySwitchMode::Full).is_err());
    }
}
