use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported modulus exponent; keeps every product inside `u128`.
pub const MAX_LOG_MODULUS: u32 = 62;

/// Parameters of an LWE ciphertext space: modulus `Q = 2^log_q`, plaintext
/// space `L = 2^log_l`, dimension `n` and fresh-noise bound `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LweParams {
    pub log_q: u32,
    pub log_l: u32,
    pub n: usize,
    pub noise_bound: u64,
}

impl LweParams {
    /// Validated constructor for fresh-encryption parameter sets.
    pub fn new(log_q: u32, log_l: u32, n: usize, noise_bound: u64) -> Result<Self> {
        let p = Self::derived(log_q, log_l, n)?;
        let margin = p.delta() / 2;
        if noise_bound >= margin {
            return Err(Error::InvalidParams(format!(
                "noise bound {noise_bound} must be below floor(Q/L)/2 = {margin}"
            )));
        }
        Ok(LweParams { noise_bound, ..p })
    }

    /// Parameters describing a ciphertext space produced by a homomorphic
    /// operation (column extraction, recombination). No fresh-noise bound.
    pub fn derived(log_q: u32, log_l: u32, n: usize) -> Result<Self> {
        if log_q == 0 || log_q > MAX_LOG_MODULUS {
            return Err(Error::InvalidParams(format!("log Q = {log_q} outside 1..={MAX_LOG_MODULUS}")));
        }
        if log_l > log_q {
            return Err(Error::InvalidParams(format!("L = 2^{log_l} exceeds Q = 2^{log_q}")));
        }
        if n == 0 {
            return Err(Error::InvalidParams("dimension n must be at least 1".into()));
        }
        Ok(LweParams { log_q, log_l, n, noise_bound: 0 })
    }

    pub fn q(&self) -> u64 {
        1u64 << self.log_q
    }

    pub fn l(&self) -> u64 {
        1u64 << self.log_l
    }

    pub fn mask(&self) -> u64 {
        self.q() - 1
    }

    /// Plaintext scale `floor(Q/L)`.
    pub fn delta(&self) -> u64 {
        self.q() >> self.log_l
    }

    /// Largest noise magnitude that still decrypts correctly.
    pub fn decryption_margin(&self) -> f64 {
        (self.delta() / 2) as f64
    }

    /// Same ciphertext space, reinterpreted with a different plaintext space.
    pub fn with_plaintext_bits(&self, log_l: u32) -> Result<Self> {
        Self::derived(self.log_q, log_l, self.n).map(|p| LweParams { noise_bound: self.noise_bound, ..p })
    }
}

/// Parameters of the GSW-style matrix scheme used for encrypted Pauli keys.
///
/// `n` is the number of secret-key rows, so ciphertexts are
/// `(n+1) x (n+1)·log Q'` matrices. `beta_acc` is the accumulated-noise
/// budget: key ciphertexts whose ledger would exceed it are refreshed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MheParams {
    pub log_q: u32,
    pub n: usize,
    pub beta_init: u64,
    pub beta_acc: f64,
}

impl MheParams {
    pub fn new(log_q: u32, n: usize, beta_init: u64, beta_acc: f64) -> Result<Self> {
        if !(2..=MAX_LOG_MODULUS).contains(&log_q) {
            return Err(Error::InvalidParams(format!("log Q' = {log_q} outside 2..={MAX_LOG_MODULUS}")));
        }
        if n == 0 {
            return Err(Error::InvalidParams("MHE dimension must be at least 1".into()));
        }
        let p = MheParams { log_q, n, beta_init, beta_acc };
        // a single fresh column must decrypt
        if ((n + 1) as f64) * (beta_init as f64) >= p.q() as f64 / 4.0 {
            return Err(Error::InvalidParams("fresh MHE noise too large for Q'".into()));
        }
        if beta_acc < beta_init as f64 {
            return Err(Error::InvalidParams("beta_acc must be at least beta_init".into()));
        }
        Ok(p)
    }

    /// Parameters whose accumulated-noise budget is the bootstrapping limit
    /// `Q' / (8 L' l' (n'+1))` for an `l'`-bit recombination.
    pub fn for_bootstrapping(log_q: u32, n: usize, beta_init: u64, l_prime_bits: u32) -> Result<Self> {
        let p = MheParams::new(log_q, n, beta_init, beta_init as f64)?;
        let budget = p.bootstrap_noise_limit(l_prime_bits);
        MheParams::new(log_q, n, beta_init, budget * 0.999)
    }

    pub fn q(&self) -> u64 {
        1u64 << self.log_q
    }

    pub fn mask(&self) -> u64 {
        self.q() - 1
    }

    pub fn rows(&self) -> usize {
        self.n + 1
    }

    pub fn cols(&self) -> usize {
        (self.n + 1) * self.log_q as usize
    }

    /// Strict upper limit on `beta_acc` for recombining `l'` measured bits.
    pub fn bootstrap_noise_limit(&self, l_prime_bits: u32) -> f64 {
        let lp = (1u64 << l_prime_bits) as f64;
        self.q() as f64 / (8.0 * lp * l_prime_bits.max(1) as f64 * (self.n + 1) as f64)
    }

    /// Checks the stricter accumulated-noise condition needed to recombine
    /// an `l'`-bit one-time-pad ciphertext.
    pub fn validate_for_bootstrapping(&self, l_prime_bits: u32) -> Result<()> {
        if l_prime_bits > self.log_q {
            return Err(Error::InvalidParams(format!("l' = {l_prime_bits} exceeds log Q' = {}", self.log_q)));
        }
        let limit = self.bootstrap_noise_limit(l_prime_bits);
        if self.beta_acc >= limit {
            return Err(Error::InvalidParams(format!(
                "beta_acc = {} must be below Q'/(8 L' l' (n'+1)) = {limit}",
                self.beta_acc
            )));
        }
        Ok(())
    }
}

/// Round-half-up division of non-negative integers.
pub(crate) fn round_div(x: u128, d: u128) -> u128 {
    (2 * x + d) / (2 * d)
}

/// Centered representative of `x mod 2^log_q` in `[-Q/2, Q/2)`.
pub fn centered(x: u64, log_q: u32) -> i64 {
    let q = 1u64 << log_q;
    let x = x & (q - 1);
    if x >= q / 2 {
        x as i64 - q as i64
    } else {
        x as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_noise_at_margin() {
        assert!(LweParams::new(4, 2, 2, 1).is_ok());
        assert!(LweParams::new(4, 2, 2, 2).is_err());
        assert!(LweParams::new(4, 5, 2, 0).is_err());
        assert!(LweParams::new(4, 2, 0, 0).is_err());
    }

    #[test]
    fn round_half_up() {
        assert_eq!(round_div(1, 2), 1);
        assert_eq!(round_div(3, 2), 2);
        assert_eq!(round_div(1, 3), 0);
        assert_eq!(round_div(2, 3), 1);
    }

    #[test]
    fn centered_wraps() {
        assert_eq!(centered(15, 4), -1);
        assert_eq!(centered(7, 4), 7);
        assert_eq!(centered(8, 4), -8);
    }

    #[test]
    fn bootstrap_budget() {
        let p = MheParams::for_bootstrapping(32, 4, 4, 4).unwrap();
        assert!(p.validate_for_bootstrapping(4).is_ok());
        let loose = MheParams::new(32, 4, 4, 1e12).unwrap();
        assert!(loose.validate_for_bootstrapping(4).is_err());
    }
}
