//! Config-driven experiment runners shared by the CLI, the acceptance suite
//! and the Python bindings. Every runner is deterministic in `cfg.seed`.

mod boot;
mod pir;
mod rotation;

pub use boot::{run_bootstrap, run_fbootstrap, test_function, BootstrapRow, BootstrapSummary, FbootRow, FbootSummary};
pub use pir::{
    pir_session, random_two_qubit_state, run_paillier_cnot, run_pir, run_pir_on, run_qram_audit, session_seeds,     PaillierCnotRow, PaillierCnotSummary, PirRow, PirSummary, QramAuditRow,
};
pub use rotation::{
    run_blindrot, run_compressed, run_distribution, CompressedRow, CompressedSummary, DistributionRow, DistributionSummary,
    RotationRow, RotationSummary,
};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::lattice::{lwe, mhe, LweSecretKey, MheCiphertext, MhePublicKey, MheSecretKey};
use crate::qfhe::CrotAuthority;

/// Per-run rows plus one aggregate record.
#[derive(Debug, Clone, Serialize)]
pub struct Report<R, S> {
    pub rows: Vec<R>,
    pub summary: S,
}

/// Independent stream `stream` of the generator seeded by `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut r = ChaCha20Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// `p − 3σ` for a binomial rate over `n` trials.
pub fn three_sigma_floor(p: f64, n: usize) -> f64 {
    let p = p.clamp(0.0, 1.0);
    p - 3.0 * (p * (1.0 - p) / n as f64).sqrt()
}

/// Chi-square goodness-of-fit p-value. Bins with expected count below 5
/// are pooled into one.
pub fn chi_square_gof(observed: &[usize], probs: &[f64]) -> f64 {
    if observed.iter().zip(probs).any(|(&o, &p)| o > 0 && p < 1e-15) {
        // outcomes the model calls impossible
        return 0.0;
    }
    let n: usize = observed.iter().sum();
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut po, mut pe) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * n as f64;
        if e < 5.0 {
            po += o as f64;
            pe += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pe > 0.0 {
        cells.push((po, pe));
    }
    if cells.len() < 2 {
        return 1.0;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    1.0 - ChiSquared::new((cells.len() - 1) as f64).expect("positive dof").cdf(stat)
}

/// Keys for a rotation experiment: LWE key, one MHE key chain and `Enc(s)`.
pub(crate) struct KeySetup {
    pub key: LweSecretKey,
    pub msk: MheSecretKey,
    pub mpk: MhePublicKey,
    pub enc_s: Vec<MheCiphertext>,
}

impl KeySetup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        let mut rng = stream_rng(cfg.seed, 0);
        let key = lwe::keygen(&cfg.lwe, &mut rng);
        let (msk, mpk) = mhe::keygen(&cfg.mhe()?, &mut rng);
        let enc_s = key.bits().iter().map(|&b| mpk.encrypt(b, &mut rng)).collect::<Result<_>>()?;
        Ok(KeySetup { key, msk, mpk, enc_s })
    }

    /// A fresh authority for run `run`, with its own RNG stream.
    pub fn authority(&self, seed: u64, run: usize) -> CrotAuthority {
        CrotAuthority::new(self.msk.clone(), self.mpk.clone(), seed ^ (run as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    /// Oracle: the unmasked readout `c ⊕ d`.
    pub fn unmask(&self, c: u64, enc_d: &[MheCiphertext]) -> Result<u64> {
        enc_d
            .iter()
            .enumerate()
            .try_fold(c, |acc, (i, d)| Ok(acc ^ ((self.msk.decrypt(d)? as u64) << i)))
    }
}

/// `⌊m L'/L⌉ mod L'`, half-up.
pub fn scaled_plaintext(m: u64, log_l: u32, l_prime_bits: u32) -> u64 {
    let lp = 1u64 << l_prime_bits;
    let v = if l_prime_bits >= log_l {
        m << (l_prime_bits - log_l)
    } else {
        let sh = log_l - l_prime_bits;
        (m + (1 << (sh - 1))) >> sh
    };
    v % lp
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gof_accepts_model_and_rejects_shift() {
        let probs = [0.25, 0.25, 0.5];
        assert!(chi_square_gof(&[250, 250, 500], &probs) > 0.99);
        assert!(chi_square_gof(&[500, 250, 250], &probs) < 1e-6);
        assert_eq!(chi_square_gof(&[1, 0], &[0.0, 1.0]), 0.0);
    }

    #[test]
    fn scaling_rounds_half_up() {
        assert_eq!(scaled_plaintext(5, 4, 4), 5);
        assert_eq!(scaled_plaintext(5, 3, 5), 20);
        assert_eq!(scaled_plaintext(4, 6, 3), 1); // 0.5 rounds up
        assert_eq!(scaled_plaintext(63, 6, 3), 0);
        assert_eq!(three_sigma_floor(1.0, 10), 1.0);
    }
}
