//! Closed-form resource counts.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// LWE-based encrypted CNOT: `n` mask qubits of `log Q` each, plus the
    /// `(n + n log Q + 1) log Q` ciphertext register.
    LweCnot { n: u64, log_q: u64 },
    /// Paillier-based encrypted CNOT over `Z_N`: `N` bits of data plus `2N`
    /// for the `Z_{N^2}` ciphertext.
    PaillierCnot { n_bits: u64 },
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::LweCnot { .. } => "lwe-cnot",
            Scheme::PaillierCnot { .. } => "paillier-cnot",
        }
    }
}

impl FromStr for Scheme {
    type Err = Error;
    /// Parses `lwe-cnot:n=1024,logq=31` or `paillier-cnot:N=4096`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = std::collections::BTreeMap::new();
        for part in args.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{part}`")))?;
            let v: u64 = v.trim().parse().map_err(|_| Error::Config(format!("`{v}` is not an integer")))?;
            kv.insert(k.trim().to_string(), v);
        }
        let get = |keys: &[&str]| {
            keys.iter()
                .find_map(|k| kv.get(*k).copied())
                .ok_or_else(|| Error::Config(format!("scheme `{name}` needs `{}`", keys[0])))
        };
        match name.trim() {
            "lwe-cnot" => Ok(Scheme::LweCnot { n: get(&["n"])?, log_q: get(&["logq", "log_q", "logQ"])? }),
            "paillier-cnot" => Ok(Scheme::PaillierCnot { n_bits: get(&["N", "n_bits", "bits"])? }),
            other => Err(Error::Config(format!("unknown scheme `{other}` (lwe-cnot | paillier-cnot)"))),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scheme::LweCnot { n, log_q } => write!(f, "lwe-cnot:n={n},logq={log_q}"),
            Scheme::PaillierCnot { n_bits } => write!(f, "paillier-cnot:N={n_bits}"),
        }
    }
}

/// Qubits needed by one encrypted CNOT. Exact integer arithmetic.
pub fn resource_count(scheme: Scheme) -> u128 {
    match scheme {
        Scheme::LweCnot { n, log_q } => {
            let (n, lq) = (n as u128, log_q as u128);
            n * lq + (n + n * lq + 1) * lq
        }
        Scheme::PaillierCnot { n_bits } => 3 * n_bits as u128,
    }
}

/// Itemized 1-bit CROT tally for quantum functional bootstrapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrotCost {
    /// Phase state on the first qubit: one CROT per mask bit.
    pub single_qubit_phase: u64,
    /// Remaining `l' - 1` qubits of the phase register.
    pub phase_register: u64,
    /// Inverse QFT as built here: three CROTs per controlled rotation.
    pub qft: u64,
    /// Generic `lambda^2` budget for an approximate QFT at security `lambda`.
    pub qft_lambda_model: u64,
    /// Toffolis of the table lookup (one per controlled-SWAP).
    pub lookup_toffoli: u64,
    /// Encrypted CNOTs spent on those Toffolis.
    pub lookup_ecnot: u64,
}

impl CrotCost {
    /// Items 1, 2 and the built QFT: what a simulated run reports.
    pub fn rotation_total(&self) -> u64 {
        self.single_qubit_phase + self.phase_register + self.qft
    }

    pub fn total(&self) -> u64 {
        self.rotation_total() + self.lookup_toffoli
    }
}

pub fn crot_cost_model(l_prime_bits: u32, n: usize, n_star_bits: u32, l_tilde: u32, lambda: u32) -> CrotCost {
    let (lp, n, ns) = (l_prime_bits as u64, n as u64, n_star_bits as u64);
    let per_qubit = n * ns;
    let cr = lp * lp.saturating_sub(1) / 2;
    // one controlled-SWAP level per index bit, undone after the copy-out
    let lookup_toffoli = if lp == 0 { 0 } else { 2 * l_tilde as u64 * ((1u64 << lp) - 1) };
    CrotCost {
        single_qubit_phase: if lp > 0 { per_qubit } else { 0 },
        phase_register: lp.saturating_sub(1) * per_qubit,
        qft: 3 * cr,
        qft_lambda_model: (lambda as u64).pow(2),
        lookup_toffoli,
        lookup_ecnot: 3 * lookup_toffoli,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headline_counts() {
        assert_eq!(resource_count(Scheme::LweCnot { n: 1024, log_q: 31 }), 1_047_583);
        assert_eq!(resource_count(Scheme::PaillierCnot { n_bits: 4096 }), 12_288);
        assert_eq!(resource_count(Scheme::PaillierCnot { n_bits: 3072 }), 9_216);
        assert_eq!(resource_count(Scheme::LweCnot { n: 1, log_q: 1 }), 4);
    }

    #[test]
    fn parse_and_display() {
        let s: Scheme = "lwe-cnot:n=1024,logq=31".parse().unwrap();
        assert_eq!(s, Scheme::LweCnot { n: 1024, log_q: 31 });
        assert_eq!(s.to_string().parse::<Scheme>().unwrap(), s);
        assert_eq!("paillier-cnot:N=4096".parse::<Scheme>().unwrap(), Scheme::PaillierCnot { n_bits: 4096 });
        assert!("lwe-cnot:n=3".parse::<Scheme>().is_err());
        assert!("rsa".parse::<Scheme>().is_err());
    }

    #[test]
    fn model_shape() {
        let base = crot_cost_model(4, 16, 20, 4, 128);
        assert_eq!(crot_cost_model(4, 16, 20, 0, 128).lookup_toffoli, 0);
        assert_eq!(crot_cost_model(4, 32, 20, 4, 128).single_qubit_phase, 2 * base.single_qubit_phase);
        assert_eq!(base.rotation_total(), 16 * 20 * 4 + 3 * 6);
        assert_eq!(base.qft_lambda_model, 128 * 128);
    }
}
