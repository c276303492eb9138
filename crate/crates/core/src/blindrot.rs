//! Quantum blind rotation: the LWE phase is accumulated in qubit phases,
//! spread over `l'` qubits and read out with a homomorphic inverse QFT.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;

use crate::error::{Error, Result};
use crate::lattice::params::round_div;
use crate::lattice::{LweCiphertext, LweParams, LweSecretKey, MheCiphertext};
use crate::qfhe::{key_xor, CrotAuthority, Evaluator, MaskedState, MheCnot};
use crate::qsim::{inverse_qft_circuit, Gate, QuantumState, SlotId};

/// Amplitude scaling `N⋆ = 2^{n⋆}` and output plaintext space `L' = 2^{l'}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BootstrapParams {
    pub n_star_bits: u32,
    pub l_prime_bits: u32,
}

impl BootstrapParams {
    pub fn new(n_star_bits: u32, l_prime_bits: u32) -> Result<Self> {
        // angles 2^{t+j-n⋆} must stay exact in an f64
        if n_star_bits == 0 || n_star_bits > 52 || l_prime_bits == 0 || l_prime_bits > 16 {
            return Err(Error::InvalidParams(format!("n⋆ = {n_star_bits}, l' = {l_prime_bits}")));
        }
        Ok(BootstrapParams { n_star_bits, l_prime_bits })
    }

    pub fn n_star(&self) -> u64 {
        1 << self.n_star_bits
    }

    pub fn l_prime(&self) -> u64 {
        1 << self.l_prime_bits
    }
}

/// Whether the success guarantee for `L | L'` applies to a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Guarantee {
    Extended,
    /// `L ∤ L'`: only the constant compressed-plaintext bound holds.
    NoExtendedGuarantee,
}

impl Guarantee {
    pub fn for_params(params: &LweParams, bp: &BootstrapParams) -> Self {
        if bp.l_prime_bits >= params.log_l {
            Guarantee::Extended
        } else {
            Guarantee::NoExtendedGuarantee
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Guarantee::Extended => "extended",
            Guarantee::NoExtendedGuarantee => "no extended-range guarantee",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BlindRotationOutput {
    /// Measured `l'`-bit register, little-endian: `⌊L'm/L⌉ ⊕ d₁` on success.
    pub c: u64,
    /// Encrypted X keys `d₁`, one per output qubit.
    pub enc_d1: Vec<MheCiphertext>,
    /// Authority CROT invocations (each carries an `n⋆`-bit encrypted angle).
    pub call_count: usize,
    /// The same work counted in 1-bit CROTs.
    pub one_bit_crots: usize,
    pub guarantee: Guarantee,
}

/// `a'_i = ⌊N⋆ a_i / Q⌉ mod N⋆`, half-up.
pub fn rescale_mask(a: &[u64], log_q: u32, bp: &BootstrapParams) -> Vec<u64> {
    let ns = bp.n_star_bits;
    a.iter()
        .map(|&ai| {
            let v = if ns >= log_q {
                (ai as u128) << (ns - log_q)
            } else {
                round_div(ai as u128, 1u128 << (log_q - ns))
            };
            (v % (1u128 << ns)) as u64
        })
        .collect()
}

/// Test oracle: the phase `(b' − a'·s)/N⋆ mod 1` encoded by the rotated qubits.
pub fn rotated_phase(ct: &LweCiphertext, key: &LweSecretKey, bp: &BootstrapParams) -> Result<f64> {
    if key.dim() != ct.a.len() {
        return Err(Error::ParamsMismatch("key dimension".into()));
    }
    let ap = rescale_mask(&ct.a, ct.params.log_q, bp);
    let dot: u128 = ap.iter().zip(key.bits()).map(|(&a, &s)| a as u128 * s as u128).sum::<u128>() % bp.n_star() as u128;
    let b = (ct.b & ct.params.mask()) as f64 / ct.params.q() as f64;
    Ok((b - dot as f64 / bp.n_star() as f64).rem_euclid(1.0))
}

/// The rotated and transformed state before the final measurement.
#[derive(Debug, Clone)]
pub struct PreparedRotation {
    pub ms: MaskedState,
    pub qubits: Vec<SlotId>,
    pub call_count: usize,
    pub one_bit_crots: usize,
    pub guarantee: Guarantee,
}

impl PreparedRotation {
    pub fn measure<R: Rng + ?Sized>(mut self, rng: &mut R) -> Result<BlindRotationOutput> {
        let vals = self.ms.state.measure(&self.qubits, rng)?;
        let c = vals.iter().enumerate().map(|(i, &v)| (v as u64) << i).sum();
        Ok(BlindRotationOutput {
            c,
            enc_d1: self.ms.x_keys(&self.qubits),
            call_count: self.call_count,
            one_bit_crots: self.one_bit_crots,
            guarantee: self.guarantee,
        })
    }

    /// Repeated measurement of identically prepared copies.
    pub fn sample<R: Rng + ?Sized>(&self, shots: usize, rng: &mut R) -> Vec<u64> {
        let dist = self.ms.state.register_distribution(&self.qubits);
        (0..shots).map(|_| crate::qsim::state::sample_from(&dist, rng)).collect()
    }
}

/// Runs the rotation and the homomorphic inverse QFT, stopping before measurement.
pub fn prepare_blind_rotation(
    ct: &LweCiphertext,
    enc_s: &[MheCiphertext],
    bp: &BootstrapParams,
    auth: &mut CrotAuthority,
) -> Result<PreparedRotation> {
    let params = &ct.params;
    if enc_s.len() != ct.a.len() {
        return Err(Error::ParamsMismatch(format!("{} key encryptions for dimension {}", enc_s.len(), ct.a.len())));
    }
    let lp = bp.l_prime_bits as usize;
    let ns = bp.n_star_bits as i32;
    let ap = rescale_mask(&ct.a, params.log_q, bp);
    let crot_before = auth.counts().crot;

    let mut state = QuantumState::qubits(lp);
    for q in 0..lp {
        Gate::H(q).apply(&mut state)?;
    }
    let mut ms = MaskedState::unmasked(state, *auth.params())?;
    let mut one_bit = 0;
    for t in 0..lp {
        // qubit t carries 2^t times the phase
        let mut z = ms.z_key(t).clone();
        for (i, &a) in ap.iter().enumerate() {
            let terms: Vec<(f64, &MheCiphertext)> = (0..ns)
                .filter(|&j| (a >> j) & 1 == 1 && t as i32 + j < ns)
                .map(|j| (-(2f64.powi(t as i32 + j - ns)), &enc_s[i]))
                .collect();
            one_bit += ns as usize;
            if terms.is_empty() {
                continue;
            }
            let d = auth.crot(&mut ms.state, t, &terms)?;
            z = key_xor(auth, &d, &z)?;
        }
        let b_turns = ((ct.b & params.mask()) << t & params.mask()) as f64 / params.q() as f64;
        Gate::R(t, b_turns).apply(&mut ms.state)?;
        ms.set_z(t, z);
    }

    let qubits: Vec<SlotId> = (0..lp).collect();
    let mut ev = Evaluator::new(MheCnot);
    ev.circuit(auth, &mut ms, &inverse_qft_circuit(&qubits))?;
    let call_count = auth.counts().crot - crot_before;
    Ok(PreparedRotation {
        ms,
        qubits,
        call_count,
        one_bit_crots: one_bit + ev.stats.crot,
        guarantee: Guarantee::for_params(params, bp),
    })
}

pub fn blind_rotate<R: Rng + ?Sized>(
    ct: &LweCiphertext,
    enc_s: &[MheCiphertext],
    bp: &BootstrapParams,
    auth: &mut CrotAuthority,
    rng: &mut R,
) -> Result<BlindRotationOutput> {
    prepare_blind_rotation(ct, enc_s, bp, auth)?.measure(rng)
}

/// Outcome law of the readout: `p(k) = |sin(π r L')/sin(π r)|² / L'²`, `r = k/L' − phase`.
pub fn outcome_distribution(phase: f64, l_prime: u64) -> Vec<f64> {
    let lp = l_prime as f64;
    (0..l_prime)
        .map(|k| {
            let r = k as f64 / lp - phase;
            let den = (PI * r).sin();
            if den.abs() < 1e-12 {
                // r is an integer: the sum is coherent
                1.0
            } else {
                ((PI * r * lp).sin() / den).powi(2) / (lp * lp)
            }
        })
        .collect()
}

/// The `ε` of the extended-plaintext bound: `L'B/Q + L'n/(2N⋆)`.
pub fn extended_epsilon(params: &LweParams, bp: &BootstrapParams, drop_exact_rounding: bool) -> f64 {
    let lp = bp.l_prime() as f64;
    let noise = lp * params.noise_bound as f64 / params.q() as f64;
    let rounding = if drop_exact_rounding && bp.n_star_bits >= params.log_q {
        0.0
    } else {
        lp * params.n as f64 / (2.0 * bp.n_star() as f64)
    };
    noise + rounding
}

/// `1 − ε⁴π⁴/3`, with the rounding term of `ε` always present.
pub fn extended_bound(params: &LweParams, bp: &BootstrapParams) -> f64 {
    1.0 - extended_epsilon(params, bp, false).powi(4) * PI.powi(4) / 3.0
}

/// As [`extended_bound`], dropping the rounding term when `Q | N⋆` makes `a'` exact.
pub fn extended_bound_tight(params: &LweParams, bp: &BootstrapParams) -> f64 {
    1.0 - extended_epsilon(params, bp, true).powi(4) * PI.powi(4) / 3.0
}

/// Reading of the `N⋆ ≫ N` regime condition of the compressed bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NStarThreshold {
    /// `N` is the LWE modulus: require `N⋆ ≥ Q`.
    Modulus,
    /// `N` is the plaintext space: require `N⋆ ≥ 2^16 · L`.
    Plaintext,
}

impl std::str::FromStr for NStarThreshold {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modulus" | "Q" => Ok(NStarThreshold::Modulus),
            "plaintext" | "L" => Ok(NStarThreshold::Plaintext),
            _ => Err(Error::Config(format!("unknown N⋆ threshold '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CompressedReport {
    pub bound: f64,
    pub threshold: NStarThreshold,
    pub compressed: bool,
    pub n_star_ok: bool,
    /// `B·L·2^8 ≤ Q`: the noise is far below one plaintext step.
    pub noise_ok: bool,
}

impl CompressedReport {
    pub fn applies(&self) -> bool {
        self.compressed && self.n_star_ok && self.noise_ok
    }
}

/// `4/π²`.
pub fn compressed_bound() -> f64 {
    4.0 / (PI * PI)
}

pub fn compressed_report(params: &LweParams, bp: &BootstrapParams, threshold: NStarThreshold) -> CompressedReport {
    let n_star_ok = match threshold {
        NStarThreshold::Modulus => bp.n_star_bits >= params.log_q,
        NStarThreshold::Plaintext => bp.n_star_bits >= params.log_l + 16,
    };
    CompressedReport {
        bound: compressed_bound(),
        threshold,
        compressed: bp.l_prime_bits < params.log_l,
        n_star_ok,
        noise_ok: (params.noise_bound as u128) << (params.log_l + 8) <= params.q() as u128,
    }
}

/// Combined probability of the two division points around the phase,
/// at distance `h1` from the lower one.
pub fn adjacent_pair_probability(h1: f64, l_prime: u64) -> f64 {
    let lp = l_prime as f64;
    let h2 = 1.0 / lp - h1;
    let term = |h: f64| {
        if h.abs() < 1e-15 {
            1.0
        } else {
            ((PI * h * lp).sin() / (PI * h).sin()).powi(2) / (lp * lp)
        }
    };
    term(h1) + term(h2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultishotEstimate {
    /// Maximum-likelihood plaintext in `[L]`.
    pub m: u64,
    pub log_likelihood: f64,
    pub shots: usize,
}

/// Maximum-likelihood recovery of `m ∈ [L]` from unmasked outcomes of
/// repeated compressed rotations (`L' < L`).
pub fn multishot_refine(outcomes: &[u64], log_l: u32, l_prime_bits: u32) -> Result<MultishotEstimate> {
    if l_prime_bits >= log_l {
        return Err(Error::InvalidParams("refinement needs L' < L".into()));
    }
    if outcomes.is_empty() {
        return Err(Error::InvalidParams("insufficient shots: none recorded".into()));
    }
    let lp = 1u64 << l_prime_bits;
    let mut hist: BTreeMap<u64, usize> = BTreeMap::new();
    for &k in outcomes {
        if k >= lp {
            return Err(Error::IndexOutOfRange { index: k, size: lp });
        }
        *hist.entry(k).or_default() += 1;
    }
    let l = 1u64 << log_l;
    let mut best = MultishotEstimate { m: 0, log_likelihood: f64::NEG_INFINITY, shots: outcomes.len() };
    for m in 0..l {
        let p = outcome_distribution(m as f64 / l as f64, lp);
        let ll: f64 = hist.iter().map(|(&k, &c)| c as f64 * p[k as usize].max(1e-300).ln()).sum();
        if ll > best.log_likelihood {
            best = MultishotEstimate { m, log_likelihood: ll, shots: outcomes.len() };
        }
    }
    Ok(best)
}
