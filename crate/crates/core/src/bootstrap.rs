//! Recombination of measured one-time-pad bits into LWE, the bootstrapping
//! pipeline and functional bootstrapping.

use rand::Rng;
use serde::Serialize;

use crate::blindrot::{prepare_blind_rotation, BootstrapParams, Guarantee};
use crate::error::{Error, Result};
use crate::lattice::{KeySwitchKey, KeySwitchMode, LweCiphertext, LweParams, LweSecretKey, MheCiphertext, MhePublicKey, MheSecretKey};
use crate::qfhe::{CrotAuthority, Evaluator, MaskedState, MheCnot};
use crate::qsim::{build_qram_circuit, Circuit, Gate, SlotId};

/// Turns measured bits `c` (little-endian) and encrypted X keys `Enc(d)`
/// into an LWE encryption of `c ⊕ d` over `(Q', 2^{len}, n')` under `e_sk`.
///
/// Bit `j` sits at scale `Q'/2^k` with `k = len − j`, and uses
/// `(c+d)·Q'/2^k − c·d·Q'/2^{k−1}`.
pub fn combine_to_lwe(c: u64, enc_d: &[MheCiphertext]) -> Result<LweCiphertext> {
    let bits = enc_d.len() as u32;
    let first = enc_d.first().ok_or_else(|| Error::InvalidParams("nothing to recombine".into()))?;
    let mp = first.params;
    if bits > mp.log_q {
        return Err(Error::LevelOutOfRange { level: bits, max: mp.log_q });
    }
    let out = LweParams::derived(mp.log_q, bits, mp.n)?;
    let mut acc = LweCiphertext::zero(out);
    for (j, d) in enc_d.iter().enumerate() {
        let k = bits - j as u32;
        let cj = (c >> j) & 1;
        let scaled = |lvl: u32| -> u64 { 1u64 << (mp.log_q - lvl) };
        acc = acc.add(&LweCiphertext::trivial(out, cj * scaled(k)))?;
        acc = acc.add(&d.extract_lwe(k)?.reinterpret(bits)?)?;
        if cj == 1 && k > 1 {
            // at k = 1 the product term is a multiple of Q'
            acc = acc.sub(&d.extract_lwe(k - 1)?.reinterpret(bits)?)?;
        }
    }
    Ok(acc)
}

/// Worst-case recombination noise `2·len·(n'+1)·β` for key ledgers bounded by `β`.
pub fn combine_noise_bound(len: u32, n_mhe: usize, beta: f64) -> f64 {
    2.0 * len as f64 * (n_mhe + 1) as f64 * beta
}

/// Encrypted LWE key bits plus the switching key back to the input space.
#[derive(Debug, Clone)]
pub struct BootstrapKeys {
    pub enc_s: Vec<MheCiphertext>,
    pub ksk: KeySwitchKey,
    pub mode: KeySwitchMode,
}

impl BootstrapKeys {
    /// `msk` is the holder's MHE key, used to build the switching key;
    /// `params` (with its fresh-noise bound) is the space bootstrapping returns to.
    pub fn generate<R: Rng + ?Sized>(
        lwe_key: &LweSecretKey,
        params: &LweParams,
        msk: &MheSecretKey,
        mpk: &MhePublicKey,
        mode: KeySwitchMode,
        rng: &mut R,
    ) -> Result<Self> {
        let enc_s = lwe_key.bits().iter().map(|&b| mpk.encrypt(b, rng)).collect::<Result<_>>()?;
        let ksk = KeySwitchKey::generate(&msk.lwe_key(), msk.params().log_q, lwe_key, params, rng)?;
        Ok(BootstrapKeys { enc_s, ksk, mode })
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct NoiseReport {
    /// Fresh noise of the switching key, `Err(LWE(sk))`.
    pub err_sk: f64,
    /// Recombined-ciphertext noise from the key ledgers.
    pub err_m: f64,
    /// Worst case of `err_m` with ledgers at `β_acc`.
    pub err_m_budget: f64,
    pub b_f: f64,
    /// The three summands of `B_f / Q`.
    pub ratio_terms: [f64; 3],
    pub first_term_dominant: bool,
}

/// Arithmetic over ledger values: the key-switched bound and its split.
pub fn noise_report(ksk: &KeySwitchKey, mode: KeySwitchMode, combined: &LweCiphertext, beta_acc: f64) -> NoiseReport {
    let lq = ksk.dest().log_q;
    let src_lq = combined.params.log_q;
    let n_src = ksk.source_dim() as f64;
    let bits = match mode {
        KeySwitchMode::Full => src_lq,
        KeySwitchMode::Truncated => lq,
    } as f64;
    let q = ksk.dest().q() as f64;
    let err_sk = ksk.fresh_noise() as f64;
    let err_m = combined.noise_bound;
    let terms = [err_sk * n_src * bits / q, err_m / (1u64 << src_lq) as f64, (n_src * bits).sqrt() / q];
    NoiseReport {
        err_sk,
        err_m,
        err_m_budget: combine_noise_bound(combined.params.log_l, ksk.source_dim(), beta_acc),
        b_f: ksk.noise_bound(err_m, mode),
        ratio_terms: terms,
        first_term_dominant: terms[0] > terms[1] && terms[0] > terms[2],
    }
}

#[derive(Debug, Clone)]
pub struct BootstrapOutput {
    pub ct: LweCiphertext,
    pub report: NoiseReport,
    pub crot_calls: usize,
    pub guarantee: Guarantee,
    /// Public readout `c` and its encrypted mask, as fed to recombination.
    pub c: u64,
    pub enc_d: Vec<MheCiphertext>,
}

/// Blind rotation with `L' = L`, recombination under the MHE key and a
/// key switch back to the input parameters.
pub fn bootstrap<R: Rng + ?Sized>(
    ct: &LweCiphertext,
    keys: &BootstrapKeys,
    n_star_bits: u32,
    auth: &mut CrotAuthority,
    rng: &mut R,
) -> Result<BootstrapOutput> {
    if ct.params != *keys.ksk.dest() {
        return Err(Error::ParamsMismatch("ciphertext space differs from the switching key's target".into()));
    }
    let bp = BootstrapParams::new(n_star_bits, ct.params.log_l)?;
    auth.params().validate_for_bootstrapping(bp.l_prime_bits)?;
    let out = prepare_blind_rotation(ct, &keys.enc_s, &bp, auth)?.measure(rng)?;
    let combined = combine_to_lwe(out.c, &out.enc_d1)?;
    let report = noise_report(&keys.ksk, keys.mode, &combined, auth.params().beta_acc);
    let switched = keys.ksk.switch(&combined, keys.mode)?;
    Ok(BootstrapOutput {
        ct: switched,
        report,
        crot_calls: out.call_count,
        guarantee: out.guarantee,
        c: out.c,
        enc_d: out.enc_d1,
    })
}

/// How the test function's circuit is obtained for the `computed` strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Synthesis {
    /// Output bit `t` copies index bit `t + shift`.
    Copy { shift: u32 },
    /// One multi-controlled flip per nonzero table row.
    Minterms,
}

/// `f: Z_L → Z_L̃` with its extension `f̃(y) = f(⌊yL/L'⌉ mod L)` to `Z_{L'}`.
#[derive(Debug, Clone)]
pub struct TestFunction {
    pub log_l: u32,
    pub log_l_tilde: u32,
    table: Vec<u64>,
    synthesis: Option<Synthesis>,
}

impl TestFunction {
    pub fn from_table(log_l: u32, log_l_tilde: u32, table: Vec<u64>) -> Result<Self> {
        if table.len() != 1 << log_l {
            return Err(Error::InvalidParams(format!("table has {} rows, expected 2^{log_l}", table.len())));
        }
        if let Some(&v) = table.iter().find(|&&v| v >> log_l_tilde != 0) {
            return Err(Error::PlaintextOutOfRange { value: v, modulus: 1 << log_l_tilde });
        }
        Ok(TestFunction { log_l, log_l_tilde, table, synthesis: None })
    }

    pub fn from_fn(log_l: u32, log_l_tilde: u32, f: impl Fn(u64) -> u64) -> Result<Self> {
        Self::from_table(log_l, log_l_tilde, (0..1u64 << log_l).map(f).collect())
    }

    pub fn identity(log_l: u32) -> Self {
        let mut tf = Self::from_fn(log_l, log_l, |m| m).expect("valid table");
        tf.synthesis = Some(Synthesis::Copy { shift: 0 });
        tf
    }

    pub fn msb(log_l: u32) -> Self {
        let mut tf = Self::from_fn(log_l, 1, |m| m >> (log_l - 1)).expect("valid table");
        tf.synthesis = Some(Synthesis::Copy { shift: log_l - 1 });
        tf
    }

    pub fn square(log_l: u32, log_l_tilde: u32) -> Self {
        let mask = (1u64 << log_l_tilde) - 1;
        Self::from_fn(log_l, log_l_tilde, |m| m * m & mask).expect("valid table").with_minterm_circuit()
    }

    /// Attaches a truth-table synthesis for the `computed` strategy.
    pub fn with_minterm_circuit(mut self) -> Self {
        self.synthesis = Some(Synthesis::Minterms);
        self
    }

    pub fn eval(&self, m: u64) -> u64 {
        self.table[(m % self.table.len() as u64) as usize]
    }

    pub fn table(&self) -> &[u64] {
        &self.table
    }

    pub fn extended_table(&self, l_prime_bits: u32) -> Vec<u64> {
        let (lp, l) = (1u64 << l_prime_bits, 1u64 << self.log_l);
        (0..lp).map(|y| self.eval(((2 * y * l + lp) / (2 * lp)) % l)).collect()
    }

    /// Reversible circuit for `|y⟩|0⟩ → |y⟩|f̃(y)⟩`. Ancillas start at
    /// `first_ancilla`; the second value is how many are used.
    pub fn computed_circuit(&self, l_prime_bits: u32, index: &[SlotId], output: &[SlotId], first_ancilla: SlotId) -> Result<(Circuit, usize)> {
        let mut c = Circuit::new();
        match self.synthesis {
            None => Err(Error::InvalidParams("computed strategy needs a circuit for this test function".into())),
            Some(Synthesis::Copy { shift }) if l_prime_bits == self.log_l => {
                for (t, &o) in output.iter().enumerate() {
                    c.push(Gate::Cnot(index[t + shift as usize], o));
                }
                Ok((c, 0))
            }
            Some(_) => {
                let table = self.extended_table(l_prime_bits);
                let l = index.len();
                let anc: Vec<SlotId> = (first_ancilla..first_ancilla + l.saturating_sub(1)).collect();
                for (y, &v) in table.iter().enumerate() {
                    if v == 0 {
                        continue;
                    }
                    let mut flips = Circuit::new();
                    for (k, &q) in index.iter().enumerate() {
                        if (y >> k) & 1 == 0 {
                            flips.push(Gate::X(q));
                        }
                    }
                    // AND of the index bits into the last ancilla
                    let mut and = Circuit::new();
                    let flag = if l == 1 {
                        index[0]
                    } else {
                        and.push(Gate::Toffoli(index[0], index[1], anc[0]));
                        for k in 2..l {
                            and.push(Gate::Toffoli(anc[k - 2], index[k], anc[k - 1]));
                        }
                        anc[l - 2]
                    };
                    c.extend(&flips);
                    c.extend(&and);
                    for (b, &o) in output.iter().enumerate() {
                        if (v >> b) & 1 == 1 {
                            c.push(Gate::Cnot(flag, o));
                        }
                    }
                    c.extend(&and.inverse());
                    c.extend(&flips);
                }
                Ok((c, anc.len()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Qram,
    Computed,
}

impl std::str::FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qram" => Ok(Strategy::Qram),
            "computed" => Ok(Strategy::Computed),
            _ => Err(Error::Config(format!("unknown strategy '{s}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct FunctionalOutput {
    /// Encryption of `f(m)` over `(Q', L̃, n')` under the MHE key.
    pub ct: LweCiphertext,
    /// Measured value register, `f(m) ⊕ d'`.
    pub c: u64,
    pub crot_calls: usize,
    pub toffoli: usize,
    pub guarantee: Guarantee,
}

/// Blind rotation to `|L'm/L⟩` under masks, homomorphic `|y⟩|0⟩ → |y⟩|f̃(y)⟩`,
/// measurement of the value register and recombination of its X keys.
pub fn functional_bootstrap<R: Rng + ?Sized>(
    ct: &LweCiphertext,
    tf: &TestFunction,
    enc_s: &[MheCiphertext],
    bp: &BootstrapParams,
    auth: &mut CrotAuthority,
    strategy: Strategy,
    rng: &mut R,
) -> Result<FunctionalOutput> {
    if bp.l_prime_bits < ct.params.log_l {
        return Err(Error::InvalidParams("functional bootstrapping needs L' >= L".into()));
    }
    if tf.log_l != ct.params.log_l {
        return Err(Error::ParamsMismatch(format!("test function over 2^{} but ciphertext over 2^{}", tf.log_l, ct.params.log_l)));
    }
    auth.params().validate_for_bootstrapping(tf.log_l_tilde)?;
    let crot_before = auth.counts().crot;
    let prep = prepare_blind_rotation(ct, enc_s, bp, auth)?;
    let mut ms: MaskedState = prep.ms;
    let index = prep.qubits;
    let lt = tf.log_l_tilde as usize;
    let output: Vec<SlotId> = (0..lt).map(|i| ms.add_qubit(&format!("value{i}"))).collect::<Result<_>>()?;
    let first_anc = ms.num_qubits();
    let (circuit, n_anc) = match strategy {
        Strategy::Qram => {
            let table = tf.extended_table(bp.l_prime_bits);
            let q = build_qram_circuit(&table, lt, table.len(), &index, &output, first_anc)?;
            (q.circuit, q.ancillas.len())
        }
        Strategy::Computed => tf.computed_circuit(bp.l_prime_bits, &index, &output, first_anc)?,
    };
    for i in 0..n_anc {
        ms.add_qubit(&format!("anc{i}"))?;
    }
    let mut ev = Evaluator::new(MheCnot);
    ev.circuit(auth, &mut ms, &circuit)?;
    let vals = ms.state.measure(&output, rng)?;
    let c = vals.iter().enumerate().map(|(i, &v)| (v as u64) << i).sum();
    let ct_out = combine_to_lwe(c, &ms.x_keys(&output))?;
    Ok(FunctionalOutput {
        ct: ct_out,
        c,
        crot_calls: auth.counts().crot - crot_before,
        toffoli: ev.stats.toffoli,
        guarantee: prep.guarantee,
    })
}
