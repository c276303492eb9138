use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_complex::Complex64;
use rand::Rng;

use super::authority::CrotAuthority;
use super::eval::CnotBackend;
use crate::error::{Error, Result};
use crate::lattice::MheCiphertext;
use crate::paillier::{neg_two, PaillierCiphertext, PaillierKeys, PaillierPublicKey, TOY_MODULI};
use crate::qsim::{Gate, QuantumState, SlotId};

fn to_u64(x: &BigUint) -> u64 {
    x.try_into().expect("toy modulus value")
}

/// Number of qubits holding `r` in register `S`.
pub fn r_bits(n: u64) -> usize {
    (64 - (n - 1).leading_zeros()) as usize
}

/// Result of one run of the Paillier encrypted CNOT.
#[derive(Debug, Clone)]
pub struct PaillierCnotOutcome {
    /// Measured register `G`: `Enc(m0*; r0*)`.
    pub c0_star: PaillierCiphertext,
    /// Hadamard-basis outcome on `S = m ‖ binary(r)`, `r` least-significant first.
    pub d: Vec<u8>,
}

/// Runs the Paillier encrypted CNOT on qubits `(c, t)` of `state`.
///
/// Adds registers `m`, `r` (binary) and `G` (radix `N²`), superposes over
/// `Z_2 x Z*_N`, multiplies `G` by the XOR gadget when the control is set,
/// measures `G`, Hadamard-measures `S`, and removes the scratch registers.
/// The state ends as `Z_c^z X_t^{m0*} CNOT^{s0} |ψ⟩`.
pub fn paillier_encrypted_cnot<R: Rng + ?Sized>(
    pk: &PaillierPublicKey,
    c_s0: &PaillierCiphertext,
    state: &mut QuantumState,
    c: SlotId,
    t: SlotId,
    rng: &mut R,
) -> Result<PaillierCnotOutcome> {
    let n = to_u64(&pk.n);
    if !TOY_MODULI.contains(&n) {
        return Err(Error::ModulusNotWhitelisted(n));
    }
    if c_s0.n != pk.n {
        return Err(Error::ParamsMismatch("control ciphertext under another modulus".into()));
    }
    state.check_normalized()?;
    let n2 = n * n;
    let units = pk.units();
    let enc: HashMap<(u64, u64), u64> = (0..2u64)
        .flat_map(|m| units.iter().map(move |&r| (m, r)))
        .map(|(m, r)| Ok(((m, r), to_u64(&pk.encrypt_u64(m, r)?.c))))
        .collect::<Result<_>>()?;
    let gadget0 = to_u64(&c_s0.c);
    let gadget1 = to_u64(&neg_two(c_s0)?.c);

    let base = state.layout().len();
    let m_slot = state.add_slot("pcnot_m", 2)?;
    let nb = r_bits(n);
    let r_slots: Vec<SlotId> = (0..nb).map(|i| state.add_slot(&format!("pcnot_r{i}"), 2)).collect::<Result<_>>()?;
    let g_slot = state.add_slot("pcnot_G", n2 as u32)?;

    // step 1: uniform superposition over (m, r) with G = Enc(m; r)
    let amp = Complex64::new(1.0 / ((2 * units.len()) as f64).sqrt(), 0.0);
    state.apply_linear(|k| {
        let mut out = Vec::with_capacity(2 * units.len());
        for m in 0..2u64 {
            for &r in &units {
                let mut nk = k.clone();
                nk[m_slot] = m as u32;
                QuantumState::set_register(&mut nk, &r_slots, r);
                nk[g_slot] = enc[&(m, r)] as u32;
                out.push((nk, amp));
            }
        }
        out
    });

    // step 2: target ^= m; if the control is set, G ← G·Enc(s0)·c_{-2s0}^m
    state.permute(|k| {
        let m = k[m_slot];
        k[t] ^= m;
        if k[c] == 1 {
            let mut g = k[g_slot] as u64 * gadget0 % n2;
            if m == 1 {
                g = g * gadget1 % n2;
            }
            k[g_slot] = g as u32;
        }
    });

    // step 3: measure G
    let g = state.measure(&[g_slot], rng)?[0] as u64;

    // step 4: Hadamard on S, measure S
    let s_slots: Vec<SlotId> = std::iter::once(m_slot).chain(r_slots.iter().copied()).collect();
    for &q in &s_slots {
        Gate::H(q).apply(state)?;
    }
    let d: Vec<u8> = state.measure(&s_slots, rng)?.into_iter().map(|v| v as u8).collect();
    for id in (base..state.layout().len()).rev() {
        state.remove_slot(id)?;
    }
    Ok(PaillierCnotOutcome { c0_star: PaillierCiphertext { c: BigUint::from(g), n: pk.n.clone() }, d })
}

/// The preimage `(m1*, r1*)` with `Enc(m1*; r1*) ⊕ Enc(s0; r0) = Enc(m0*; r0*)`.
pub fn xor_preimage(keys: &PaillierKeys, c_s0: &PaillierCiphertext, c0_star: &PaillierCiphertext) -> Result<(u64, u64)> {
    let (m0, r0s) = keys.decompose(c0_star)?;
    let (s0, r0) = keys.decompose(c_s0)?;
    let (m0, s0) = (to_u64(&m0), to_u64(&s0));
    if m0 > 1 || s0 > 1 {
        return Err(Error::Conversion("Paillier plaintexts are not bits".into()));
    }
    let m1 = m0 ^ s0;
    // randomness of the gadget output is r1 · r0 · r0^{-2 m1}
    let n = keys.n();
    let r0_inv = crate::paillier::mod_inverse(&r0, n).ok_or(Error::RandomnessNotCoprime)?;
    let r1 = if m1 == 1 { (&r0s * &r0) % n } else { (&r0s * &r0_inv) % n };
    Ok((m1, to_u64(&r1)))
}

/// Pauli corrections `(z, x)`: `z = ⟨d, S0 ⊕ S1⟩`, `x = m0*`.
pub fn pauli_masks(keys: &PaillierKeys, c_s0: &PaillierCiphertext, out: &PaillierCnotOutcome) -> Result<(u8, u8)> {
    let (m0, r0) = keys.decompose(&out.c0_star)?;
    let (m0, r0) = (to_u64(&m0), to_u64(&r0));
    let (m1, r1) = xor_preimage(keys, c_s0, &out.c0_star)?;
    let diff_r = r0 ^ r1;
    let mut z = out.d[0] as u64 & (m0 ^ m1);
    for (i, &di) in out.d[1..].iter().enumerate() {
        z ^= di as u64 & (diff_r >> i) & 1;
    }
    Ok(((z & 1) as u8, m0 as u8))
}

/// Exact check, by enumeration over `(m, r) ∈ Z_2 × Z*_N`, that the measured
/// register `G` has the same distribution whether or not the control is set.
pub fn gadget_marginal_independent(pk: &PaillierPublicKey, c_s0: &PaillierCiphertext) -> Result<bool> {
    let n2 = to_u64(&pk.n2);
    let g0 = to_u64(&c_s0.c);
    let g1 = to_u64(&neg_two(c_s0)?.c);
    let mut plain: BTreeMap<u64, u32> = BTreeMap::new();
    let mut gadget: BTreeMap<u64, u32> = BTreeMap::new();
    for m in 0..2u64 {
        for r in pk.units() {
            let e = to_u64(&pk.encrypt_u64(m, r)?.c);
            *plain.entry(e).or_default() += 1;
            let mut g = e * g0 % n2;
            if m == 1 {
                g = g * g1 % n2;
            }
            *gadget.entry(g).or_default() += 1;
        }
    }
    Ok(plain == gadget)
}

/// NAND-gate estimate for homomorphically evaluating Paillier decryption
/// `L(c^λ mod N²)·μ mod N` with schoolbook modular arithmetic on `k`-bit
/// operands: one exponentiation (`2k` products of `2k`-bit numbers) plus a
/// division and a product mod `N`.
pub fn paillier_decrypt_nand_cost(modulus_bits: u64) -> u64 {
    let k2 = 2 * modulus_bits;
    // a w-bit multiply-and-reduce ~ 12 w² NANDs (adder ~ 6 NAND per bit)
    let mulmod = |w: u64| 12 * w * w;
    2 * modulus_bits * mulmod(k2) + mulmod(k2) + 2 * mulmod(modulus_bits)
}

/// Paillier → MHE conversion of the Paillier-CNOT masks.
///
/// A genuine conversion evaluates Paillier decryption under MHE. Here the
/// converter opens the ciphertexts with the Paillier keys and emits fresh
/// MHE encryptions; each call is flagged in the audit log and costed.
#[derive(Debug, Clone)]
pub struct PaillierConverter {
    keys: PaillierKeys,
    pub nand_cost: u64,
}

impl PaillierConverter {
    pub fn new(keys: PaillierKeys) -> Self {
        PaillierConverter { keys, nand_cost: 0 }
    }

    pub fn convert(
        &mut self,
        auth: &mut CrotAuthority,
        c_s0: &PaillierCiphertext,
        out: &PaillierCnotOutcome,
        qubit: SlotId,
    ) -> Result<(MheCiphertext, MheCiphertext)> {
        let (z, x) = pauli_masks(&self.keys, c_s0, out)?;
        self.nand_cost += 2 * paillier_decrypt_nand_cost(self.keys.n().bits());
        auth.note_convert(qubit);
        Ok((auth.encrypt(z)?, auth.encrypt(x)?))
    }
}

/// Encrypted-CNOT backend built on the Paillier CNOT. `request` performs the
/// client round trip turning MHE control bits into Paillier ciphertexts.
pub struct PaillierCnot<F> {
    pk: PaillierPublicKey,
    converter: PaillierConverter,
    request: F,
    pub rounds: usize,
}

impl<F> PaillierCnot<F>
where
    F: FnMut(&[MheCiphertext]) -> Result<Vec<PaillierCiphertext>>,
{
    pub fn new(pk: PaillierPublicKey, converter: PaillierConverter, request: F) -> Self {
        PaillierCnot { pk, converter, request, rounds: 0 }
    }

    pub fn nand_cost(&self) -> u64 {
        self.converter.nand_cost
    }
}

impl<F> CnotBackend for PaillierCnot<F>
where
    F: FnMut(&[MheCiphertext]) -> Result<Vec<PaillierCiphertext>>,
{
    type Control = PaillierCiphertext;

    fn prepare(&mut self, _auth: &mut CrotAuthority, bits: &[&MheCiphertext]) -> Result<Vec<PaillierCiphertext>> {
        let owned: Vec<MheCiphertext> = bits.iter().map(|&b| b.clone()).collect();
        let out = (self.request)(&owned)?;
        if out.len() != bits.len() {
            return Err(Error::Conversion(format!("asked for {} conversions, got {}", bits.len(), out.len())));
        }
        self.rounds += 1;
        Ok(out)
    }

    fn apply(
        &mut self,
        auth: &mut CrotAuthority,
        state: &mut QuantumState,
        c: SlotId,
        t: SlotId,
        s: &PaillierCiphertext,
    ) -> Result<(MheCiphertext, MheCiphertext)> {
        let pk = self.pk.clone();
        let out = paillier_encrypted_cnot(&pk, s, state, c, t, auth.rng())?;
        self.converter.convert(auth, s, &out, c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{mhe, MheParams};
    use crate::qfhe::{Evaluator, MaskedState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn random_2q(rng: &mut ChaCha20Rng) -> QuantumState {
        let mut s = QuantumState::qubits(2);
        for q in 0..2 {
            Gate::H(q).apply(&mut s).unwrap();
            Gate::R(q, rng.gen()).apply(&mut s).unwrap();
        }
        Gate::Cnot(0, 1).apply(&mut s).unwrap();
        Gate::H(0).apply(&mut s).unwrap();
        Gate::R(0, rng.gen()).apply(&mut s).unwrap();
        s
    }

    fn corrected(keys: &PaillierKeys, c_s0: &PaillierCiphertext, out: &PaillierCnotOutcome, mut s: QuantumState) -> QuantumState {
        let (z, x) = pauli_masks(keys, c_s0, out).unwrap();
        if x == 1 {
            Gate::X(1).apply(&mut s).unwrap();
        }
        if z == 1 {
            Gate::Z(0).apply(&mut s).unwrap();
        }
        s
    }

    #[test]
    fn preimage_matches_enumeration() {
        let keys = PaillierKeys::generate(3, 5).unwrap();
        for s0 in 0..2u64 {
            for r0 in keys.pk.units() {
                let cs = keys.pk.encrypt_u64(s0, r0).unwrap();
                let g1 = neg_two(&cs).unwrap();
                for m in 0..2u64 {
                    for r in keys.pk.units() {
                        let base = keys.pk.encrypt_u64(m, r).unwrap();
                        let c0 = crate::paillier::xor_with_plain_bit(&cs, &g1, m as u8, &base).unwrap();
                        assert_eq!(xor_preimage(&keys, &cs, &c0).unwrap(), (m, r));
                    }
                }
            }
        }
    }

    #[test]
    fn corrected_output_is_cnot() {
        let keys = PaillierKeys::generate(3, 5).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        for s0 in 0..2u64 {
            for _ in 0..10 {
                let psi = random_2q(&mut rng);
                let cs = keys.pk.encrypt_random(s0, &mut rng).unwrap();
                let mut s = psi.clone();
                let out = paillier_encrypted_cnot(&keys.pk, &cs, &mut s, 0, 1, &mut rng).unwrap();
                assert_eq!(out.d.len(), 1 + r_bits(15));
                let got = corrected(&keys, &cs, &out, s);
                let mut expect = psi.clone();
                if s0 == 1 {
                    Gate::Cnot(0, 1).apply(&mut expect).unwrap();
                }
                assert!(got.fidelity(&expect).unwrap() > 1.0 - 1e-9);
            }
        }
    }

    #[test]
    fn bell_example() {
        let keys = PaillierKeys::generate(3, 5).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let mut psi = QuantumState::qubits(2);
        Gate::H(0).apply(&mut psi).unwrap();
        let cs = keys.pk.encrypt_u64(1, 7).unwrap();
        let mut s = psi.clone();
        let out = paillier_encrypted_cnot(&keys.pk, &cs, &mut s, 0, 1, &mut rng).unwrap();
        let got = corrected(&keys, &cs, &out, s);
        let bell = got.amplitude(&[1, 1]).norm_sqr() + got.amplitude(&[0, 0]).norm_sqr();
        assert!((bell - 1.0).abs() < 1e-9);
    }

    #[test]
    fn g_marginal_independent_of_control() {
        let keys = PaillierKeys::generate(3, 5).unwrap();
        for s0 in 0..2u64 {
            for r0 in keys.pk.units() {
                let cs = keys.pk.encrypt_u64(s0, r0).unwrap();
                assert!(gadget_marginal_independent(&keys.pk, &cs).unwrap());
            }
        }
    }

    #[test]
    fn rejects_unlisted_modulus() {
        let keys = PaillierKeys::generate(3, 17).unwrap();
        let cs = keys.pk.encrypt_u64(0, 2).unwrap();
        let mut s = QuantumState::qubits(2);
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(matches!(
            paillier_encrypted_cnot(&keys.pk, &cs, &mut s, 0, 1, &mut rng),
            Err(Error::ModulusNotWhitelisted(51))
        ));
    }

    #[test]
    fn toffoli_through_paillier_backend() {
        let p = MheParams::new(32, 2, 4, 1e6).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let (sk, pk) = mhe::keygen(&p, &mut rng);
        let mut auth = CrotAuthority::new(sk.clone(), pk, 5);
        let keys = PaillierKeys::generate(3, 5).unwrap();
        let client_sk = sk.clone();
        let client_keys = keys.clone();
        let mut client_rng = ChaCha20Rng::seed_from_u64(6);
        let request = move |bits: &[MheCiphertext]| {
            bits.iter()
                .map(|b| client_keys.pk.encrypt_random(client_sk.decrypt(b)? as u64, &mut client_rng))
                .collect()
        };
        let backend = PaillierCnot::new(keys.pk.clone(), PaillierConverter::new(keys), request);
        let mut ev = Evaluator::new(backend);
        for input in 0..8u64 {
            let mut plain = QuantumState::qubits(3);
            plain.permute(|k| QuantumState::set_register(k, &[0, 1, 2], input));
            let a: Vec<u8> = (0..3).map(|_| rng.gen_range(0..2)).collect();
            let mut phys = plain.clone();
            phys.permute(|k| {
                for q in 0..3 {
                    k[q] ^= a[q] as u32;
                }
            });
            let x = a.iter().map(|&v| auth.encrypt(v).unwrap()).collect();
            let z = (0..3).map(|_| auth.encrypt(0).unwrap()).collect();
            let mut ms = MaskedState::new(phys, x, z).unwrap();
            ev.gate(&mut auth, &mut ms, &Gate::Toffoli(0, 1, 2)).unwrap();
            let d = ms.unmask(&sk).unwrap().register_distribution(&[0, 1, 2]);
            let expect = input ^ (((input & 1) & (input >> 1)) << 2);
            assert!((d[&expect] - 1.0).abs() < 1e-9);
        }
        assert_eq!(ev.backend.rounds, 8);
        assert_eq!(auth.counts().convert, 24);
        assert!(ev.backend.nand_cost() > 0);
    }
}
