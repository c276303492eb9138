use crate::error::{Error, Result};
use crate::lattice::MheCiphertext;
use crate::qsim::{Circuit, Gate, QuantumState, SlotId};

use super::authority::CrotAuthority;
use super::masked::MaskedState;

/// Realizes `CNOT^s` for an encrypted control bit `s`.
pub trait CnotBackend {
    type Control;

    /// Converts the FHE-encrypted control bits needed by one Toffoli.
    fn prepare(&mut self, auth: &mut CrotAuthority, bits: &[&MheCiphertext]) -> Result<Vec<Self::Control>>;

    /// Physically applies `Z_c^e X_t^f CNOT^s` and returns `(Enc(e), Enc(f))`.
    fn apply(
        &mut self,
        auth: &mut CrotAuthority,
        state: &mut QuantumState,
        c: SlotId,
        t: SlotId,
        s: &Self::Control,
    ) -> Result<(MheCiphertext, MheCiphertext)>;
}

/// Encrypted CNOT through the authority.
#[derive(Debug, Default, Clone, Copy)]
pub struct MheCnot;

impl CnotBackend for MheCnot {
    type Control = MheCiphertext;

    fn prepare(&mut self, _auth: &mut CrotAuthority, bits: &[&MheCiphertext]) -> Result<Vec<MheCiphertext>> {
        Ok(bits.iter().map(|&b| b.clone()).collect())
    }

    fn apply(
        &mut self,
        auth: &mut CrotAuthority,
        state: &mut QuantumState,
        c: SlotId,
        t: SlotId,
        s: &MheCiphertext,
    ) -> Result<(MheCiphertext, MheCiphertext)> {
        auth.ecnot(state, c, t, s)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EvalStats {
    pub clifford: usize,
    pub rotations: usize,
    pub toffoli: usize,
    pub crot: usize,
    pub ecnot: usize,
}

/// Homomorphic evaluation over a Pauli-masked state.
pub struct Evaluator<B: CnotBackend> {
    pub backend: B,
    pub stats: EvalStats,
}

/// `a ⊕ b` keeping the lower-noise operand on the left, refreshing
/// operands whose ledger would overflow the budget.
pub fn key_xor(auth: &mut CrotAuthority, a: &MheCiphertext, b: &MheCiphertext) -> Result<MheCiphertext> {
    combine(auth, a, b, true)
}

pub fn key_and(auth: &mut CrotAuthority, a: &MheCiphertext, b: &MheCiphertext) -> Result<MheCiphertext> {
    combine(auth, a, b, false)
}

fn combine(auth: &mut CrotAuthority, a: &MheCiphertext, b: &MheCiphertext, xor: bool) -> Result<MheCiphertext> {
    let (mut l, mut r) = if a.noise <= b.noise { (a.clone(), b.clone()) } else { (b.clone(), a.clone()) };
    let m = l.params.cols() as f64;
    let budget = l.params.beta_acc;
    let predict = |l: &MheCiphertext, r: &MheCiphertext| {
        if xor {
            (2.0 * m + 1.0) * l.noise + r.noise
        } else {
            m * l.noise + r.noise
        }
    };
    if predict(&l, &r) > budget {
        if r.noise > 0.0 {
            r = auth.refresh(&r)?;
        }
        if predict(&l, &r) > budget && l.noise > 0.0 {
            l = auth.refresh(&l)?;
        }
        if predict(&l, &r) > budget {
            return Err(Error::NoiseBudget("beta_acc too small for a single gadget product".into()));
        }
    }
    if xor {
        l.xor(&r)
    } else {
        l.and(&r)
    }
}

impl<B: CnotBackend> Evaluator<B> {
    pub fn new(backend: B) -> Self {
        Evaluator { backend, stats: EvalStats::default() }
    }

    pub fn circuit(&mut self, auth: &mut CrotAuthority, ms: &mut MaskedState, c: &Circuit) -> Result<()> {
        for g in &c.gates {
            self.gate(auth, ms, g)?;
        }
        Ok(())
    }

    pub fn gate(&mut self, auth: &mut CrotAuthority, ms: &mut MaskedState, g: &Gate) -> Result<()> {
        if g.is_clifford() {
            return self.clifford(auth, ms, g);
        }
        match *g {
            Gate::T(q) => self.rotation(auth, ms, q, 0.125),
            Gate::R(q, a) => self.rotation(auth, ms, q, a),
            Gate::Cr(c, t, a) => {
                self.rotation(auth, ms, c, a / 2.0)?;
                self.rotation(auth, ms, t, a / 2.0)?;
                self.clifford(auth, ms, &Gate::Cnot(c, t))?;
                self.rotation(auth, ms, t, -a / 2.0)?;
                self.clifford(auth, ms, &Gate::Cnot(c, t))
            }
            Gate::Toffoli(c1, c2, t) => self.toffoli(auth, ms, c1, c2, t),
            Gate::Cswap(c, a, b) => {
                self.clifford(auth, ms, &Gate::Cnot(b, a))?;
                self.toffoli(auth, ms, c, a, b)?;
                self.clifford(auth, ms, &Gate::Cnot(b, a))
            }
            _ => Err(Error::UnsupportedGate(g.to_string())),
        }
    }

    /// Applies a Clifford physically and updates the encrypted keys.
    pub fn clifford(&mut self, auth: &mut CrotAuthority, ms: &mut MaskedState, g: &Gate) -> Result<()> {
        if !g.is_clifford() {
            return Err(Error::UnsupportedGate(format!("{g} is not in the Clifford set")));
        }
        g.apply(&mut ms.state)?;
        self.stats.clifford += 1;
        match *g {
            Gate::X(_) | Gate::Y(_) | Gate::Z(_) => {}
            Gate::H(q) => ms.swap_xz(q),
            Gate::P(q) => {
                let z = key_xor(auth, ms.x_key(q), ms.z_key(q))?;
                ms.set_z(q, z);
            }
            Gate::Cnot(c, t) => {
                let xt = key_xor(auth, ms.x_key(c), ms.x_key(t))?;
                let zc = key_xor(auth, ms.z_key(c), ms.z_key(t))?;
                ms.set_x(t, xt);
                ms.set_z(c, zc);
            }
            Gate::Cz(a, b) => {
                let za = key_xor(auth, ms.z_key(a), ms.x_key(b))?;
                let zb = key_xor(auth, ms.z_key(b), ms.x_key(a))?;
                ms.set_z(a, za);
                ms.set_z(b, zb);
            }
            Gate::Swap(a, b) => ms.swap_qubits(a, b),
            _ => unreachable!(),
        }
        Ok(())
    }

    /// `R_α` on a qubit with X key `a`: rotate physically by `(1-2a)α`.
    fn rotation(&mut self, auth: &mut CrotAuthority, ms: &mut MaskedState, q: SlotId, alpha: f64) -> Result<()> {
        let one = MheCiphertext::trivial(*ms.params(), 1);
        let a = ms.x_key(q).clone();
        let d = auth.crot(&mut ms.state, q, &[(alpha, &one), (-2.0 * alpha, &a)])?;
        let z = key_xor(auth, &d, ms.z_key(q))?;
        ms.set_z(q, z);
        self.stats.rotations += 1;
        self.stats.crot += 1;
        Ok(())
    }

    /// Physical Toffoli followed by three encrypted corrections:
    /// `CNOT^{a1}_{2→3}`, `CNOT^{a2}_{1→3}` and `CZ^{b3}_{12}`.
    fn toffoli(&mut self, auth: &mut CrotAuthority, ms: &mut MaskedState, c1: SlotId, c2: SlotId, t: SlotId) -> Result<()> {
        let (a1, a2, b1, b2, a3, b3) = (
            ms.x_key(c1).clone(),
            ms.x_key(c2).clone(),
            ms.z_key(c1).clone(),
            ms.z_key(c2).clone(),
            ms.x_key(t).clone(),
            ms.z_key(t).clone(),
        );
        let controls = self.backend.prepare(auth, &[&a1, &a2, &b3])?;
        Gate::Toffoli(c1, c2, t).apply(&mut ms.state)?;
        let (e1, f1) = self.backend.apply(auth, &mut ms.state, c2, t, &controls[0])?;
        let (e2, f2) = self.backend.apply(auth, &mut ms.state, c1, t, &controls[1])?;
        Gate::H(c2).apply(&mut ms.state)?;
        let (g, h) = self.backend.apply(auth, &mut ms.state, c1, c2, &controls[2])?;
        Gate::H(c2).apply(&mut ms.state)?;
        self.stats.toffoli += 1;
        self.stats.ecnot += 3;

        let a1a2 = key_and(auth, &a1, &a2)?;
        let a2b3 = key_and(auth, &a2, &b3)?;
        let a1b3 = key_and(auth, &a1, &b3)?;
        let mut x3 = key_xor(auth, &f1, &a3)?;
        x3 = key_xor(auth, &f2, &x3)?;
        x3 = key_xor(auth, &a1a2, &x3)?;
        let mut z1 = key_xor(auth, &e2, &b1)?;
        z1 = key_xor(auth, &g, &z1)?;
        z1 = key_xor(auth, &a2b3, &z1)?;
        let mut z2 = key_xor(auth, &e1, &b2)?;
        z2 = key_xor(auth, &h, &z2)?;
        z2 = key_xor(auth, &a1b3, &z2)?;
        ms.set_x(t, x3);
        ms.set_z(c1, z1);
        ms.set_z(c2, z2);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{mhe, MheParams, MheSecretKey};
    use crate::qsim::qram::{apply_db_unitary, standalone_qram};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn setup(seed: u64) -> (CrotAuthority, MheSecretKey, ChaCha20Rng) {
        let p = MheParams::new(32, 2, 4, 1e6).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let (sk, pk) = mhe::keygen(&p, &mut rng);
        (CrotAuthority::new(sk.clone(), pk, seed ^ 0xabc), sk, rng)
    }

    fn random_state(n: usize, rng: &mut ChaCha20Rng) -> QuantumState {
        let mut s = QuantumState::qubits(n);
        for q in 0..n {
            Gate::H(q).apply(&mut s).unwrap();
            Gate::R(q, rng.gen()).apply(&mut s).unwrap();
        }
        for q in 1..n {
            Gate::Cnot(q - 1, q).apply(&mut s).unwrap();
            Gate::H(q).apply(&mut s).unwrap();
            Gate::R(q, rng.gen()).apply(&mut s).unwrap();
        }
        s
    }

    /// Masks a plaintext state with random keys.
    fn mask(auth: &mut CrotAuthority, plain: &QuantumState, rng: &mut ChaCha20Rng) -> MaskedState {
        let n = plain.layout().len();
        let a: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let b: Vec<u8> = (0..n).map(|_| rng.gen_range(0..2)).collect();
        let mut s = plain.clone();
        let qs: Vec<SlotId> = (0..n).collect();
        crate::qsim::pauli_otp_encrypt(&mut s, &qs, &a, &b).unwrap();
        let x = a.iter().map(|&v| auth.encrypt(v).unwrap()).collect();
        let z = b.iter().map(|&v| auth.encrypt(v).unwrap()).collect();
        MaskedState::new(s, x, z).unwrap()
    }

    fn check_gate(gates: &[Gate], n: usize, seed: u64) {
        let (mut auth, sk, mut rng) = setup(seed);
        for _ in 0..8 {
            let plain = random_state(n, &mut rng);
            let mut ms = mask(&mut auth, &plain, &mut rng);
            let mut ev = Evaluator::new(MheCnot);
            let mut expect = plain.clone();
            for g in gates {
                ev.gate(&mut auth, &mut ms, g).unwrap();
                g.apply(&mut expect).unwrap();
            }
            let got = ms.unmask(&sk).unwrap();
            let f = got.fidelity(&expect).unwrap();
            assert!((f - 1.0).abs() < 1e-9, "{gates:?}: fidelity {f}");
        }
    }

    #[test]
    fn clifford_updates() {
        for (i, g) in [Gate::H(0), Gate::P(1), Gate::X(0), Gate::Y(2), Gate::Z(1), Gate::Cnot(0, 2), Gate::Cz(1, 2), Gate::Swap(0, 1)]
            .into_iter()
            .enumerate()
        {
            check_gate(&[g], 3, 10 + i as u64);
        }
    }

    #[test]
    fn hadamard_key_swap() {
        let (mut auth, sk, _) = setup(1);
        let mut s = QuantumState::qubits(1);
        Gate::X(0).apply(&mut s).unwrap();
        let x = auth.encrypt(1).unwrap();
        let z = auth.encrypt(0).unwrap();
        let mut ms = MaskedState::new(s, vec![x], vec![z]).unwrap();
        Evaluator::new(MheCnot).gate(&mut auth, &mut ms, &Gate::H(0)).unwrap();
        assert_eq!(sk.decrypt(ms.x_key(0)).unwrap(), 0);
        assert_eq!(sk.decrypt(ms.z_key(0)).unwrap(), 1);
        let plus = ms.unmask(&sk).unwrap();
        assert!((plus.amplitude(&[1]) - Complex64::new(0.5f64.sqrt(), 0.0)).norm() < 1e-12);
    }

    #[test]
    fn rotations_and_controlled_rotations() {
        check_gate(&[Gate::T(0)], 2, 20);
        check_gate(&[Gate::R(1, 0.3125)], 2, 21);
        check_gate(&[Gate::Cr(0, 1, 0.25)], 2, 22);
        check_gate(&[Gate::Cr(1, 0, 0.0625), Gate::H(0), Gate::T(1)], 2, 23);
    }

    #[test]
    fn toffoli_and_cswap() {
        check_gate(&[Gate::Toffoli(0, 1, 2)], 3, 30);
        check_gate(&[Gate::Toffoli(2, 0, 1)], 3, 31);
        check_gate(&[Gate::Cswap(0, 1, 2)], 3, 32);
        check_gate(&[Gate::Toffoli(0, 1, 2), Gate::Cswap(2, 0, 1), Gate::Toffoli(1, 2, 0)], 3, 33);
    }

    #[test]
    fn toffoli_truth_table_on_masked_basis_states() {
        let (mut auth, sk, mut rng) = setup(40);
        for input in 0..8u64 {
            let mut plain = QuantumState::qubits(3);
            plain.permute(|k| QuantumState::set_register(k, &[0, 1, 2], input));
            let mut ms = mask(&mut auth, &plain, &mut rng);
            Evaluator::new(MheCnot).gate(&mut auth, &mut ms, &Gate::Toffoli(0, 1, 2)).unwrap();
            let out = ms.unmask(&sk).unwrap();
            let d = out.register_distribution(&[0, 1, 2]);
            let expect = input ^ (((input & 1) & (input >> 1)) << 2);
            assert!((d[&expect] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn qram_over_masked_index() {
        let (mut auth, sk, mut rng) = setup(50);
        let db = [2u64, 1, 3, 0];
        let q = standalone_qram(&db, 2, 4).unwrap();
        for i in 0..4u64 {
            let mut plain = QuantumState::qubits(4);
            plain.permute(|k| QuantumState::set_register(k, &[0, 1], i));
            let mut ms = mask(&mut auth, &plain, &mut rng);
            for k in 0..q.ancillas.len() {
                ms.add_qubit(&format!("anc{k}")).unwrap();
            }
            Evaluator::new(MheCnot).circuit(&mut auth, &mut ms, &q.circuit).unwrap();
            let out = ms.unmask(&sk).unwrap();
            let mut expect = plain.clone();
            q.allocate(&mut expect).unwrap();
            apply_db_unitary(&mut expect, &q.index, &q.output, &db).unwrap();
            assert!((out.fidelity(&expect).unwrap() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_circuit_is_identity() {
        let (mut auth, sk, mut rng) = setup(60);
        let plain = random_state(2, &mut rng);
        let mut ms = mask(&mut auth, &plain, &mut rng);
        Evaluator::new(MheCnot).circuit(&mut auth, &mut ms, &Circuit::new()).unwrap();
        assert!((ms.unmask(&sk).unwrap().fidelity(&plain).unwrap() - 1.0).abs() < 1e-12);
    }
}
