use crate::error::{Error, Result};
use crate::lattice::{MheCiphertext, MheParams, MheSecretKey};
use crate::qsim::{pauli_otp_decrypt, QuantumState, SlotId};

/// Physical state `X^a Z^b |ψ⟩` together with MHE encryptions of the keys.
/// Keys are indexed by slot id; every slot of the state is a qubit.
#[derive(Debug, Clone)]
pub struct MaskedState {
    pub state: QuantumState,
    x: Vec<MheCiphertext>,
    z: Vec<MheCiphertext>,
    params: MheParams,
}

impl MaskedState {
    pub fn new(state: QuantumState, x: Vec<MheCiphertext>, z: Vec<MheCiphertext>) -> Result<Self> {
        let n = state.layout().len();
        if x.len() != n || z.len() != n || n == 0 {
            return Err(Error::InvalidParams(format!("{n} slots but {} X keys and {} Z keys", x.len(), z.len())));
        }
        for q in 0..n {
            if state.layout().slot(q).radix != 2 {
                return Err(Error::InvalidRegister("masked states hold qubits only".into()));
            }
        }
        let params = x[0].params;
        Ok(MaskedState { state, x, z, params })
    }

    /// An unmasked state: all keys are noiseless encryptions of 0.
    pub fn unmasked(state: QuantumState, params: MheParams) -> Result<Self> {
        let n = state.layout().len();
        let zero = MheCiphertext::trivial(params, 0);
        Self::new(state, vec![zero.clone(); n], vec![zero; n])
    }

    pub fn params(&self) -> &MheParams {
        &self.params
    }

    pub fn num_qubits(&self) -> usize {
        self.x.len()
    }

    /// Appends an unmasked `|0⟩` qubit.
    pub fn add_qubit(&mut self, name: &str) -> Result<SlotId> {
        let id = self.state.add_slot(name, 2)?;
        self.x.push(MheCiphertext::trivial(self.params, 0));
        self.z.push(MheCiphertext::trivial(self.params, 0));
        Ok(id)
    }

    pub fn x_key(&self, q: SlotId) -> &MheCiphertext {
        &self.x[q]
    }

    pub fn z_key(&self, q: SlotId) -> &MheCiphertext {
        &self.z[q]
    }

    pub fn x_keys(&self, qs: &[SlotId]) -> Vec<MheCiphertext> {
        qs.iter().map(|&q| self.x[q].clone()).collect()
    }

    pub fn set_x(&mut self, q: SlotId, ct: MheCiphertext) {
        self.x[q] = ct;
    }

    pub fn set_z(&mut self, q: SlotId, ct: MheCiphertext) {
        self.z[q] = ct;
    }

    pub(crate) fn swap_xz(&mut self, q: SlotId) {
        std::mem::swap(&mut self.x[q], &mut self.z[q]);
    }

    pub(crate) fn swap_qubits(&mut self, a: SlotId, b: SlotId) {
        self.x.swap(a, b);
        self.z.swap(a, b);
    }

    /// Largest key ledger.
    pub fn max_noise(&self) -> f64 {
        self.x.iter().chain(&self.z).map(|c| c.noise).fold(0.0, f64::max)
    }

    /// Test oracle: decrypts all keys and strips the pad.
    pub fn unmask(&self, sk: &MheSecretKey) -> Result<QuantumState> {
        let a: Vec<u8> = self.x.iter().map(|c| sk.decrypt(c)).collect::<Result<_>>()?;
        let b: Vec<u8> = self.z.iter().map(|c| sk.decrypt(c)).collect::<Result<_>>()?;
        let qs: Vec<SlotId> = (0..self.x.len()).collect();
        let mut s = self.state.clone();
        pauli_otp_decrypt(&mut s, &qs, &a, &b)?;
        Ok(s)
    }
}
