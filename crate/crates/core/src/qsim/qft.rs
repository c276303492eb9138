use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;

use super::circuit::Circuit;
use super::gates::Gate;
use super::state::{BasisKey, QuantumState, SlotId};
use crate::error::Result;

/// Exact DFT `|x⟩ → L^{-1/2} Σ_y e^{±2πi xy/L} |y⟩` on a little-endian register.
fn dft(s: &mut QuantumState, qubits: &[SlotId], sign: f64) -> Result<()> {
    for &q in qubits {
        s.check_qubit(q)?;
    }
    let l = 1usize << qubits.len();
    let norm = 1.0 / (l as f64).sqrt();
    let roots: Vec<Complex64> = (0..l).map(|k| Complex64::from_polar(norm, sign * 2.0 * PI * k as f64 / l as f64)).collect();
    let mut groups: HashMap<BasisKey, Vec<Complex64>> = HashMap::new();
    for (k, a) in s.amplitudes() {
        let mut rest = k.clone();
        let x = QuantumState::register_value(k, qubits) as usize;
        QuantumState::set_register(&mut rest, qubits, 0);
        groups.entry(rest).or_insert_with(|| vec![Complex64::default(); l])[x] += a;
    }
    let mut out = Vec::with_capacity(groups.len() * l);
    for (rest, v) in groups {
        for y in 0..l {
            let amp: Complex64 = v
                .iter()
                .enumerate()
                .filter(|(_, a)| a.norm_sqr() > 0.0)
                .map(|(x, a)| a * roots[(x * y) % l])
                .sum();
            let mut k = rest.clone();
            QuantumState::set_register(&mut k, qubits, y as u64);
            out.push((k, amp));
        }
    }
    *s = QuantumState::from_amplitudes(s.layout().clone(), out)?;
    Ok(())
}

pub fn qft(s: &mut QuantumState, qubits: &[SlotId]) -> Result<()> {
    dft(s, qubits, 1.0)
}

pub fn inverse_qft(s: &mut QuantumState, qubits: &[SlotId]) -> Result<()> {
    dft(s, qubits, -1.0)
}

/// Gate-level QFT: Hadamards, controlled rotations, and a final reversal.
pub fn qft_circuit(qubits: &[SlotId]) -> Circuit {
    let n = qubits.len();
    let mut c = Circuit::new();
    for j in (0..n).rev() {
        c.push(Gate::H(qubits[j]));
        for k in (0..j).rev() {
            c.push(Gate::Cr(qubits[k], qubits[j], 1.0 / (1u64 << (j - k + 1)) as f64));
        }
    }
    for i in 0..n / 2 {
        c.push(Gate::Swap(qubits[i], qubits[n - 1 - i]));
    }
    c
}

pub fn inverse_qft_circuit(qubits: &[SlotId]) -> Circuit {
    qft_circuit(qubits).inverse()
}
