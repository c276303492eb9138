use super::circuit::Circuit;
use super::gates::Gate;
use super::state::{QuantumState, SlotId};
use crate::error::{Error, Result};

/// Gate-level QRAM for a classical table, realizing `|i⟩|0⟩ → |i⟩|DB_i⟩`.
///
/// The table is processed in `N/M` blocks of `M` words. Each block is
/// loaded into `M·w` memory qubits, routed to position 0 by a controlled-SWAP
/// tree driven by the low index bits (with fan-out copies so every layer is
/// parallel), copied out under a block flag, then everything is undone.
#[derive(Debug, Clone)]
pub struct Qram {
    pub circuit: Circuit,
    pub index: Vec<SlotId>,
    pub output: Vec<SlotId>,
    /// Ancilla slots, contiguous from `first_ancilla`; all return to `|0⟩`.
    pub ancillas: Vec<SlotId>,
    pub block_size: usize,
}

impl Qram {
    /// Adds the ancilla qubits this circuit expects to a state whose
    /// layout currently ends at `ancillas[0]`.
    pub fn allocate(&self, s: &mut QuantumState) -> Result<()> {
        for (i, &a) in self.ancillas.iter().enumerate() {
            let id = s.add_slot(&format!("qram_anc{i}"), 2)?;
            if id != a {
                return Err(Error::InvalidRegister(format!("ancilla {i} landed at slot {id}, expected {a}")));
            }
        }
        Ok(())
    }

    /// Removes the ancillas again (they must be back in `|0⟩`).
    pub fn release(&self, s: &mut QuantumState) -> Result<()> {
        for &a in self.ancillas.iter().rev() {
            if s.remove_slot(a)? != 0 {
                return Err(Error::InvalidRegister("QRAM ancilla left dirty".into()));
            }
        }
        Ok(())
    }
}

fn word_bit(db: &[u64], idx: usize, b: usize) -> bool {
    (db[idx] >> b) & 1 == 1
}

/// Builds the QRAM circuit. `index` is little-endian with `log2 N` qubits,
/// `output` holds `word_bits` qubits, ancillas are numbered from
/// `first_ancilla`. `m` is the memory budget in words (clamped to `N`).
pub fn build_qram_circuit(
    db: &[u64],
    word_bits: usize,
    m: usize,
    index: &[SlotId],
    output: &[SlotId],
    first_ancilla: SlotId,
) -> Result<Qram> {
    let n = db.len();
    if n == 0 || !n.is_power_of_two() {
        return Err(Error::InvalidParams(format!("database size {n} is not a power of two")));
    }
    if m < 1 {
        return Err(Error::InvalidParams("memory budget M must be at least 1".into()));
    }
    if !m.is_power_of_two() {
        return Err(Error::InvalidParams(format!("memory budget M = {m} must be a power of two")));
    }
    let l = n.trailing_zeros() as usize;
    if index.len() != l || output.len() != word_bits {
        return Err(Error::InvalidParams("index/output register sizes do not match the table".into()));
    }
    let m = m.min(n);
    let lm = m.trailing_zeros() as usize;
    let high = l - lm;
    let blocks = n / m;

    let mut next = first_ancilla;
    let mut alloc = |k: usize| -> Vec<SlotId> {
        let v: Vec<SlotId> = (next..next + k).collect();
        next += k;
        v
    };
    let mem: Vec<Vec<SlotId>> = (0..m).map(|_| alloc(word_bits)).collect();
    let copies = alloc(if lm > 0 { (1usize << (lm - 1)) - 1 } else { 0 });
    let ladder = alloc(high.saturating_sub(1));
    let ancillas: Vec<SlotId> = (first_ancilla..next).collect();

    let low = &index[..lm];
    let hi = &index[lm..];
    let mut c = Circuit::new();

    // flag = [high bits == h]; returns the slot holding it
    let flag_circuit = |h: usize| -> (Circuit, Option<SlotId>) {
        let mut f = Circuit::new();
        if high == 0 {
            return (f, None);
        }
        for (k, &q) in hi.iter().enumerate() {
            if (h >> k) & 1 == 0 {
                f.push(Gate::X(q));
            }
        }
        if high == 1 {
            return (f, Some(hi[0]));
        }
        f.push(Gate::Toffoli(hi[0], hi[1], ladder[0]));
        for k in 2..high {
            f.push(Gate::Toffoli(ladder[k - 2], hi[k], ladder[k - 1]));
        }
        (f, Some(ladder[high - 2]))
    };

    // controlled-SWAP tree bringing word `low` to position 0
    let mut route = Circuit::new();
    for k in (0..lm).rev() {
        let width = 1usize << k;
        let mut controls = vec![low[k]];
        let mut fan = Circuit::new();
        while controls.len() < width {
            let have = controls.len();
            for i in 0..have.min(width - have) {
                let t = copies[have - 1 + i];
                fan.push(Gate::Cnot(controls[i], t));
                controls.push(t);
            }
        }
        route.extend(&fan);
        for b in 0..word_bits {
            for j in 0..width {
                route.push(Gate::Cswap(controls[j], mem[j][b], mem[j + width][b]));
            }
        }
        route.extend(&fan.inverse());
    }

    for h in 0..blocks {
        let mut load = Circuit::new();
        for (j, word) in mem.iter().enumerate() {
            for (b, &q) in word.iter().enumerate() {
                if word_bit(db, h * m + j, b) {
                    load.push(Gate::X(q));
                }
            }
        }
        if load.is_empty() {
            // nothing to copy from an all-zero block
            continue;
        }
        let (flag_c, flag) = flag_circuit(h);
        c.extend(&flag_c);
        c.extend(&load);
        c.extend(&route);
        for b in 0..word_bits {
            match flag {
                Some(f) => c.push(Gate::Toffoli(f, mem[0][b], output[b])),
                None => c.push(Gate::Cnot(mem[0][b], output[b])),
            }
        }
        c.extend(&route.inverse());
        c.extend(&load);
        c.extend(&flag_c.inverse());
    }

    Ok(Qram { circuit: c, index: index.to_vec(), output: output.to_vec(), ancillas, block_size: m })
}

/// Standalone layout: index `0..l`, output `l..l+w`, ancillas after.
pub fn standalone_qram(db: &[u64], word_bits: usize, m: usize) -> Result<Qram> {
    let l = db.len().trailing_zeros() as usize;
    let index: Vec<SlotId> = (0..l).collect();
    let output: Vec<SlotId> = (l..l + word_bits).collect();
    build_qram_circuit(db, word_bits, m, &index, &output, l + word_bits)
}

/// Direct table action `|i⟩|y⟩ → |i⟩|y ⊕ DB_i⟩`, requiring `y = 0` on the support.
pub fn apply_db_unitary(s: &mut QuantumState, index: &[SlotId], output: &[SlotId], db: &[u64]) -> Result<()> {
    for &q in index.iter().chain(output) {
        s.check_qubit(q)?;
    }
    if db.len() != 1usize << index.len() {
        return Err(Error::InvalidParams(format!("table of {} words for a {}-qubit index", db.len(), index.len())));
    }
    if s.amplitudes().keys().any(|k| QuantumState::register_value(k, output) != 0) {
        return Err(Error::InvalidRegister("data register is not zeroed".into()));
    }
    let w = output.len();
    let mask = if w >= 64 { u64::MAX } else { (1u64 << w) - 1 };
    s.permute(|k| {
        let i = QuantumState::register_value(k, index) as usize;
        QuantumState::set_register(k, output, db[i] & mask);
    });
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::state::RegisterLayout;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn indexed_state(l: usize, w: usize, rng: &mut ChaCha20Rng) -> QuantumState {
        let mut layout = RegisterLayout::new();
        for i in 0..l + w {
            layout.push(&format!("q{i}"), 2).unwrap();
        }
        let idx: Vec<SlotId> = (0..l).collect();
        let amps: Vec<_> = (0..1u64 << l)
            .map(|x| {
                let mut k = vec![0u32; l + w];
                QuantumState::set_register(&mut k, &idx, x);
                (k, Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            })
            .collect();
        QuantumState::from_amplitudes(layout, amps).unwrap()
    }

    #[test]
    fn direct_table() {
        let mut s = QuantumState::qubits(5);
        s.permute(|k| {
            k[0] = 1;
            k[1] = 1;
        });
        let db = [0, 0, 0, 5, 0, 0, 0, 0];
        apply_db_unitary(&mut s, &[0, 1, 2], &[3, 4], &db).unwrap();
        // 5 truncated to 2 bits is 1
        assert_eq!(s.amplitudes().keys().next().unwrap(), &vec![1, 1, 0, 1, 0]);
        assert!(apply_db_unitary(&mut s, &[0, 1, 2], &[3, 4], &db).is_err());
    }

    #[test]
    fn single_word_table() {
        let q = standalone_qram(&[3], 2, 1).unwrap();
        let mut s = QuantumState::qubits(2);
        q.allocate(&mut s).unwrap();
        q.circuit.apply(&mut s).unwrap();
        q.release(&mut s).unwrap();
        assert_eq!(s.amplitudes().keys().next().unwrap(), &vec![1, 1]);
        assert!(standalone_qram(&[1, 2, 3], 2, 1).is_err());
        assert!(standalone_qram(&[1, 2], 2, 0).is_err());
    }

    #[test]
    fn circuit_matches_table() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for n in [2usize, 4, 8, 16] {
            for m in [1usize, 2, n] {
                let w = 3;
                let l = n.trailing_zeros() as usize;
                let db: Vec<u64> = (0..n).map(|_| rng.gen_range(0..8)).collect();
                let q = standalone_qram(&db, w, m).unwrap();
                for _ in 0..10 {
                    let s = indexed_state(l, w, &mut rng);
                    let mut a = s.clone();
                    q.allocate(&mut a).unwrap();
                    q.circuit.apply(&mut a).unwrap();
                    q.release(&mut a).unwrap();
                    let mut b = s.clone();
                    apply_db_unitary(&mut b, &q.index, &q.output, &db).unwrap();
                    assert!(a.fidelity(&b).unwrap() > 1.0 - 1e-9, "n={n} m={m}");
                }
            }
        }
    }

    #[test]
    fn depth_tradeoff() {
        let db: Vec<u64> = (0..8).map(|i| (i * 5 + 3) % 8).collect();
        let small = standalone_qram(&db, 3, 1).unwrap();
        let big = standalone_qram(&db, 3, 8).unwrap();
        assert!(small.circuit.depth() > big.circuit.depth());
        assert!(small.ancillas.len() < big.ancillas.len());
    }
}
