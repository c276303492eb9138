use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;

use num_complex::Complex64;

use super::state::{QuantumState, SlotId};
use crate::error::{Error, Result};

/// Gate set over qubit slots. Rotation angles are in turns:
/// `R(α) = diag(1, e^{2πiα})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    X(SlotId),
    Y(SlotId),
    Z(SlotId),
    H(SlotId),
    P(SlotId),
    T(SlotId),
    R(SlotId, f64),
    Cnot(SlotId, SlotId),
    Cz(SlotId, SlotId),
    Swap(SlotId, SlotId),
    Toffoli(SlotId, SlotId, SlotId),
    Cswap(SlotId, SlotId, SlotId),
    Cr(SlotId, SlotId, f64),
}

pub(crate) fn cis(turns: f64) -> Complex64 {
    // exact values at quarter turns keep Clifford phases free of rounding
    let t = turns.rem_euclid(1.0);
    if t == 0.0 {
        Complex64::new(1.0, 0.0)
    } else if t == 0.25 {
        Complex64::new(0.0, 1.0)
    } else if t == 0.5 {
        Complex64::new(-1.0, 0.0)
    } else if t == 0.75 {
        Complex64::new(0.0, -1.0)
    } else {
        Complex64::from_polar(1.0, 2.0 * PI * t)
    }
}

impl Gate {
    pub fn name(&self) -> &'static str {
        match self {
            Gate::X(_) => "X",
            Gate::Y(_) => "Y",
            Gate::Z(_) => "Z",
            Gate::H(_) => "H",
            Gate::P(_) => "P",
            Gate::T(_) => "T",
            Gate::R(..) => "R",
            Gate::Cnot(..) => "CNOT",
            Gate::Cz(..) => "CZ",
            Gate::Swap(..) => "SWAP",
            Gate::Toffoli(..) => "TOFFOLI",
            Gate::Cswap(..) => "CSWAP",
            Gate::Cr(..) => "CR",
        }
    }

    pub fn targets(&self) -> Vec<SlotId> {
        match *self {
            Gate::X(q) | Gate::Y(q) | Gate::Z(q) | Gate::H(q) | Gate::P(q) | Gate::T(q) | Gate::R(q, _) => vec![q],
            Gate::Cnot(a, b) | Gate::Cz(a, b) | Gate::Swap(a, b) | Gate::Cr(a, b, _) => vec![a, b],
            Gate::Toffoli(a, b, c) | Gate::Cswap(a, b, c) => vec![a, b, c],
        }
    }

    pub fn param(&self) -> Option<f64> {
        match *self {
            Gate::R(_, a) | Gate::Cr(_, _, a) => Some(a),
            _ => None,
        }
    }

    /// Member of the Clifford generating set `{X, Y, Z, H, P, CNOT, CZ, SWAP}`.
    pub fn is_clifford(&self) -> bool {
        matches!(
            self,
            Gate::X(_) | Gate::Y(_) | Gate::Z(_) | Gate::H(_) | Gate::P(_) | Gate::Cnot(..) | Gate::Cz(..) | Gate::Swap(..)
        )
    }

    /// Same gate with slot ids passed through `f`.
    pub fn remap<F: Fn(SlotId) -> SlotId>(&self, f: F) -> Gate {
        match *self {
            Gate::X(q) => Gate::X(f(q)),
            Gate::Y(q) => Gate::Y(f(q)),
            Gate::Z(q) => Gate::Z(f(q)),
            Gate::H(q) => Gate::H(f(q)),
            Gate::P(q) => Gate::P(f(q)),
            Gate::T(q) => Gate::T(f(q)),
            Gate::R(q, a) => Gate::R(f(q), a),
            Gate::Cnot(a, b) => Gate::Cnot(f(a), f(b)),
            Gate::Cz(a, b) => Gate::Cz(f(a), f(b)),
            Gate::Swap(a, b) => Gate::Swap(f(a), f(b)),
            Gate::Toffoli(a, b, c) => Gate::Toffoli(f(a), f(b), f(c)),
            Gate::Cswap(a, b, c) => Gate::Cswap(f(a), f(b), f(c)),
            Gate::Cr(a, b, t) => Gate::Cr(f(a), f(b), t),
        }
    }

    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::P(q) => Gate::R(q, -0.25),
            Gate::T(q) => Gate::R(q, -0.125),
            Gate::R(q, a) => Gate::R(q, -a),
            Gate::Cr(a, b, t) => Gate::Cr(a, b, -t),
            g => g,
        }
    }

    pub fn apply(&self, s: &mut QuantumState) -> Result<()> {
        let targets = self.targets();
        for &t in &targets {
            s.check_qubit(t)?;
        }
        for i in 0..targets.len() {
            if targets[i + 1..].contains(&targets[i]) {
                return Err(Error::InvalidRegister(format!("{} repeats slot {}", self.name(), targets[i])));
            }
        }
        let one = Complex64::new(1.0, 0.0);
        match *self {
            Gate::X(q) => s.permute(|k| k[q] ^= 1),
            Gate::Z(q) => s.phase(|k| if k[q] == 1 { -one } else { one }),
            Gate::Y(q) => {
                // Y = iXZ
                s.phase(|k| if k[q] == 1 { Complex64::new(0.0, -1.0) } else { Complex64::new(0.0, 1.0) });
                s.permute(|k| k[q] ^= 1);
            }
            Gate::H(q) => {
                let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
                s.apply_1q(q, [[h, h], [h, -h]])?;
            }
            Gate::P(q) => s.phase(|k| if k[q] == 1 { cis(0.25) } else { one }),
            Gate::T(q) => {
                let w = cis(0.125);
                s.phase(|k| if k[q] == 1 { w } else { one })
            }
            Gate::R(q, a) => {
                let w = cis(a);
                s.phase(|k| if k[q] == 1 { w } else { one })
            }
            Gate::Cnot(c, t) => s.permute(|k| k[t] ^= k[c]),
            Gate::Cz(a, b) => s.phase(|k| if k[a] & k[b] == 1 { -one } else { one }),
            Gate::Swap(a, b) => s.permute(|k| k.swap(a, b)),
            Gate::Toffoli(a, b, t) => s.permute(|k| k[t] ^= k[a] & k[b]),
            Gate::Cswap(c, a, b) => s.permute(|k| {
                if k[c] == 1 {
                    k.swap(a, b)
                }
            }),
            Gate::Cr(c, t, a) => {
                let w = cis(a);
                s.phase(|k| if k[c] & k[t] == 1 { w } else { one })
            }
        }
        s.prune();
        Ok(())
    }
}

impl fmt::Display for Gate {
    /// `GATE t1,t2 [param]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ts: Vec<String> = self.targets().iter().map(|t| t.to_string()).collect();
        write!(f, "{} {}", self.name(), ts.join(","))?;
        if let Some(p) = self.param() {
            write!(f, " {p}")?;
        }
        Ok(())
    }
}

impl std::str::FromStr for Gate {
    type Err = Error;

    fn from_str(line: &str) -> Result<Gate> {
        let bad = || Error::Malformed(format!("cannot parse gate line {line:?}"));
        let mut parts = line.split_whitespace();
        let name = parts.next().ok_or_else(bad)?;
        let ts: Vec<SlotId> = parts
            .next()
            .ok_or_else(bad)?
            .split(',')
            .map(|t| t.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let p: Option<f64> = parts.next().map(|p| p.parse().map_err(|_| bad())).transpose()?;
        let g = match (name, ts.as_slice(), p) {
            ("X", &[q], None) => Gate::X(q),
            ("Y", &[q], None) => Gate::Y(q),
            ("Z", &[q], None) => Gate::Z(q),
            ("H", &[q], None) => Gate::H(q),
            ("P", &[q], None) => Gate::P(q),
            ("T", &[q], None) => Gate::T(q),
            ("R", &[q], Some(a)) => Gate::R(q, a),
            ("CNOT", &[a, b], None) => Gate::Cnot(a, b),
            ("CZ", &[a, b], None) => Gate::Cz(a, b),
            ("SWAP", &[a, b], None) => Gate::Swap(a, b),
            ("TOFFOLI", &[a, b, c], None) => Gate::Toffoli(a, b, c),
            ("CSWAP", &[a, b, c], None) => Gate::Cswap(a, b, c),
            ("CR", &[a, b], Some(t)) => Gate::Cr(a, b, t),
            _ => return Err(Error::UnsupportedGate(line.to_string())),
        };
        Ok(g)
    }
}

/// Dense matrix of a gate on `n` qubits `0..n` (little-endian), for tests.
pub fn dense_matrix(gates: &[Gate], n: usize) -> Vec<Vec<Complex64>> {
    let d = 1usize << n;
    let mut cols = Vec::with_capacity(d);
    for basis in 0..d {
        let mut s = QuantumState::qubits(n);
        s.permute(|k| {
            for (q, v) in k.iter_mut().enumerate() {
                *v = ((basis >> q) & 1) as u32;
            }
        });
        for g in gates {
            g.apply(&mut s).expect("gate on test register");
        }
        let qs: Vec<SlotId> = (0..n).collect();
        let mut col = vec![Complex64::default(); d];
        for (k, a) in s.amplitudes() {
            col[QuantumState::register_value(k, &qs) as usize] = *a;
        }
        cols.push(col);
    }
    (0..d).map(|r| (0..d).map(|c| cols[c][r]).collect()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> bool {
        a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| (x - y).norm() < 1e-12)
    }

    #[test]
    fn hadamard_on_zero() {
        let mut s = QuantumState::qubits(1);
        Gate::H(0).apply(&mut s).unwrap();
        assert!((s.amplitude(&[0]).re - FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((s.amplitude(&[1]).re - FRAC_1_SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn half_turn_is_z() {
        assert_eq!(dense_matrix(&[Gate::R(0, 0.5)], 1), dense_matrix(&[Gate::Z(0)], 1));
        assert!(close(&dense_matrix(&[Gate::R(0, 0.125)], 1), &dense_matrix(&[Gate::T(0)], 1)));
        assert!(close(&dense_matrix(&[Gate::Cr(0, 1, 0.5)], 2), &dense_matrix(&[Gate::Cz(0, 1)], 2)));
    }

    #[test]
    fn cswap_from_toffoli() {
        // CSWAP(c; a, b) = CNOT(b→a) · Toffoli(c, a → b) · CNOT(b→a)
        let lhs = dense_matrix(&[Gate::Cswap(0, 1, 2)], 3);
        let rhs = dense_matrix(&[Gate::Cnot(2, 1), Gate::Toffoli(0, 1, 2), Gate::Cnot(2, 1)], 3);
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn y_is_i_x_z() {
        let y = dense_matrix(&[Gate::Y(0)], 1);
        let i = Complex64::new(0.0, 1.0);
        assert_eq!(y[0][1], -i);
        assert_eq!(y[1][0], i);
    }

    #[test]
    fn clifford_conjugates_paulis_to_paulis() {
        let paulis_1q = |q| [Gate::X(q), Gate::Y(q), Gate::Z(q)];
        let cliffords = [
            Gate::H(0),
            Gate::P(0),
            Gate::X(0),
            Gate::Z(0),
            Gate::Y(0),
            Gate::Cnot(0, 1),
            Gate::Cz(0, 1),
            Gate::Swap(0, 1),
        ];
        // the 2-qubit Pauli group, up to phase ±1, ±i
        let mut pauli_mats = Vec::new();
        for a in [None, Some(0), Some(1), Some(2)] {
            for b in [None, Some(0), Some(1), Some(2)] {
                let mut gs = Vec::new();
                if let Some(i) = a {
                    gs.push(paulis_1q(0)[i]);
                }
                if let Some(i) = b {
                    gs.push(paulis_1q(1)[i]);
                }
                pauli_mats.push(dense_matrix(&gs, 2));
            }
        }
        let phases = [Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)];
        for c in cliffords {
            for p in [paulis_1q(0), paulis_1q(1)].concat() {
                let conj = dense_matrix(&[c.inverse_exact(), p, c], 2);
                let hit = pauli_mats.iter().any(|m| {
                    phases.iter().any(|ph| {
                        m.iter().flatten().zip(conj.iter().flatten()).all(|(x, y)| (x * ph - y).norm() < 1e-12)
                    })
                });
                assert!(hit, "{c} · {p} · {c}† is not Pauli");
            }
        }
    }

    #[test]
    fn dump_roundtrip() {
        for g in [Gate::Cr(3, 1, 0.0625), Gate::Toffoli(0, 1, 2), Gate::H(5)] {
            assert_eq!(g.to_string().parse::<Gate>().unwrap(), g);
        }
        assert!("FOO 1".parse::<Gate>().is_err());
    }

    #[test]
    fn rejects_non_qubit_target() {
        let mut s = QuantumState::new();
        s.add_slot("g", 3).unwrap();
        assert!(Gate::X(0).apply(&mut s).is_err());
    }

    impl Gate {
        fn inverse_exact(&self) -> Gate {
            match *self {
                Gate::P(q) => Gate::R(q, 0.75),
                g => g.inverse(),
            }
        }
    }
}
