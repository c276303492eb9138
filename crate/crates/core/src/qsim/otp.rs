use super::gates::Gate;
use super::state::{QuantumState, SlotId};
use crate::error::{Error, Result};

/// Applies `X^a Z^b` to every listed qubit.
pub fn pauli_otp_encrypt(s: &mut QuantumState, qubits: &[SlotId], x_keys: &[u8], z_keys: &[u8]) -> Result<()> {
    if qubits.len() != x_keys.len() || qubits.len() != z_keys.len() {
        return Err(Error::InvalidParams(format!(
            "{} qubits but {} X keys and {} Z keys",
            qubits.len(),
            x_keys.len(),
            z_keys.len()
        )));
    }
    for ((&q, &a), &b) in qubits.iter().zip(x_keys).zip(z_keys) {
        if b & 1 == 1 {
            Gate::Z(q).apply(s)?;
        }
        if a & 1 == 1 {
            Gate::X(q).apply(s)?;
        }
    }
    Ok(())
}

/// Applies `X^a Z^b` again; the result equals the plaintext up to `(-1)^{a·b}`.
pub fn pauli_otp_decrypt(s: &mut QuantumState, qubits: &[SlotId], x_keys: &[u8], z_keys: &[u8]) -> Result<()> {
    pauli_otp_encrypt(s, qubits, x_keys, z_keys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn zero_keys_are_identity() {
        let mut s = QuantumState::qubits(2);
        Gate::H(0).apply(&mut s).unwrap();
        let before = s.clone();
        pauli_otp_encrypt(&mut s, &[0, 1], &[0, 0], &[0, 0]).unwrap();
        assert!((s.inner(&before).unwrap() - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(pauli_otp_encrypt(&mut s, &[0, 1], &[0], &[0, 0]).is_err());
    }

    #[test]
    fn encrypt_then_decrypt() {
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..20 {
            let mut s = QuantumState::qubits(3);
            for q in 0..3 {
                Gate::H(q).apply(&mut s).unwrap();
                Gate::R(q, rng.gen()).apply(&mut s).unwrap();
            }
            Gate::Cnot(0, 2).apply(&mut s).unwrap();
            let before = s.clone();
            let a: Vec<u8> = (0..3).map(|_| rng.gen_range(0..2)).collect();
            let b: Vec<u8> = (0..3).map(|_| rng.gen_range(0..2)).collect();
            pauli_otp_encrypt(&mut s, &[0, 1, 2], &a, &b).unwrap();
            pauli_otp_decrypt(&mut s, &[0, 1, 2], &a, &b).unwrap();
            let sign: u8 = a.iter().zip(&b).map(|(x, y)| x & y).sum::<u8>() % 2;
            let expect = if sign == 1 { -1.0 } else { 1.0 };
            assert!((s.inner(&before).unwrap() - Complex64::new(expect, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn key_average_is_maximally_mixed() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        for _ in 0..10 {
            let mut base = QuantumState::qubits(1);
            Gate::H(0).apply(&mut base).unwrap();
            Gate::R(0, rng.gen()).apply(&mut base).unwrap();
            Gate::H(0).apply(&mut base).unwrap();
            let mut rho = [[Complex64::default(); 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    let mut s = base.clone();
                    pauli_otp_encrypt(&mut s, &[0], &[a], &[b]).unwrap();
                    let r = s.reduced_density(&[0]);
                    for i in 0..2 {
                        for j in 0..2 {
                            rho[i][j] += r[i][j] / 4.0;
                        }
                    }
                }
            }
            assert!((rho[0][0] - 0.5).norm() < 1e-12 && (rho[1][1] - 0.5).norm() < 1e-12);
            assert!(rho[0][1].norm() < 1e-12 && rho[1][0].norm() < 1e-12);
        }
    }
}
