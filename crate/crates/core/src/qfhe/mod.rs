//! Pauli-masked homomorphic evaluation.

pub mod authority;
pub mod eval;
pub mod masked;
pub mod paillier_cnot;

pub use authority::{AuditEntry, AuthorityCounts, CrotAuthority};
pub use eval::{key_and, key_xor, CnotBackend, EvalStats, Evaluator, MheCnot};
pub use masked::MaskedState;
pub use paillier_cnot::{gadget_marginal_independent, pauli_masks, paillier_encrypted_cnot, xor_preimage, PaillierCnotOutcome, PaillierCnot, PaillierConverter};
