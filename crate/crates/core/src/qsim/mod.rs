//! Sparse mixed-radix statevector simulation.

pub mod circuit;
pub mod gates;
pub mod otp;
pub mod qft;
pub mod qram;
pub mod state;

pub use circuit::Circuit;
pub use gates::Gate;
pub use otp::{pauli_otp_decrypt, pauli_otp_encrypt};
pub use qft::{inverse_qft, inverse_qft_circuit, qft, qft_circuit};
pub use qram::{apply_db_unitary, build_qram_circuit, standalone_qram, Qram};
pub use state::{QuantumState, RegisterLayout, SlotId};
