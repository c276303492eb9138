//! Private information retrieval with a quantum server.

pub mod db;
pub mod message;
pub mod paillier_qpir;
pub mod privacy;
pub mod qcpir;
pub mod transport;

pub use db::Database;
pub use message::{Party, PirMessage, Transcript, TranscriptEntry};
pub use paillier_qpir::{paillier_qpir_run, PaillierPirOutcome, PaillierQpirClient, PaillierQpirServer};
pub use privacy::{chi_square_homogeneity, privacy_smoke_test, PrivacyReport, Protocol};
pub use qcpir::{audit_is_blind, qcpir_run, PirOutcome, QcpirClient, QcpirServer, ServerStats, SessionSeeds};
pub use transport::{link_pair, Link, TransportKind};
