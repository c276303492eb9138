//! LWE and GSW-style matrix encryption.

pub mod gaussian;
pub mod keyswitch;
pub mod lwe;
pub mod mhe;
pub mod params;

pub use keyswitch::{KeySwitchKey, KeySwitchMode};
pub use lwe::{LweCiphertext, LwePublicKey, LweSecretKey};
pub use mhe::{MheCiphertext, MhePublicKey, MheSecretKey};
pub use params::{centered, LweParams, MheParams};
