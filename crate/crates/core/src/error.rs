use thiserror::Error;

/// Errors raised by the homomorphic, simulation and protocol layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parameter mismatch: {0}")]
    ParamsMismatch(String),
    #[error("plaintext {value} outside plaintext space [0, {modulus})")]
    PlaintextOutOfRange { value: u64, modulus: u64 },
    #[error("column level {level} outside 1..={max}")]
    LevelOutOfRange { level: u32, max: u32 },
    #[error("randomness is not a unit modulo N")]
    RandomnessNotCoprime,
    #[error("invalid key: {0}")]
    InvalidKey(String),
    #[error("modulus {0} is not on the superposition whitelist")]
    ModulusNotWhitelisted(u64),
    #[error("state is not normalized (norm^2 = {0})")]
    Unnormalized(f64),
    #[error("invalid register: {0}")]
    InvalidRegister(String),
    #[error("unsupported gate: {0}")]
    UnsupportedGate(String),
    #[error("index {index} out of range for database of size {size}")]
    IndexOutOfRange { index: u64, size: u64 },
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("transport failure: {0}")]
    Transport(String),
    #[error("conversion failure: {0}")]
    Conversion(String),
    #[error("noise budget exhausted: {0}")]
    NoiseBudget(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;
