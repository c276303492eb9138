//! `key = value` experiment configuration with named presets.

use std::collections::BTreeMap;
use std::path::Path;

use crate::blindrot::{BootstrapParams, NStarThreshold};
use crate::bootstrap::Strategy;
use crate::error::{Error, Result};
use crate::lattice::{KeySwitchMode, LweParams, MheParams};
use crate::paillier::PaillierKeys;
use crate::pir::TransportKind;

pub const PRESETS: &[(&str, &str)] = &[
    ("toy-rotation", include_str!("../../../presets/toy-rotation.conf")),
    ("compressed-readout", include_str!("../../../presets/compressed-readout.conf")),
    ("distribution", include_str!("../../../presets/distribution.conf")),
    ("bootstrap-toy", include_str!("../../../presets/bootstrap-toy.conf")),
    ("fbootstrap-toy", include_str!("../../../presets/fbootstrap-toy.conf")),
    ("pir-toy", include_str!("../../../presets/pir-toy.conf")),
    ("paillier-qpir-toy", include_str!("../../../presets/paillier-qpir-toy.conf")),
    ("paillier-cnot-toy", include_str!("../../../presets/paillier-cnot-toy.conf")),
    ("production", include_str!("../../../presets/production.conf")),
];

pub fn preset_text(name: &str) -> Result<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
            Error::Config(format!("unknown preset `{name}`; known: {}", known.join(", ")))
        })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PirProtocol {
    Qcpir,
    Paillier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub lwe: LweParams,
    pub mhe_log_q: u32,
    pub mhe_n: usize,
    pub mhe_beta_init: u64,
    /// `None` selects the bootstrapping noise limit for the configured `l'`.
    pub mhe_beta_acc: Option<f64>,
    pub boot: BootstrapParams,
    pub keyswitch: KeySwitchMode,
    pub runs: usize,
    pub shots: usize,
    pub seed: u64,
    pub messages: usize,
    pub threshold: NStarThreshold,
    pub noise_fraction: f64,
    pub strategy: Strategy,
    pub function: String,
    pub log_l_tilde: u32,
    pub db_size: usize,
    pub word_bits: usize,
    pub qram_m: usize,
    pub protocol: PirProtocol,
    pub transport: TransportKind,
    pub paillier: (u64, u64),
    /// Resolved settings in file order, for result persistence.
    pub resolved: BTreeMap<String, String>,
}

const KEYS: &[&str] = &[
    "lwe.log_q", "lwe.log_l", "lwe.n", "lwe.noise_bound",
    "mhe.log_q", "mhe.n", "mhe.beta_init", "mhe.beta_acc",
    "boot.n_star_bits", "boot.l_prime_bits", "boot.keyswitch",
    "runs", "shots", "seed", "messages", "threshold", "noise_fraction",
    "strategy", "function", "log_l_tilde",
    "pir.n", "pir.word_bits", "pir.qram_m", "pir.protocol", "pir.transport",
    "paillier.p", "paillier.q",
];

fn parse_lines(text: &str, out: &mut BTreeMap<String, String>, depth: usize) -> Result<()> {
    if depth > 4 {
        return Err(Error::Config("preset nesting too deep".into()));
    }
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1)))?;
        let (k, v) = (k.trim(), v.trim());
        if k == "preset" {
            parse_lines(preset_text(v)?, out, depth + 1)?;
        } else if KEYS.contains(&k) {
            out.insert(k.to_string(), v.to_string());
        } else {
            return Err(Error::Config(format!("line {}: unknown key `{k}`", lineno + 1)));
        }
    }
    Ok(())
}

fn get<T: std::str::FromStr>(m: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match m.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`"))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut m = BTreeMap::new();
        parse_lines(text, &mut m, 0)?;
        Self::from_map(m)
    }

    pub fn preset(name: &str) -> Result<Self> {
        Self::parse(&format!("preset = {name}"))
    }

    /// Loads a file, or a preset when `path` names one.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            if let Some(name) = path.to_str().filter(|n| preset_text(n).is_ok()) {
                return Self::preset(name);
            }
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Overrides individual keys, e.g. from the command line.
    pub fn with(&self, key: &str, value: &str) -> Result<Self> {
        let mut m = self.resolved.clone();
        parse_lines(&format!("{key} = {value}"), &mut m, 0)?;
        Self::from_map(m)
    }

    fn from_map(m: BTreeMap<String, String>) -> Result<Self> {
        let lwe = LweParams::new(
            get(&m, "lwe.log_q", 20)?,
            get(&m, "lwe.log_l", 4)?,
            get(&m, "lwe.n", 16)?,
            get(&m, "lwe.noise_bound", 8)?,
        )?;
        let beta_acc = match m.get("mhe.beta_acc").map(String::as_str) {
            None | Some("auto") => None,
            Some(v) => Some(v.parse().map_err(|_| Error::Config(format!("`mhe.beta_acc`: cannot parse `{v}`")))?),
        };
        let keyswitch = match m.get("boot.keyswitch").map(String::as_str) {
            None | Some("full") => KeySwitchMode::Full,
            Some("truncated") => KeySwitchMode::Truncated,
            Some(v) => return Err(Error::Config(format!("`boot.keyswitch`: expected full | truncated, got `{v}`"))),
        };
        let protocol = match m.get("pir.protocol").map(String::as_str) {
            None | Some("qcpir") => PirProtocol::Qcpir,
            Some("paillier") | Some("paillier-qpir") => PirProtocol::Paillier,
            Some(v) => return Err(Error::Config(format!("`pir.protocol`: expected qcpir | paillier, got `{v}`"))),
        };
        let cfg = ExperimentConfig {
            lwe,
            mhe_log_q: get(&m, "mhe.log_q", 40)?,
            mhe_n: get(&m, "mhe.n", 2)?,
            mhe_beta_init: get(&m, "mhe.beta_init", 4)?,
            mhe_beta_acc: beta_acc,
            boot: BootstrapParams::new(get(&m, "boot.n_star_bits", 20)?, get(&m, "boot.l_prime_bits", lwe.log_l)?)?,
            keyswitch,
            runs: get(&m, "runs", 100)?,
            shots: get(&m, "shots", 1)?,
            seed: get(&m, "seed", 1)?,
            messages: get(&m, "messages", 1)?,
            threshold: get(&m, "threshold", NStarThreshold::Modulus)?,
            noise_fraction: get(&m, "noise_fraction", 0.0)?,
            strategy: get(&m, "strategy", Strategy::Qram)?,
            function: m.get("function").cloned().unwrap_or_else(|| "identity".into()),
            log_l_tilde: get(&m, "log_l_tilde", lwe.log_l)?,
            db_size: get(&m, "pir.n", 16)?,
            word_bits: get(&m, "pir.word_bits", 4)?,
            qram_m: get(&m, "pir.qram_m", 0)?,
            protocol,
            transport: get(&m, "pir.transport", TransportKind::InProcess)?,
            paillier: (get(&m, "paillier.p", 3)?, get(&m, "paillier.q", 5)?),
            resolved: m,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn mhe(&self) -> Result<MheParams> {
        match self.mhe_beta_acc {
            None => MheParams::for_bootstrapping(self.mhe_log_q, self.mhe_n, self.mhe_beta_init, self.boot.l_prime_bits),
            Some(b) => MheParams::new(self.mhe_log_q, self.mhe_n, self.mhe_beta_init, b),
        }
    }

    /// QRAM memory budget; `0` means the whole database.
    pub fn qram_budget(&self) -> usize {
        if self.qram_m == 0 { self.db_size } else { self.qram_m }
    }

    /// Checks every precondition the runners rely on.
    pub fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::Config(s));
        let mhe = self.mhe()?;
        if self.boot.l_prime_bits > mhe.log_q {
            return bad(format!("boot.l_prime_bits = {} exceeds mhe.log_q = {}", self.boot.l_prime_bits, mhe.log_q));
        }
        if self.mhe_beta_acc.is_none() {
            mhe.validate_for_bootstrapping(self.boot.l_prime_bits)?;
        }
        if self.boot.n_star_bits < self.boot.l_prime_bits {
            return bad(format!("boot.n_star_bits = {} must be at least l' = {}", self.boot.n_star_bits, self.boot.l_prime_bits));
        }
        if self.runs == 0 || self.shots == 0 || self.messages == 0 {
            return bad("runs, shots and messages must be positive".into());
        }
        if !(0.0..1.0).contains(&self.noise_fraction) {
            return bad(format!("noise_fraction = {} must lie in [0, 1)", self.noise_fraction));
        }
        if self.log_l_tilde == 0 || self.log_l_tilde > 16 {
            return bad(format!("log_l_tilde = {} must lie in 1..=16", self.log_l_tilde));
        }
        if !["identity", "msb", "square", "random"].contains(&self.function.as_str()) {
            return bad(format!("function `{}`: expected identity | msb | square | random", self.function));
        }
        if self.db_size == 0 || !self.db_size.is_power_of_two() {
            return bad(format!("pir.n = {} must be a power of two", self.db_size));
        }
        if self.word_bits == 0 || self.word_bits > 64 {
            return bad(format!("pir.word_bits = {} must lie in 1..=64", self.word_bits));
        }
        let m = self.qram_budget();
        if !m.is_power_of_two() || m > self.db_size {
            return bad(format!("pir.qram_m = {m} must be a power of two not above pir.n"));
        }
        let (p, q) = self.paillier;
        if let Err(e) = PaillierKeys::generate(p, q) {
            return bad(format!("paillier.p/q = {p}/{q}: {e}"));
        }
        Ok(())
    }

    /// Resolved configuration as `key = value` lines.
    pub fn to_conf(&self) -> String {
        self.resolved.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates() {
        for (name, _) in PRESETS {
            ExperimentConfig::preset(name).unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn overrides_and_errors() {
        let c = ExperimentConfig::parse("preset = toy-rotation\nruns = 7 # fewer\n").unwrap();
        assert_eq!(c.runs, 7);
        assert_eq!(c.lwe.log_q, 20);
        assert_eq!(c.with("seed", "9").unwrap().seed, 9);
        assert_eq!(ExperimentConfig::parse(&c.to_conf()).unwrap(), c);
        for bad in ["frobnicate = 1", "runs 3", "lwe.log_q = x", "preset = nope", "pir.n = 6", "paillier.q = 7", "boot.l_prime_bits = 30"] {
            assert!(matches!(ExperimentConfig::parse(bad), Err(Error::Config(_)) | Err(Error::InvalidParams(_))), "{bad}");
        }
    }
}
