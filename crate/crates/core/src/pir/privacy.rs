use std::collections::BTreeMap;

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::db::Database;
use super::message::{decode_mhe, PirMessage, Transcript};
use super::paillier_qpir::paillier_qpir_run;
use super::qcpir::{qcpir_run, SessionSeeds};
use super::transport::TransportKind;
use crate::error::{Error, Result};
use crate::lattice::MheParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    Qcpir,
    PaillierQpir { p: u64, q: u64 },
}

#[derive(Debug, Clone)]
pub struct PrivacyReport {
    pub trials: usize,
    pub lengths_equal: bool,
    pub rounds_equal: bool,
    /// Smallest p-value over the per-feature homogeneity tests.
    pub min_p_value: f64,
    pub p_values: BTreeMap<String, f64>,
}

impl PrivacyReport {
    pub fn passed(&self, alpha: f64) -> bool {
        self.lengths_equal && self.rounds_equal && self.min_p_value > alpha
    }
}

/// Chi-square test of homogeneity for two histograms over the same bins.
pub fn chi_square_homogeneity(a: &BTreeMap<u64, usize>, b: &BTreeMap<u64, usize>) -> f64 {
    let bins: Vec<u64> = a.keys().chain(b.keys()).copied().collect::<std::collections::BTreeSet<_>>().into_iter().collect();
    if bins.len() < 2 {
        return 1.0;
    }
    let na: usize = a.values().sum();
    let nb: usize = b.values().sum();
    let total = (na + nb) as f64;
    let mut stat = 0.0;
    for k in &bins {
        let (oa, ob) = (*a.get(k).unwrap_or(&0) as f64, *b.get(k).unwrap_or(&0) as f64);
        let col = oa + ob;
        let ea = col * na as f64 / total;
        let eb = col * nb as f64 / total;
        stat += (oa - ea).powi(2) / ea + (ob - eb).powi(2) / eb;
    }
    let dof = (bins.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).expect("positive dof").cdf(stat)
}

/// Index-independent features of a transcript: low bits of the first
/// ciphertext entry of every message, the answer word and any clear index.
fn features(t: &Transcript) -> Result<Vec<(String, u64)>> {
    let mut out = Vec::new();
    for (seq, msg) in t.messages()?.iter().enumerate() {
        let cts = match msg {
            PirMessage::Query { bits } => bits,
            PirMessage::MaskedQuery { masked_index, keys } => {
                let v = masked_index.iter().enumerate().map(|(k, &b)| (b as u64) << k).sum();
                out.push((format!("{seq}:masked_index"), v));
                keys
            }
            PirMessage::Answer { word, mask } => {
                out.push((format!("{seq}:word"), *word));
                mask
            }
            PirMessage::ConversionRequest { bits, .. } => bits,
            PirMessage::ConversionReply { encrypted_keys, .. } => encrypted_keys,
        };
        if let Some(first) = decode_mhe(cts)?.first() {
            out.push((format!("{seq}:ct"), first.data()[0] & 0xf));
        }
    }
    Ok(out)
}

/// Runs the protocol `trials` times for indices `i` and `j` under fresh keys
/// and compares transcript statistics. A desk-scale smoke test only.
pub fn privacy_smoke_test(protocol: Protocol, db: &Database, i: u64, j: u64, trials: usize, params: MheParams, seed: u64) -> Result<PrivacyReport> {
    if i == j {
        return Err(Error::InvalidParams("privacy test needs two distinct indices".into()));
    }
    let run = |idx: u64, t: usize| -> Result<Transcript> {
        let seeds = SessionSeeds::from_master(seed ^ (t as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ idx << 56);
        Ok(match protocol {
            Protocol::Qcpir => qcpir_run(db, idx, params, db.len(), TransportKind::InProcess, seeds)?.transcript,
            Protocol::PaillierQpir { p, q } => paillier_qpir_run(db, idx, params, (p, q), db.len(), TransportKind::InProcess, seeds)?.pir.transcript,
        })
    };
    let mut hist: [BTreeMap<String, BTreeMap<u64, usize>>; 2] = Default::default();
    let mut lengths = [Vec::new(), Vec::new()];
    let mut rounds = [Vec::new(), Vec::new()];
    for t in 0..trials {
        for (side, idx) in [i, j].into_iter().enumerate() {
            let tr = run(idx, t)?;
            lengths[side].push(tr.message_lengths());
            rounds[side].push(tr.rounds());
            for (name, v) in features(&tr)? {
                *hist[side].entry(name).or_default().entry(v).or_default() += 1;
            }
        }
    }
    let all_same = |v: &[Vec<Vec<usize>>; 2]| v.iter().flatten().all(|x| *x == v[0][0]);
    let lengths_equal = all_same(&lengths);
    let rounds_equal = rounds.iter().flatten().all(|&r| r == rounds[0][0]);
    let mut p_values = BTreeMap::new();
    for (name, a) in &hist[0] {
        let empty = BTreeMap::new();
        let b = hist[1].get(name).unwrap_or(&empty);
        p_values.insert(name.clone(), chi_square_homogeneity(a, b));
    }
    let min_p_value = p_values.values().copied().fold(1.0, f64::min);
    Ok(PrivacyReport { trials, lengths_equal, rounds_equal, min_p_value, p_values })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_square_detects_dependence() {
        let a: BTreeMap<u64, usize> = [(0, 500), (1, 500)].into();
        let b: BTreeMap<u64, usize> = [(0, 900), (1, 100)].into();
        assert!(chi_square_homogeneity(&a, &b) < 1e-6);
        assert!(chi_square_homogeneity(&a, &a) > 0.99);
    }

    #[test]
    fn qcpir_smoke() {
        let db = Database::new(vec![0, 1, 1, 0], 1).unwrap();
        let params = MheParams::new(32, 2, 4, 1e7).unwrap();
        let r = privacy_smoke_test(Protocol::Qcpir, &db, 0, 3, 100, params, 1).unwrap();
        assert!(r.lengths_equal && r.rounds_equal);
        assert!(r.min_p_value > 1e-4, "{:?}", r.p_values);
    }
}
