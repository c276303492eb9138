use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{stream_rng, Report};
use crate::config::{ExperimentConfig, PirProtocol};
use crate::error::Result;
use crate::paillier::PaillierKeys;
use crate::pir::{audit_is_blind, paillier_qpir_run, qcpir_run, Database, Party, PirOutcome, SessionSeeds};
use crate::qfhe::{gadget_marginal_independent, paillier_encrypted_cnot, pauli_masks};
use crate::qsim::{standalone_qram, Gate, QuantumState, RegisterLayout};

#[derive(Debug, Clone, Serialize)]
pub struct PirRow {
    pub index: u64,
    pub expected: u64,
    pub word: u64,
    pub correct: bool,
    pub rounds: usize,
    pub toffoli: usize,
    pub depth: usize,
    pub qubits: usize,
    pub conversions: usize,
    pub client_bytes: usize,
    pub server_bytes: usize,
    pub blind: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PirSummary {
    pub protocol: &'static str,
    pub db_size: usize,
    pub word_bits: usize,
    pub qram_m: usize,
    pub correct: usize,
    pub rounds: Vec<usize>,
    pub rounds_match_toffoli: bool,
    pub rounds_index_independent: bool,
    pub blind: bool,
    pub conversion_nand_cost: u64,
    pub pass: bool,
}

fn row(i: u64, expected: u64, out: &PirOutcome) -> PirRow {
    let bytes = |p: Party| out.transcript.entries.iter().filter(|e| e.sender == p).map(|e| e.payload.len()).sum();
    PirRow {
        index: i,
        expected,
        word: out.word,
        correct: out.word == expected,
        rounds: out.transcript.rounds(),
        toffoli: out.stats.toffoli,
        depth: out.stats.depth,
        qubits: out.stats.qubits,
        conversions: out.transcript.count("ConversionRequest"),
        client_bytes: bytes(Party::Client),
        server_bytes: bytes(Party::Server),
        blind: audit_is_blind(&out.audit),
    }
}

/// Retrieves every index of a random database.
pub fn run_pir(cfg: &ExperimentConfig) -> Result<Report<PirRow, PirSummary>> {
    let db = Database::random(cfg.db_size, cfg.word_bits, &mut stream_rng(cfg.seed, 0))?;
    run_pir_on(cfg, &db)
}

/// Seeds of the session retrieving index `i` in a sweep.
pub fn session_seeds(cfg: &ExperimentConfig, i: u64) -> SessionSeeds {
    SessionSeeds::from_master(cfg.seed.wrapping_add(i.wrapping_mul(0x2545_f491_4f6c_dd1d)))
}

/// One session of the configured protocol; returns the outcome and the
/// per-conversion NAND estimate (0 for QCPIR).
pub fn pir_session(cfg: &ExperimentConfig, db: &Database, i: u64, seeds: SessionSeeds) -> Result<(PirOutcome, u64)> {
    let params = cfg.mhe()?;
    let m = cfg.qram_budget().min(db.len());
    match cfg.protocol {
        PirProtocol::Qcpir => Ok((qcpir_run(db, i, params, m, cfg.transport, seeds)?, 0)),
        PirProtocol::Paillier => {
            let out = paillier_qpir_run(db, i, params, cfg.paillier, m, cfg.transport, seeds)?;
            Ok((out.pir, out.conversion_nand_cost))
        }
    }
}

pub fn run_pir_on(cfg: &ExperimentConfig, db: &Database) -> Result<Report<PirRow, PirSummary>> {
    let m = cfg.qram_budget().min(db.len());
    let results: Vec<(PirRow, u64)> = (0..db.len() as u64)
        .into_par_iter()
        .map(|i| {
            let (out, nand) = pir_session(cfg, db, i, session_seeds(cfg, i))?;
            Ok((row(i, db.get(i)?, &out), nand))
        })
        .collect::<Result<_>>()?;
    let nand = results.iter().map(|r| r.1).max().unwrap_or(0);
    let rows: Vec<PirRow> = results.into_iter().map(|r| r.0).collect();
    let mut rounds: Vec<usize> = rows.iter().map(|r| r.rounds).collect();
    rounds.sort_unstable();
    rounds.dedup();
    let correct = rows.iter().filter(|r| r.correct).count();
    let blind = rows.iter().all(|r| r.blind);
    let rounds_match_toffoli = rows.iter().all(|r| r.rounds == r.toffoli.max(1));
    let rounds_index_independent = rounds.len() == 1;
    let protocol_ok = match cfg.protocol {
        PirProtocol::Qcpir => rounds == [1],
        PirProtocol::Paillier => rounds_match_toffoli && rounds_index_independent,
    };
    Ok(Report {
        summary: PirSummary {
            protocol: match cfg.protocol {
                PirProtocol::Qcpir => "qcpir",
                PirProtocol::Paillier => "paillier",
            },
            db_size: db.len(),
            word_bits: db.word_bits(),
            qram_m: m,
            correct,
            rounds,
            rounds_match_toffoli,
            rounds_index_independent,
            blind,
            conversion_nand_cost: nand,
            pass: correct == rows.len() && blind && protocol_ok,
        },
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PaillierCnotRow {
    pub s0: u64,
    pub trial: usize,
    pub fidelity: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct PaillierCnotSummary {
    pub modulus: u64,
    pub trials: usize,
    pub min_fidelity: f64,
    pub marginal_independent: bool,
    pub pass: bool,
}

/// A random normalized two-qubit state.
pub fn random_two_qubit_state<R: Rng + ?Sized>(rng: &mut R) -> Result<QuantumState> {
    let mut layout = RegisterLayout::new();
    layout.push("c", 2)?;
    layout.push("t", 2)?;
    let amps: Vec<_> = (0..4u32).map(|k| (vec![k & 1, k >> 1], Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))).collect();
    QuantumState::from_amplitudes(layout, amps)
}

/// Paillier encrypted CNOT on random states for both control bits, plus
/// the exact `G`-marginal check over every `(s₀, r₀)`.
pub fn run_paillier_cnot(cfg: &ExperimentConfig) -> Result<Report<PaillierCnotRow, PaillierCnotSummary>> {
    let (p, q) = cfg.paillier;
    let keys = PaillierKeys::generate(p, q)?;
    let mut rows = Vec::new();
    for s0 in 0..2u64 {
        let mut rng = stream_rng(cfg.seed, s0);
        for trial in 0..cfg.runs {
            let psi = random_two_qubit_state(&mut rng)?;
            let cs = keys.pk.encrypt_random(s0, &mut rng)?;
            let mut s = psi.clone();
            let out = paillier_encrypted_cnot(&keys.pk, &cs, &mut s, 0, 1, &mut rng)?;
            let (z, x) = pauli_masks(&keys, &cs, &out)?;
            if x == 1 {
                Gate::X(1).apply(&mut s)?;
            }
            if z == 1 {
                Gate::Z(0).apply(&mut s)?;
            }
            let mut want = psi;
            if s0 == 1 {
                Gate::Cnot(0, 1).apply(&mut want)?;
            }
            let fidelity = s.fidelity(&want)?;
            rows.push(PaillierCnotRow { s0, trial, fidelity, pass: fidelity >= 1.0 - 1e-9 });
        }
    }
    let mut marginal_independent = true;
    for s0 in 0..2u64 {
        for r0 in keys.pk.units() {
            marginal_independent &= gadget_marginal_independent(&keys.pk, &keys.pk.encrypt_u64(s0, r0)?)?;
        }
    }
    Ok(Report {
        summary: PaillierCnotSummary {
            modulus: p * q,
            trials: rows.len(),
            min_fidelity: rows.iter().map(|r| r.fidelity).fold(1.0, f64::min),
            marginal_independent,
            pass: marginal_independent && rows.iter().all(|r| r.pass),
        },
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct QramAuditRow {
    pub db_size: usize,
    pub qram_m: usize,
    pub word_bits: usize,
    pub toffoli: usize,
    pub depth: usize,
    pub qubits: usize,
    /// Circuit acts as `|i⟩|y⟩ → |i⟩|y ⊕ DB_i⟩` with clean ancillas on every basis input.
    pub equivalent: bool,
}

/// QRAM circuit against the direct table for every `N ≤ pir.n` and every
/// power-of-two memory budget. The circuit is a permutation, so checking
/// all basis inputs checks the operator.
pub fn run_qram_audit(cfg: &ExperimentConfig) -> Result<Vec<QramAuditRow>> {
    let mut rows = Vec::new();
    let mut rng = stream_rng(cfg.seed, 0);
    let w = cfg.word_bits;
    let mut n = 1;
    while n <= cfg.db_size {
        let db = Database::random(n, w, &mut rng)?;
        let mut m = 1;
        while m <= n {
            let q = standalone_qram(db.entries(), w, m)?;
            let l = q.index.len();
            let total = l + w + q.ancillas.len();
            let mut equivalent = true;
            for i in 0..n as u64 {
                for y in 0..1u64 << w {
                    let mut s = QuantumState::qubits(total);
                    s.permute(|k| {
                        QuantumState::set_register(k, &q.index, i);
                        QuantumState::set_register(k, &q.output, y);
                    });
                    q.circuit.apply(&mut s)?;
                    let (k, _) = s.amplitudes().iter().next().expect("basis state");
                    equivalent &= QuantumState::register_value(k, &q.index) == i
                        && QuantumState::register_value(k, &q.output) == y ^ db.entries()[i as usize]
                        && q.ancillas.iter().all(|&a| k[a] == 0);
                }
            }
            rows.push(QramAuditRow {
                db_size: n,
                qram_m: m,
                word_bits: w,
                toffoli: q.circuit.count("TOFFOLI") + q.circuit.count("CSWAP"),
                depth: q.circuit.depth(),
                qubits: total,
                equivalent,
            });
            m *= 2;
        }
        n *= 2;
    }
    Ok(rows)
}
