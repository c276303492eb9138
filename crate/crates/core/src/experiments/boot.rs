use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{scaled_plaintext, stream_rng, KeySetup, Report};
use crate::blindrot::rotated_phase;
use crate::bootstrap::{bootstrap, functional_bootstrap, BootstrapKeys, Strategy, TestFunction};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::lattice::lwe;

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapRow {
    pub run: usize,
    pub m: u64,
    pub input_error: i64,
    /// Readout the rotation should produce, from the phase oracle.
    pub expected_readout: u64,
    pub readout: u64,
    pub rotation_ok: bool,
    pub output: u64,
    pub output_error: i64,
    pub b_f: f64,
    pub within_bound: bool,
    pub correct: bool,
    pub first_term_dominant: bool,
    pub crot_calls: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapSummary {
    pub runs: usize,
    pub input_noise: i64,
    pub margin: f64,
    pub within_bound: usize,
    pub rotations_ok: usize,
    pub correct_when_ok: usize,
    pub pass: bool,
}

/// Bootstraps ciphertexts whose noise sits at `noise_fraction` of the
/// decryption margin and checks the refreshed noise against `B_f`.
pub fn run_bootstrap(cfg: &ExperimentConfig) -> Result<Report<BootstrapRow, BootstrapSummary>> {
    let params = cfg.lwe;
    let bp = cfg.boot;
    if bp.l_prime_bits != params.log_l {
        return Err(Error::Config("bootstrapping reads out l' = l bits; set boot.l_prime_bits = lwe.log_l".into()));
    }
    let setup = KeySetup::new(cfg)?;
    let keys = BootstrapKeys::generate(&setup.key, &params, &setup.msk, &setup.mpk, cfg.keyswitch, &mut stream_rng(cfg.seed, u64::MAX))?;
    let margin = params.decryption_margin();
    let noise = (cfg.noise_fraction * margin).floor() as i64;
    let rows: Vec<BootstrapRow> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = stream_rng(cfg.seed, 1 + run as u64);
            let mut auth = setup.authority(cfg.seed, run);
            let m = rng.gen_range(0..params.l());
            let e = if rng.gen() { noise } else { -noise };
            let ct = lwe::encrypt_with_error(&setup.key, m, e, &params, &mut rng)?;
            let phase = rotated_phase(&ct, &setup.key, &bp)?;
            let expected_readout = ((phase * bp.l_prime() as f64 + 0.5).floor() as u64) % bp.l_prime();
            let out = bootstrap(&ct, &keys, bp.n_star_bits, &mut auth, &mut rng)?;
            let readout = setup.unmask(out.c, &out.enc_d)?;
            let output = out.ct.decrypt(&setup.key)?;
            let output_error = out.ct.error_for(&setup.key, output)?;
            let rotation_ok = readout == expected_readout && expected_readout == scaled_plaintext(m, params.log_l, bp.l_prime_bits);
            Ok(BootstrapRow {
                run,
                m,
                input_error: e,
                expected_readout,
                readout,
                rotation_ok,
                output,
                output_error,
                b_f: out.report.b_f,
                within_bound: output_error.unsigned_abs() as f64 <= out.report.b_f,
                correct: output == m,
                first_term_dominant: out.report.first_term_dominant,
                crot_calls: out.crot_calls,
            })
        })
        .collect::<Result<_>>()?;
    let within_bound = rows.iter().filter(|r| r.within_bound).count();
    let ok: Vec<&BootstrapRow> = rows.iter().filter(|r| r.rotation_ok).collect();
    let correct_when_ok = ok.iter().filter(|r| r.correct).count();
    Ok(Report {
        summary: BootstrapSummary {
            runs: rows.len(),
            input_noise: noise,
            margin,
            within_bound,
            rotations_ok: ok.len(),
            correct_when_ok,
            pass: within_bound == rows.len() && correct_when_ok == ok.len(),
        },
        rows,
    })
}

/// The named test function of a config.
pub fn test_function(cfg: &ExperimentConfig) -> Result<TestFunction> {
    let (l, lt) = (cfg.lwe.log_l, cfg.log_l_tilde);
    Ok(match cfg.function.as_str() {
        "identity" => TestFunction::identity(l),
        "msb" => TestFunction::msb(l),
        "square" => TestFunction::square(l, lt),
        "random" => {
            let mut rng = stream_rng(cfg.seed, u64::MAX - 1);
            let table = (0..1u64 << l).map(|_| rng.gen_range(0..1u64 << lt)).collect();
            TestFunction::from_table(l, lt, table)?.with_minterm_circuit()
        }
        other => return Err(Error::Config(format!("unknown function `{other}`"))),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FbootRow {
    pub function: String,
    pub m: u64,
    pub expected: u64,
    pub qram: u64,
    pub computed: u64,
    pub correct: bool,
    pub agree: bool,
    pub qram_toffoli: usize,
    pub computed_toffoli: usize,
    pub crot_calls: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct FbootSummary {
    pub function: String,
    pub inputs: usize,
    pub correct: usize,
    pub agree: usize,
    pub guarantee: &'static str,
    pub pass: bool,
}

/// Every plaintext through both evaluation strategies.
pub fn run_fbootstrap(cfg: &ExperimentConfig) -> Result<Report<FbootRow, FbootSummary>> {
    let params = cfg.lwe;
    let setup = KeySetup::new(cfg)?;
    let tf = test_function(cfg)?;
    let out_key = setup.msk.lwe_key();
    let rows: Vec<FbootRow> = (0..params.l())
        .into_par_iter()
        .map(|m| {
            let mut rng = stream_rng(cfg.seed, 1 + m);
            let mut auth = setup.authority(cfg.seed, m as usize);
            let ct = lwe::encrypt(&setup.key, m, &params, &mut rng)?;
            let mut got = [0u64; 2];
            let mut toffoli = [0usize; 2];
            let mut crot_calls = 0;
            for (k, s) in [Strategy::Qram, Strategy::Computed].into_iter().enumerate() {
                let out = functional_bootstrap(&ct, &tf, &setup.enc_s, &cfg.boot, &mut auth, s, &mut rng)?;
                got[k] = out.ct.decrypt(&out_key)?;
                toffoli[k] = out.toffoli;
                crot_calls = out.crot_calls;
            }
            let expected = tf.eval(m);
            Ok(FbootRow {
                function: cfg.function.clone(),
                m,
                expected,
                qram: got[0],
                computed: got[1],
                correct: got[0] == expected && got[1] == expected,
                agree: got[0] == got[1],
                qram_toffoli: toffoli[0],
                computed_toffoli: toffoli[1],
                crot_calls,
            })
        })
        .collect::<Result<_>>()?;
    let correct = rows.iter().filter(|r| r.correct).count();
    let agree = rows.iter().filter(|r| r.agree).count();
    Ok(Report {
        summary: FbootSummary {
            function: cfg.function.clone(),
            inputs: rows.len(),
            correct,
            agree,
            guarantee: crate::blindrot::Guarantee::for_params(&params, &cfg.boot).tag(),
            pass: correct == rows.len() && agree == rows.len(),
        },
        rows,
    })
}
