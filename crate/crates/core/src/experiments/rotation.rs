use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::{chi_square_gof, scaled_plaintext, stream_rng, three_sigma_floor, KeySetup, Report};
use crate::blindrot::{
    blind_rotate, compressed_bound, compressed_report, extended_bound, extended_bound_tight, outcome_distribution,
    prepare_blind_rotation, rotated_phase, BootstrapParams,
};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::lattice::lwe;
use crate::resources::{crot_cost_model, CrotCost};

#[derive(Debug, Clone, Serialize)]
pub struct RotationRow {
    pub run: usize,
    pub m: u64,
    pub readout: u64,
    pub expected: u64,
    pub success: bool,
    pub call_count: usize,
    pub one_bit_crots: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RotationSummary {
    pub runs: usize,
    pub successes: usize,
    pub rate: f64,
    pub bound: f64,
    pub bound_tight: f64,
    pub floor: f64,
    pub guarantee: &'static str,
    pub cost_model: CrotCost,
    pub model_matches_count: bool,
    pub pass: bool,
}

/// Single-shot blind rotations of fresh encryptions of random messages.
pub fn run_blindrot(cfg: &ExperimentConfig) -> Result<Report<RotationRow, RotationSummary>> {
    let setup = KeySetup::new(cfg)?;
    let (params, bp) = (cfg.lwe, cfg.boot);
    let rows: Vec<RotationRow> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = stream_rng(cfg.seed, 1 + run as u64);
            let mut auth = setup.authority(cfg.seed, run);
            let m = rng.gen_range(0..params.l());
            let ct = lwe::encrypt(&setup.key, m, &params, &mut rng)?;
            let out = blind_rotate(&ct, &setup.enc_s, &bp, &mut auth, &mut rng)?;
            let readout = setup.unmask(out.c, &out.enc_d1)?;
            let expected = scaled_plaintext(m, params.log_l, bp.l_prime_bits);
            Ok(RotationRow {
                run,
                m,
                readout,
                expected,
                success: readout == expected,
                call_count: out.call_count,
                one_bit_crots: out.one_bit_crots,
            })
        })
        .collect::<Result<_>>()?;
    let successes = rows.iter().filter(|r| r.success).count();
    let bound = extended_bound(&params, &bp);
    let floor = three_sigma_floor(bound, cfg.runs);
    let rate = successes as f64 / cfg.runs as f64;
    let cost_model = crot_cost_model(bp.l_prime_bits, params.n, bp.n_star_bits, 0, 128);
    let model_matches_count = rows.iter().all(|r| r.one_bit_crots as u64 == cost_model.rotation_total());
    Ok(Report {
        summary: RotationSummary {
            runs: cfg.runs,
            successes,
            rate,
            bound,
            bound_tight: extended_bound_tight(&params, &bp),
            floor,
            guarantee: crate::blindrot::Guarantee::for_params(&params, &bp).tag(),
            cost_model,
            model_matches_count,
            pass: rate >= floor,
        },
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CompressedRow {
    pub m: u64,
    pub expected: u64,
    pub hits: usize,
    pub shots: usize,
    pub frequency: f64,
    pub floor: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompressedSummary {
    pub messages: usize,
    pub shots: usize,
    pub bound: f64,
    pub min_frequency: f64,
    pub regime_applies: bool,
    pub n_star_ok: bool,
    pub noise_ok: bool,
    pub pass: bool,
}

/// Readout of `l' < l` bits: frequency of the nearest scaled plaintext over
/// repeated shots of one prepared rotation per message.
pub fn run_compressed(cfg: &ExperimentConfig) -> Result<Report<CompressedRow, CompressedSummary>> {
    let (params, bp) = (cfg.lwe, cfg.boot);
    if bp.l_prime_bits >= params.log_l {
        return Err(Error::Config(format!(
            "compressed readout needs boot.l_prime_bits < lwe.log_l (got {} and {})",
            bp.l_prime_bits, params.log_l
        )));
    }
    let setup = KeySetup::new(cfg)?;
    let mut pick = stream_rng(cfg.seed, 1);
    let ms: Vec<u64> = (0..cfg.messages).map(|_| pick.gen_range(0..params.l())).collect();
    let bound = compressed_bound();
    let floor = three_sigma_floor(bound, cfg.shots);
    let rows: Vec<CompressedRow> = ms
        .par_iter()
        .enumerate()
        .map(|(i, &m)| {
            let mut rng = stream_rng(cfg.seed, 2 + i as u64);
            let mut auth = setup.authority(cfg.seed, i);
            let ct = lwe::encrypt(&setup.key, m, &params, &mut rng)?;
            let prep = prepare_blind_rotation(&ct, &setup.enc_s, &bp, &mut auth)?;
            let d = setup.unmask(0, &prep.ms.x_keys(&prep.qubits))?;
            let expected = scaled_plaintext(m, params.log_l, bp.l_prime_bits);
            let hits = prep.sample(cfg.shots, &mut rng).into_iter().filter(|&c| c ^ d == expected).count();
            let frequency = hits as f64 / cfg.shots as f64;
            Ok(CompressedRow { m, expected, hits, shots: cfg.shots, frequency, floor, pass: frequency >= floor })
        })
        .collect::<Result<_>>()?;
    let rep = compressed_report(&params, &bp, cfg.threshold);
    Ok(Report {
        summary: CompressedSummary {
            messages: rows.len(),
            shots: cfg.shots,
            bound,
            min_frequency: rows.iter().map(|r| r.frequency).fold(1.0, f64::min),
            regime_applies: rep.applies(),
            n_star_ok: rep.n_star_ok,
            noise_ok: rep.noise_ok,
            pass: rows.iter().all(|r| r.pass),
        },
        rows,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DistributionRow {
    pub point: usize,
    pub l_prime_bits: u32,
    pub m: u64,
    pub phase: f64,
    /// Largest gap between the simulated register law and the closed form.
    pub max_abs_diff: f64,
    pub shots: usize,
    pub p_value: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct DistributionSummary {
    pub points: usize,
    pub min_p_value: f64,
    pub max_abs_diff: f64,
    pub pass: bool,
}

/// Sampled readouts against the closed-form outcome law, one chi-square
/// test per parameter point. Points alternate between `l'` and `l' − 1`.
pub fn run_distribution(cfg: &ExperimentConfig) -> Result<Report<DistributionRow, DistributionSummary>> {
    let params = cfg.lwe;
    let setup = KeySetup::new(cfg)?;
    let rows: Vec<DistributionRow> = (0..cfg.runs)
        .into_par_iter()
        .map(|point| {
            let mut rng = stream_rng(cfg.seed, 1 + point as u64);
            let lpb = if point % 2 == 0 { cfg.boot.l_prime_bits } else { cfg.boot.l_prime_bits.saturating_sub(1).max(1) };
            let bp = BootstrapParams::new(cfg.boot.n_star_bits, lpb)?;
            let mut auth = setup.authority(cfg.seed, point);
            let m = rng.gen_range(0..params.l());
            let ct = lwe::encrypt(&setup.key, m, &params, &mut rng)?;
            let phase = rotated_phase(&ct, &setup.key, &bp)?;
            let probs = outcome_distribution(phase, bp.l_prime());
            let prep = prepare_blind_rotation(&ct, &setup.enc_s, &bp, &mut auth)?;
            let d = setup.unmask(0, &prep.ms.x_keys(&prep.qubits))?;
            let exact = prep.ms.state.register_distribution(&prep.qubits);
            let max_abs_diff = probs
                .iter()
                .enumerate()
                .map(|(k, p)| (exact.get(&(k as u64 ^ d)).copied().unwrap_or(0.0) - p).abs())
                .fold(0.0, f64::max);
            let mut counts = vec![0usize; bp.l_prime() as usize];
            for c in prep.sample(cfg.shots, &mut rng) {
                counts[(c ^ d) as usize] += 1;
            }
            let p_value = chi_square_gof(&counts, &probs);
            Ok(DistributionRow {
                point,
                l_prime_bits: lpb,
                m,
                phase,
                max_abs_diff,
                shots: cfg.shots,
                p_value,
                pass: p_value > 0.01,
            })
        })
        .collect::<Result<_>>()?;
    Ok(Report {
        summary: DistributionSummary {
            points: rows.len(),
            min_p_value: rows.iter().map(|r| r.p_value).fold(1.0, f64::min),
            max_abs_diff: rows.iter().map(|r| r.max_abs_diff).fold(0.0, f64::max),
            pass: rows.iter().all(|r| r.pass),
        },
        rows,
    })
}
