use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use qboots::config::ExperimentConfig;
use qboots::experiments::{self as ex, Report};
use qboots::pir::{Database, SessionSeeds, Transcript};
use qboots::qsim::standalone_qram;
use qboots::resources::{crot_cost_model, resource_count, Scheme};

#[derive(Parser)]
#[command(name = "qboots", version, about = "Quantum blind rotation, bootstrapping and PIR experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Config file, or the name of a built-in preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (QBOOTS_OUT takes precedence).
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RotationMode {
    /// `compressed` when l' < l, otherwise `rotation`.
    Auto,
    Rotation,
    Compressed,
    Distribution,
}

#[derive(Subcommand)]
enum Cmd {
    /// Blind rotation success rates and outcome statistics.
    Blindrot {
        #[arg(long, value_enum, default_value = "auto")]
        mode: RotationMode,
    },
    /// Noise-refreshing bootstrapping.
    Bootstrap,
    /// Functional bootstrapping over every plaintext, both strategies.
    Fbootstrap,
    /// PIR sweep over every index, or one session with `--index`.
    Pir {
        #[arg(long)]
        index: Option<u64>,
        /// Database file; a random one is generated from the seed otherwise.
        #[arg(long)]
        db: Option<PathBuf>,
        /// Re-runs a recorded transcript under its seeds and compares payloads.
        #[arg(long, requires = "index")]
        replay: Option<PathBuf>,
    },
    /// Paillier encrypted CNOT fidelity and marginal checks.
    PaillierCnot,
    /// Qubit counts and the CROT cost model.
    Resources {
        /// `lwe-cnot:n=..,logq=..` or `paillier-cnot:N=..`; repeatable.
        #[arg(long)]
        scheme: Vec<Scheme>,
    },
    /// QRAM circuits against the direct table, with a circuit dump.
    QramAudit,
}

impl Cmd {
    fn name(&self) -> &'static str {
        match self {
            Cmd::Blindrot { .. } => "blindrot",
            Cmd::Bootstrap => "bootstrap",
            Cmd::Fbootstrap => "fbootstrap",
            Cmd::Pir { .. } => "pir",
            Cmd::PaillierCnot => "paillier-cnot",
            Cmd::Resources { .. } => "resources",
            Cmd::QramAudit => "qram-audit",
        }
    }

    fn default_preset(&self) -> &'static str {
        match self {
            Cmd::Blindrot { mode: RotationMode::Compressed } => "compressed-readout",
            Cmd::Blindrot { mode: RotationMode::Distribution } => "distribution",
            Cmd::Blindrot { .. } | Cmd::Resources { .. } => "toy-rotation",
            Cmd::Bootstrap => "bootstrap-toy",
            Cmd::Fbootstrap => "fbootstrap-toy",
            Cmd::Pir { .. } | Cmd::QramAudit => "pir-toy",
            Cmd::PaillierCnot => "paillier-cnot-toy",
        }
    }
}

fn load_config(common: &Common, cmd: &Cmd) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::preset(cmd.default_preset())?,
    };
    for kv in &common.sets {
        let (k, v) = kv.split_once('=').with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
        cfg = cfg.with(k.trim(), v.trim())?;
    }
    if let Some(s) = common.seed {
        cfg = cfg.with("seed", &s.to_string())?;
    }
    Ok(cfg)
}

struct Output {
    dir: PathBuf,
    name: &'static str,
}

impl Output {
    fn new(out: &Path, name: &'static str) -> Result<Self> {
        let dir = std::env::var_os("QBOOTS_OUT").map(PathBuf::from).unwrap_or_else(|| out.to_path_buf());
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Output { dir, name })
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.name))
    }

    fn csv<R: Serialize>(&self, suffix: &str, rows: &[R]) -> Result<()> {
        let path = self.path(suffix);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    fn json(&self, v: &Value) -> Result<()> {
        fs::write(self.path(".json"), serde_json::to_string_pretty(v)? + "\n")?;
        Ok(())
    }

    /// Rows to CSV, summary and resolved config to JSON; returns the pass flag.
    fn report<R: Serialize, S: Serialize>(&self, cfg: &ExperimentConfig, r: &Report<R, S>) -> Result<bool> {
        self.csv(".csv", &r.rows)?;
        let summary = serde_json::to_value(&r.summary)?;
        let pass = summary.get("pass").and_then(Value::as_bool).unwrap_or(true);
        self.json(&json!({ "command": self.name, "config": cfg.resolved, "summary": summary }))?;
        println!("{}", serde_json::to_string_pretty(&summary)?);
        Ok(pass)
    }
}

fn database(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<Database> {
    Ok(match path {
        Some(p) => Database::load(p)?,
        None => Database::random(cfg.db_size, cfg.word_bits, &mut ex::stream_rng(cfg.seed, 0))?,
    })
}

fn run(cli: Cli) -> Result<bool> {
    let cfg = load_config(&cli.common, &cli.cmd)?;
    let out = Output::new(&cli.common.out, cli.cmd.name())?;
    match &cli.cmd {
        Cmd::Blindrot { mode } => {
            let compressed = cfg.boot.l_prime_bits < cfg.lwe.log_l;
            match mode {
                RotationMode::Rotation => out.report(&cfg, &ex::run_blindrot(&cfg)?),
                RotationMode::Auto if !compressed => out.report(&cfg, &ex::run_blindrot(&cfg)?),
                RotationMode::Auto | RotationMode::Compressed => out.report(&cfg, &ex::run_compressed(&cfg)?),
                RotationMode::Distribution => out.report(&cfg, &ex::run_distribution(&cfg)?),
            }
        }
        Cmd::Bootstrap => out.report(&cfg, &ex::run_bootstrap(&cfg)?),
        Cmd::Fbootstrap => out.report(&cfg, &ex::run_fbootstrap(&cfg)?),
        Cmd::PaillierCnot => out.report(&cfg, &ex::run_paillier_cnot(&cfg)?),
        Cmd::Pir { index: None, db, .. } => {
            let db = database(&cfg, db.as_deref())?;
            out.report(&cfg, &ex::run_pir_on(&cfg, &db)?)
        }
        Cmd::Pir { index: Some(i), db, replay } => {
            let db = database(&cfg, db.as_deref())?;
            let recorded = match replay {
                Some(p) => Some(fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?),
                None => None,
            };
            let seeds = match &recorded {
                Some(text) => SessionSeeds::from_map(&Transcript::from_jsonl(text)?.seeds)?,
                None => ex::session_seeds(&cfg, *i),
            };
            let (o, nand) = ex::pir_session(&cfg, &db, *i, seeds)?;
            let jsonl = o.transcript.to_jsonl();
            let replay_match = recorded.map(|text| text == jsonl);
            fs::write(out.path("_transcript.jsonl"), &jsonl)?;
            fs::write(out.path("_audit.log"), o.audit.iter().map(|e| e.to_string() + "\n").collect::<String>())?;
            let correct = o.word == db.get(*i)?;
            let summary = json!({
                "index": i,
                "word": o.word,
                "correct": correct,
                "rounds": o.transcript.rounds(),
                "messages": o.transcript.entries.len(),
                "toffoli": o.stats.toffoli,
                "depth": o.stats.depth,
                "qubits": o.stats.qubits,
                "blind": qboots::pir::audit_is_blind(&o.audit),
                "conversion_nand_cost": nand,
                "replay_match": replay_match,
                "pass": correct && replay_match != Some(false),
            });
            out.json(&json!({ "command": "pir", "config": cfg.resolved, "summary": summary }))?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(summary["pass"].as_bool().unwrap_or(false))
        }
        Cmd::Resources { scheme } => {
            let schemes = if scheme.is_empty() {
                vec![Scheme::LweCnot { n: 1024, log_q: 31 }, Scheme::PaillierCnot { n_bits: 4096 }, Scheme::PaillierCnot { n_bits: 3072 }]
            } else {
                scheme.clone()
            };
            #[derive(Serialize)]
            struct Row {
                scheme: String,
                qubits: String,
            }
            let rows: Vec<Row> = schemes.iter().map(|s| Row { scheme: s.to_string(), qubits: resource_count(*s).to_string() }).collect();
            out.csv(".csv", &rows)?;
            let cost = crot_cost_model(cfg.boot.l_prime_bits, cfg.lwe.n, cfg.boot.n_star_bits, cfg.log_l_tilde, 128);
            let summary = json!({
                "qubits": rows.iter().map(|r| json!({ "scheme": r.scheme, "qubits": r.qubits })).collect::<Vec<_>>(),
                "crot_cost_model": cost,
                "crot_total": cost.total(),
            });
            out.json(&json!({ "command": "resources", "config": cfg.resolved, "summary": summary }))?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(true)
        }
        Cmd::QramAudit => {
            let rows = ex::run_qram_audit(&cfg)?;
            out.csv(".csv", &rows)?;
            let db = database(&cfg, None)?;
            let q = standalone_qram(db.entries(), cfg.word_bits, cfg.qram_budget())?;
            fs::write(out.path("_circuit.txt"), q.circuit.dump())?;
            let pass = rows.iter().all(|r| r.equivalent);
            let summary = json!({ "configurations": rows.len(), "all_equivalent": pass, "pass": pass });
            out.json(&json!({ "command": "qram-audit", "config": cfg.resolved, "summary": summary }))?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(pass)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("qboots: invariant check failed (see summary)");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("qboots: {e:#}");
            ExitCode::from(2)
        }
    }
}
