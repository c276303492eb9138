use std::path::Path;
use std::process::{Command, Output};

fn qboots(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qboots"))
        .env_remove("QBOOTS_OUT")
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("spawn qboots")
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

#[test]
fn same_seed_gives_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["blindrot", "--seed", "7", "--set", "runs=40"];
    assert!(qboots(a.path(), &args).status.success());
    assert!(qboots(b.path(), &args).status.success());
    for f in ["blindrot.csv", "blindrot.json"] {
        assert_eq!(read(a.path().join(f)), read(b.path().join(f)), "{f}");
    }
    let c = tempfile::tempdir().unwrap();
    assert!(qboots(c.path(), &["blindrot", "--seed", "8", "--set", "runs=40"]).status.success());
    assert_ne!(read(a.path().join("blindrot.csv")), read(c.path().join("blindrot.csv")));
}

#[test]
fn env_var_overrides_out_flag() {
    let (flag, env) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let st = Command::new(env!("CARGO_BIN_EXE_qboots"))
        .env("QBOOTS_OUT", env.path())
        .arg("--out")
        .arg(flag.path())
        .arg("resources")
        .status()
        .unwrap();
    assert!(st.success());
    assert!(env.path().join("resources.csv").exists());
    assert!(!flag.path().join("resources.csv").exists());
}

#[test]
fn resources_rows() {
    let d = tempfile::tempdir().unwrap();
    let o = qboots(d.path(), &["resources", "--scheme", "lwe-cnot:n=1024,logq=31", "--scheme", "paillier-cnot:N=4096"]);
    assert!(o.status.success());
    let csv = read(d.path().join("resources.csv"));
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "scheme,qubits");
    // n·lq + (n + n·lq + 1)·lq
    let lwe = 1024 * 31 + (1024 + 1024 * 31 + 1) * 31;
    assert_eq!(lines[1], format!("\"lwe-cnot:n=1024,logq=31\",{lwe}"));
    assert_eq!(lines[2], "paillier-cnot:N=4096,12288");
}

#[test]
fn pir_replay_matches_recording() {
    let d = tempfile::tempdir().unwrap();
    let base = ["pir", "--index", "5", "--set", "pir.n=8", "--set", "pir.word_bits=3"];
    let o = qboots(d.path(), &base);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = d.path().join("recorded.jsonl");
    std::fs::rename(d.path().join("pir_transcript.jsonl"), &rec).unwrap();

    let mut args = base.to_vec();
    let rec_s = rec.to_str().unwrap();
    args.extend(["--replay", rec_s]);
    let o = qboots(d.path(), &args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&read(d.path().join("pir.json"))).unwrap();
    assert_eq!(v["summary"]["replay_match"], true);
    assert_eq!(v["summary"]["rounds"], 1);
    assert_eq!(v["summary"]["blind"], true);
    assert!(d.path().join("pir_audit.log").exists());
}

#[test]
fn bad_config_exits_2() {
    let d = tempfile::tempdir().unwrap();
    let o = qboots(d.path(), &["blindrot", "--set", "lwe.log_q=oops"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qboots(d.path(), &["blindrot", "--config", "no-such-preset"]);
    assert_eq!(o.status.code(), Some(2));
    let o = qboots(d.path(), &["paillier-cnot", "--set", "paillier.q=7"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn qram_audit_dumps_circuit() {
    let d = tempfile::tempdir().unwrap();
    let o = qboots(d.path(), &["qram-audit", "--set", "pir.n=4", "--set", "pir.word_bits=2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!read(d.path().join("qram-audit_circuit.txt")).is_empty());
    assert!(read(d.path().join("qram-audit.csv")).lines().count() > 1);
}
