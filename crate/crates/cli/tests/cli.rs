use std::path::Path;
use std::process::{Command, Output};

use qpart_cli::{parse_config, preset, Experiment, PRESETS};

fn qpart(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpart"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("spawn qpart")
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn every_preset_round_trips_through_json() {
    for (name, text) in PRESETS {
        let cfg = parse_config(text, name).unwrap();
        assert!(name.starts_with(cfg.experiment.kind()), "{name}");
        let again = parse_config(&serde_json::to_string(&cfg).unwrap(), name).unwrap();
        assert_eq!(cfg, again, "{name}");
    }
}

#[test]
fn preset_lookup_accepts_short_and_full_names() {
    assert_eq!(
        preset("vqe", "n8").unwrap(),
        preset("vqe", "vqe-n8").unwrap()
    );
    assert!(preset("vqe", "n5").is_err());
    assert!(preset("classify", "n8").is_err());
}

#[test]
fn optimizer_rejects_unknown_fields() {
    let text = r#"{"kind":"vqe","tfim":{"n":4,"j":1.0,"h":1.0},"subsystems":2,
        "generators":["Z1 Y2"],"optimizer":{"steps":3,"momentum":0.5}}"#;
    assert!(parse_config(text, "inline").is_err());
}

#[test]
fn vqe_outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("vqe.json");
    let text = r#"{"kind":"vqe","seed":5,"tfim":{"n":4,"j":1.0,"h":1.0},"subsystems":2,
        "generators":["Z2 Y3","Y2 Z3"],"optimizer":{"steps":12},"restarts":2}"#;
    std::fs::write(&cfg, text).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = cfg.to_str().unwrap();
    assert!(qpart(&["vqe", "--config", cfg, "--threads", "1"], &a)
        .status
        .success());
    assert!(qpart(&["vqe", "--config", cfg, "--threads", "2"], &b)
        .status
        .success());
    for name in ["energy_trace.csv", "summary.json"] {
        assert_eq!(read(&a, name), read(&b, name), "{name}");
    }
    let trace = read(&a, "energy_trace.csv");
    assert!(trace.starts_with("restart,seed,step,energy,grad_norm\n"));
    assert_eq!(trace.lines().count(), 1 + 2 * 13);
    let manifest: serde_json::Value = serde_json::from_str(&read(&a, "manifest.json")).unwrap();
    assert_eq!(manifest["seed"], 5);
    assert_eq!(manifest["threads"], 1);
}

#[test]
fn seed_flag_changes_vqe_trace() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let base = ["vqe", "--preset", "n4", "--threads", "1"];
    assert!(qpart(&[&base[..], &["--seed", "1"]].concat(), &a)
        .status
        .success());
    assert!(qpart(&[&base[..], &["--seed", "2"]].concat(), &b)
        .status
        .success());
    assert_ne!(read(&a, "energy_trace.csv"), read(&b, "energy_trace.csv"));
}

#[test]
fn conjugate_dump_and_haar_check_write_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dump");
    assert!(qpart(&["conjugate-dump", "--preset", "n8"], &out)
        .status
        .success());
    let obs: serde_json::Value = serde_json::from_str(&read(&out, "observable.json")).unwrap();
    assert!(obs.is_object());
    assert!(read(&out, "retained_factors.csv").starts_with("term,retained_factors\n"));

    let out = dir.path().join("haar");
    let args = [
        "haar-check",
        "--qubits",
        "2",
        "--depth",
        "3",
        "--samples",
        "300",
        "--seed",
        "4",
    ];
    assert!(qpart(&args, &out).status.success());
    let first = read(&out, "moments.csv");
    assert!(qpart(&args, &out).status.success());
    assert_eq!(first, read(&out, "moments.csv"));
}

#[test]
fn exit_codes_follow_error_category() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let missing = dir.path().join("missing.csv");
    let o = qpart(&["classify", "--dataset", missing.to_str().unwrap()], &out);
    assert_eq!(o.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(err["error"], "dataset");
    assert_eq!(err["exit_code"], 3);

    assert_eq!(
        qpart(&["vqe", "--preset", "nope"], &out).status.code(),
        Some(2)
    );
    assert_eq!(qpart(&["frobnicate"], &out).status.code(), Some(2));

    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"kind":"vqe","tfim":{"n":4,"j":1.0,"h":1.0},"subsystems":3,"generators":[]}"#,
    )
    .unwrap();
    assert_eq!(
        qpart(&["vqe", "--config", bad.to_str().unwrap()], &out)
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn config_kind_must_match_subcommand() {
    let cfg = preset("haar-check", "q2").unwrap();
    assert!(matches!(cfg.experiment, Experiment::HaarCheck(_)));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("h.json");
    std::fs::write(&path, serde_json::to_string(&cfg).unwrap()).unwrap();
    let o = qpart(
        &["vqe", "--config", path.to_str().unwrap()],
        &dir.path().join("o"),
    );
    assert_eq!(o.status.code(), Some(2));
}
