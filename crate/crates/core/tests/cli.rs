use std::path::Path;
use std::process::Command;

use lace_core::sim::NoiseConfig;
use lace_core::ProbDist;

fn lace(dir: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lace")).current_dir(dir).env("LACE_THREADS", "2").args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) {
    let out = lace(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// Small end-to-end pipeline on a 2×3 patch.
fn pipeline(dir: &Path) {
    let truth = ProbDist::product(&[0.02, 0.03, 0.01, 0.04, 0.02, 0.05]).unwrap();
    std::fs::write(dir.join("noise.json"), NoiseConfig::effective(truth).to_json().unwrap()).unwrap();
    ok(dir, &["plan", "--m-grid", "0,1,2,4", "--per-m", "4", "--shots", "300", "--seed", "17", "--out", "plan.json"]);
    ok(dir, &["simulate", "--config", "noise.json", "--plan", "plan.json", "--layout", "2x3", "--out", "shots.bin"]);
    ok(
        dir,
        &["estimate", "shots.bin", "--layout", "2x3", "--bootstrap", "100", "--seed", "3", "--out", "channel.json"],
    );
    ok(dir, &["fit-model", "channel.json", "--kind", "ising", "--out", "ising.json"]);
    ok(dir, &["metrics", "channel.json", "--out", "metrics.csv"]);
    ok(dir, &["extrapolate", "channel.json", "--t", "1,0.5", "--out", "family.json"]);
    ok(
        dir,
        &[
            "decode",
            "--family",
            "family.json",
            "--models",
            "iid,full",
            "--samples",
            "200",
            "--repeats",
            "2",
            "--seed",
            "5",
            "--decoder",
            "table",
            "--out",
            "rates.csv",
        ],
    );
}

#[test]
fn pipeline_outputs_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path());
    pipeline(b.path());
    let mut compared = 0;
    for entry in std::fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        let name = name.to_string_lossy();
        if name.ends_with(".manifest.json") {
            continue;
        }
        let (x, y) = (std::fs::read(a.path().join(&*name)).unwrap(), std::fs::read(b.path().join(&*name)).unwrap());
        assert!(x == y, "{name} differs between runs");
        compared += 1;
    }
    assert!(compared >= 10, "only {compared} outputs");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("shots.bin.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["master_seed"], 17);
    assert_eq!(manifest["command"], "simulate");
}

#[test]
fn exit_codes_follow_error_categories() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| lace(dir.path(), args).status.code();
    assert_eq!(code(&["plan", "--bogus"]), Some(2));
    assert_eq!(code(&["plan", "--out", "plan.json"]), Some(3));
    assert_eq!(code(&["estimate", "missing.bin", "--out", "c.json"]), Some(4));
    std::fs::write(dir.path().join("garbage.bin"), b"not an archive").unwrap();
    assert_eq!(code(&["estimate", "garbage.bin", "--out", "c.json"]), Some(4));
    assert_eq!(code(&["plan", "--seed", "1", "--out", "plan.json"]), Some(0));
}
