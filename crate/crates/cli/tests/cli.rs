use std::path::Path;
use std::process::{Command, Output};

fn polyrl(args: &[&str], cwd: &Path) -> Output {
    let out = Command::new(env!("CARGO_BIN_EXE_polyrl"))
        .args(args)
        .current_dir(cwd)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

#[test]
fn pretrain_finetune_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    polyrl(&["pretrain", "--generate", "2", "--suite", "s.txt", "--demos", "4", "--horizon", "40", "--epochs", "2",
        "--capacity", "2000", "--out", "p.ckpt"], d);
    let desc = String::from_utf8(polyrl(&["describe", "p.ckpt"], d).stdout).unwrap();
    assert!(desc.contains("parameters: 14000"), "{desc}");

    fs_write(d, "c.toml", "method = \"ppo\"\niterations = 5\n");
    polyrl(&["finetune", "--suite", "s.txt", "--policy", "p.ckpt", "--config", "c.toml", "--out", "run",
        "--iterations", "2", "--kl-coef", "0.05", "--ucb-reset", "per_iteration"], d);
    let saved = std::fs::read_to_string(d.join("run/config.toml")).unwrap();
    assert!(saved.contains("method = \"ppo\""));
    assert!(saved.contains("iterations = 2"));
    assert!(saved.contains("kl_coef = 0.05"));
    assert!(saved.contains("ucb_reset = \"per_iteration\""));
    assert_eq!(std::fs::read_to_string(d.join("run/metrics.jsonl")).unwrap().lines().count(), 2);

    polyrl(&["eval", "--suite", "s.txt", "--checkpoint", "run/policy.ckpt", "--rollouts", "8", "--k", "1,2,8",
        "--out", "e.jsonl"], d);
    let csv = std::fs::read_to_string(d.join("e.csv")).unwrap();
    let ks: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(3).unwrap()).collect();
    assert_eq!(ks, ["1", "2", "8"]);

    polyrl(&["plotdata", "--train", "run/metrics.jsonl", "--eval", "e.jsonl", "--out", "curves.csv"], d);
    let curves = std::fs::read_to_string(d.join("curves.csv")).unwrap();
    assert!(curves.starts_with("source,metric,x,value\n"));
    assert!(curves.contains(",success_rate,1,"));
}

#[test]
fn triangle_pretraining_records_seen_triangles() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    polyrl(&["pretrain", "--env", "triangle", "--generate", "1", "--nodes", "12", "--density", "0.5", "--suite",
        "g.txt", "--demos", "30", "--epochs", "1", "--out", "p.ckpt"], d);
    assert!(std::fs::read_to_string(d.join("g.txt")).unwrap().contains("seen:"));
    let out = polyrl(&["eval", "--env", "triangle", "--suite", "g.txt", "--checkpoint", "p.ckpt", "--rollouts", "8",
        "--k", "1,8", "--out", "e.jsonl"], d);
    let rec: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(rec["creativity"]["validity"].as_f64().unwrap() >= rec["creativity"]["creativity"].as_f64().unwrap());
}

#[test]
fn rejects_unknown_override_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_polyrl"))
        .args(["finetune", "--suite", "x", "--policy", "y", "--out", "z", "--method", "bogus"])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn theory_reports_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let out = polyrl(&["theory", "--json"], dir.path());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let names: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names.len(), 6);
    assert!(names.contains(&"perf-diff"));
}

fn fs_write(d: &Path, name: &str, text: &str) {
    std::fs::write(d.join(name), text).unwrap();
}
