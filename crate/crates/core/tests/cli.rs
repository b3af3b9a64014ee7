//! End-to-end checks of the installed binary: exit codes, file layout,
//! header stamps, and the seed override.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::tempdir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aixilab"))
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

const PREDICT_CFG: &str = r#"
version = 1

[environment]
kind = "bernoulli"
p = 0.7

[model_class]
kind = "bernoulli-grid"
grid = [0.4, 0.7]

[loss]
matrix = [[0.0, 1.0], [1.0, 0.0]]

[planner]
cycles = 8

[experiment]
kind = "convergence"
cycles = 20
"#;

#[test]
fn validate_accepts_a_full_config() {
    let dir = tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "full.toml", PREDICT_CFG);
    let out = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("environment ok"), "{text}");
    assert!(text.contains("model class ok: 2 members"), "{text}");
    assert!(text.contains("valid (5 sections)"), "{text}");
}

#[test]
fn validate_accepts_every_shipped_config() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(configs).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let out = bin().args(["validate", "--config"]).arg(&path).output().unwrap();
        assert_eq!(
            out.status.code(),
            Some(0),
            "{} rejected: {}",
            path.display(),
            stderr(&out)
        );
        seen += 1;
    }
    assert!(seen >= 7, "expected the shipped configs, found {seen}");
}

#[test]
fn validate_rejects_unknown_keys() {
    let dir = tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "bad.toml",
        "version = 1\n[environment]\nkind = \"bernoulli\"\np = 0.7\nbogus = 1\n",
    );
    let out = bin().args(["validate", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("error"), "{}", stderr(&out));
}

#[test]
fn plan_writes_a_stamped_audit() {
    let dir = tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "plan.toml", PREDICT_CFG);
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["plan", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("chosen action"), "{}", stdout(&out));
    let audit = std::fs::read_to_string(out_dir.join("plan_audit.csv")).unwrap();
    let header = audit.lines().next().unwrap();
    assert!(header.starts_with("# aixilab v"), "{header}");
    assert!(header.contains("config_sha256="), "{header}");
    assert!(audit.lines().nth(1).unwrap().starts_with("action,value,chosen"));
}

#[test]
fn plan_refuses_a_deep_fixed_horizon() {
    let dir = tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "deep.toml",
        r#"
version = 1

[environment]
kind = "bernoulli"
p = 0.7

[loss]
matrix = [[0.0, 1.0], [1.0, 0.0]]

[planner]
cycles = 40
"#,
    );
    let out = bin()
        .args(["plan", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("planning budget exhausted"), "{}", stderr(&out));
}

#[test]
fn predict_writes_one_ledger_per_seed_with_weights() {
    let dir = tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "predict.toml", PREDICT_CFG);
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["predict", "--config"])
        .arg(&cfg)
        .args(["--seed", "3,4"])
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    for seed in [3, 4] {
        let body =
            std::fs::read_to_string(out_dir.join(format!("predict_seed_{seed:04}.csv"))).unwrap();
        let mut lines = body.lines();
        assert!(lines.next().unwrap().starts_with("# aixilab v"));
        assert_eq!(
            lines.next().unwrap(),
            "cycle,action,percept,incurred_loss,cumulative_loss,w_0,w_1"
        );
        assert_eq!(lines.count(), 20);
    }
}

#[test]
fn experiment_exits_zero_when_all_verdicts_pass() {
    let dir = tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "greedy.toml",
        "version = 1\n[experiment]\nkind = \"greedy-check\"\ncycles = 3\n",
    );
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["experiment", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("PASS greedy-reduction-holds"), "{}", stdout(&out));
    assert!(out_dir.join("greedy_check_verdicts.csv").exists());
}

#[test]
fn experiment_exits_nonzero_when_a_verdict_fails() {
    // a single-member class pins the loss ratio at exactly 1, so the
    // strict-decrease verdict must fail while the ceiling verdict holds
    let dir = tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "degenerate.toml",
        r#"
version = 1

[environment]
kind = "bernoulli"
p = 0.7

[model_class]
kind = "bernoulli-grid"
grid = [0.7]

[experiment]
kind = "regret"
seeds = [0, 1, 2]
cycles = 50
checkpoints = [10, 50]
"#,
    );
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["experiment", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("FAIL loss-ratio-decreases"), "{text}");
    assert!(text.contains("PASS loss-ratio-at-horizon"), "{text}");
}

#[test]
fn experiment_seed_flag_overrides_the_config() {
    let dir = tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "conv.toml",
        r#"
version = 1

[experiment]
kind = "convergence"
seed_count = 3
cycles = 20
checkpoints = [10, 20]
"#,
    );
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["experiment", "--config"])
        .arg(&cfg)
        .args(["--seed", "7"])
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    // the run may fail its trend verdicts at this tiny scale; only the
    // file layout is under test here
    assert!(stderr(&out).is_empty(), "stderr: {}", stderr(&out));
    assert!(out_dir.join("convergence_seed_0007.csv").exists());
    assert!(!out_dir.join("convergence_seed_0000.csv").exists());
}

#[test]
fn gnuplot_format_writes_dat_tables_and_csv_verdicts() {
    let dir = tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "conv.toml",
        r#"
version = 1

[experiment]
kind = "convergence"
seeds = [1]
cycles = 10
checkpoints = [5, 10]
"#,
    );
    let out_dir = dir.path().join("out");
    let out = bin()
        .args(["experiment", "--config"])
        .arg(&cfg)
        .args(["--format", "gnuplot"])
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(stderr(&out).is_empty(), "stderr: {}", stderr(&out));
    let body = std::fs::read_to_string(out_dir.join("convergence_seed_0001.dat")).unwrap();
    let mut lines = body.lines();
    assert!(lines.next().unwrap().starts_with("# aixilab v"));
    assert!(lines.next().unwrap().starts_with("# cycle "));
    assert!(out_dir.join("convergence_summary.dat").exists());
    // verdict tables carry free text and stay CSV in every format
    assert!(out_dir.join("convergence_verdicts.csv").exists());
}
