//! Command-line behaviour: subcommands, output files, exit codes.

use std::path::Path;
use std::process::{Command, Output};

use uaskf::ExperimentConfig;

fn uaskf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_uaskf")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, cfg: &ExperimentConfig) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_string()
}

fn small_ball() -> ExperimentConfig {
    ExperimentConfig { n_trials: 10, n_samples: 500, ..ExperimentConfig::default_for("ball2d").unwrap() }
}

#[test]
fn systems_lists_parseable_defaults() {
    let out = uaskf(&["systems"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["ball2d", "circle_drop", "aslip"] {
        let start = text.find(&format!("{name}\n")).expect(name) + name.len() + 1;
        let body = &text[start..];
        let end = body.find("\n}").unwrap() + 2;
        let cfg: ExperimentConfig = serde_json::from_str(&body[..end]).unwrap();
        assert_eq!(cfg, ExperimentConfig::default_for(name).unwrap());
    }
}

#[test]
fn bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &ExperimentConfig { write_curves: true, ..small_ball() });
    let out_dir = dir.path().join("out");
    let out = uaskf(&["bench", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["errors.csv", "mse.csv", "summary.json", "curves.svg"] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
    let mse = std::fs::read_to_string(out_dir.join("mse.csv")).unwrap();
    assert_eq!(mse.lines().count(), 1 + 2 * 10);
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_trials"], 10);
    assert!(String::from_utf8_lossy(&out.stdout).contains("sign test"));
}

#[test]
fn propagate_writes_four_cases() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small_ball());
    let out_dir = dir.path().join("out");
    let out = uaskf(&["propagate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("propagation.csv")).unwrap();
    let cases: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(cases, ["none", "guard_only", "reset_only", "both"]);
    assert!(out_dir.join("propagation.json").is_file());
}

#[test]
fn seed_flag_overrides_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &small_ball());
    let run = |name: &str, seed: Option<&str>| {
        let out_dir = dir.path().join(name);
        let mut args = vec!["bench", "--config", &cfg, "--out", out_dir.to_str().unwrap()];
        if let Some(s) = seed {
            args.extend(["--seed", s]);
        }
        assert!(uaskf(&args).status.success());
        std::fs::read(out_dir.join("mse.csv")).unwrap()
    };
    let base = run("a", None);
    assert_eq!(base, run("b", Some("0")));
    assert_ne!(base, run("c", Some("7")));
}

#[test]
fn config_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out_dir = out_dir.to_str().unwrap();

    let missing = dir.path().join("nope.json");
    assert_eq!(uaskf(&["bench", "--config", missing.to_str().unwrap(), "--out", out_dir]).status.code(), Some(1));

    let garbage = dir.path().join("garbage.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(uaskf(&["bench", "--config", garbage.to_str().unwrap(), "--out", out_dir]).status.code(), Some(1));

    let mut unknown: serde_json::Value = serde_json::to_value(small_ball()).unwrap();
    unknown["bogus_field"] = 1.into();
    let path = dir.path().join("unknown.json");
    std::fs::write(&path, unknown.to_string()).unwrap();
    assert_eq!(uaskf(&["bench", "--config", path.to_str().unwrap(), "--out", out_dir]).status.code(), Some(1));

    let bad_system = write_config(dir.path(), "sys.json", &ExperimentConfig { system: "pogo".into(), ..small_ball() });
    assert_eq!(uaskf(&["bench", "--config", &bad_system, "--out", out_dir]).status.code(), Some(1));

    let bad_dims = write_config(dir.path(), "dims.json", &ExperimentConfig { initial_mean: vec![0.0; 3], ..small_ball() });
    assert_eq!(uaskf(&["bench", "--config", &bad_dims, "--out", out_dir]).status.code(), Some(1));

    let negative = write_config(dir.path(), "neg.json", &ExperimentConfig { sigma_g: -1.0, ..small_ball() });
    assert_eq!(uaskf(&["propagate", "--config", &negative, "--out", out_dir]).status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // Comparing clouds so soon after the nominal impact leaves particles
    // that have not reached the uncertain guard yet.
    let cfg = write_config(dir.path(), "c.json", &ExperimentConfig { settle: 0.05, ..small_ball() });
    let out = uaskf(&["propagate", "--config", &cfg, "--out", dir.path().join("out").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}
