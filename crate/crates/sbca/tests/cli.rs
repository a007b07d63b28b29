//! End-to-end tests of the `sbca` binary: pipeline happy path, exit
//! codes, seed precedence and artifact tracking.

use std::fs;
use std::path::Path;
use std::process::Command;

use sbca::data::{read_panel, SplitTag};
use sbca::manifest::{sha256_hex, RunManifest};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_in(dir: &Path, envs: &[(&str, &str)], args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_sbca"))
        .args(args)
        .env_remove("SBCA_SEED")
        .envs(envs.iter().copied())
        .current_dir(dir)
        .output()
        .expect("binary spawns");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// Small hyperparameters so training stays fast in tests.
const FAST_CONFIG: &str = r#"{"window": 6, "hidden": 4, "max_epochs": 2, "patience": 2}"#;

#[test]
fn pipeline_ingest_train_backtest_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, FAST_CONFIG).unwrap();
    let base = [
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ];

    let args: Vec<&str> = base
        .iter()
        .chain(&["ingest", "--synth", "--assets", "2", "--days", "120"])
        .copied()
        .collect();
    let r = run_in(dir.path(), &[], &args);
    assert_eq!(r.code, 0, "ingest failed: {}", r.stderr);
    assert!(r.stdout.contains("120 days, 2 assets"), "{}", r.stdout);
    assert!(r.stdout.contains("news coverage 100.0%"), "{}", r.stdout);
    assert!(out.join("panel.json").exists());

    let args: Vec<&str> = base
        .iter()
        .chain(&["train", "--variant", "sbca"])
        .copied()
        .collect();
    let r = run_in(dir.path(), &[], &args);
    assert_eq!(r.code, 0, "train failed: {}", r.stderr);
    let checkpoint = out.join("checkpoint_all_sbca.json");
    assert!(checkpoint.exists());
    assert!(out.join("trainlog.csv").exists());

    let args: Vec<&str> = base
        .iter()
        .chain(&["backtest", "--checkpoint", checkpoint.to_str().unwrap()])
        .copied()
        .collect();
    let r = run_in(dir.path(), &[], &args);
    assert_eq!(r.code, 0, "backtest failed: {}", r.stderr);
    assert!(out.join("report.json").exists());
    assert!(out.join("report.csv").exists());
    assert!(out.join("trajectory.csv").exists());

    // signal series rows equal the evaluated split day count
    let panel = read_panel(&out.join("panel.json")).unwrap();
    let test_days = panel.split_indices(SplitTag::Test).len();
    for ticker in ["SYN0", "SYN1"] {
        let signals = fs::read_to_string(out.join(format!("signals_{ticker}.csv"))).unwrap();
        assert_eq!(signals.lines().count(), test_days + 1, "{ticker}");
        assert!(signals.starts_with("date,raw_weight,weight,sentiment\n"));
    }

    let args: Vec<&str> = base
        .iter()
        .chain(&["cost-sweep", "--checkpoint", checkpoint.to_str().unwrap()])
        .copied()
        .collect();
    let r = run_in(dir.path(), &[], &args);
    assert_eq!(r.code, 0, "cost-sweep failed: {}", r.stderr);
    let sweep = fs::read_to_string(out.join("cost_sweep.csv")).unwrap();
    // two benchmarks and one policy across the four default commissions
    assert_eq!(sweep.lines().count(), 1 + 3 * 4);

    // a benchmark backtest over a non-default split also lands cleanly
    let args: Vec<&str> = base
        .iter()
        .chain(&["backtest", "--benchmark", "equal_weight", "--split", "val"])
        .copied()
        .collect();
    let r = run_in(dir.path(), &[], &args);
    assert_eq!(r.code, 0, "benchmark backtest failed: {}", r.stderr);
    assert!(r.stdout.contains("equal_weight"), "{}", r.stdout);

    // the index benchmark reads the synthetic index series
    let index_cfg = dir.path().join("config_index.json");
    fs::write(
        &index_cfg,
        format!(
            r#"{{"window": 6, "hidden": 4, "index_csv": "{}"}}"#,
            out.join("index.csv").display()
        ),
    )
    .unwrap();
    let r = run_in(
        dir.path(),
        &[],
        &[
            "--config",
            index_cfg.to_str().unwrap(),
            "--out-dir",
            out.to_str().unwrap(),
            "backtest",
            "--benchmark",
            "index",
        ],
    );
    assert_eq!(r.code, 0, "index backtest failed: {}", r.stderr);

    // every artifact is tracked; nothing in the directory is an orphan
    RunManifest::verify(&out).unwrap();
}

#[test]
fn exit_codes_for_bad_input_and_usage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap().to_string();

    // usage errors: unknown variant, unknown flag, missing backtest source
    let r = run_in(dir.path(), &[], &["--out-dir", &out_s, "train", "--variant", "bogus"]);
    assert_eq!(r.code, 64, "{}", r.stderr);
    let r = run_in(dir.path(), &[], &["--out-dir", &out_s, "train", "--grup", "g"]);
    assert_eq!(r.code, 64, "{}", r.stderr);
    let r = run_in(dir.path(), &[], &["--out-dir", &out_s, "backtest"]);
    assert_eq!(r.code, 64, "{}", r.stderr);
    let r = run_in(dir.path(), &[], &["--help"]);
    assert_eq!(r.code, 0, "{}", r.stderr);

    // input errors: no prices configured, missing files, unknown config key
    let r = run_in(dir.path(), &[], &["--out-dir", &out_s, "ingest"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("prices_csv"), "{}", r.stderr);
    let r = run_in(
        dir.path(),
        &[],
        &["--out-dir", &out_s, "backtest", "--checkpoint", "missing.json"],
    );
    assert_eq!(r.code, 2, "{}", r.stderr);
    let r = run_in(dir.path(), &[], &["--out-dir", &out_s, "train", "--variant", "sb"]);
    assert_eq!(r.code, 2, "no panel ingested yet: {}", r.stderr);

    let bad_cfg = dir.path().join("bad.json");
    fs::write(&bad_cfg, r#"{"learning_rate": 0.001}"#).unwrap();
    let r = run_in(
        dir.path(),
        &[],
        &["--config", bad_cfg.to_str().unwrap(), "ingest", "--synth"],
    );
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.contains("learning_rate"), "{}", r.stderr);
}

#[test]
fn ingest_rejects_missing_sentiment_column() {
    let dir = tempfile::tempdir().unwrap();
    let prices = dir.path().join("prices.csv");
    let news = dir.path().join("news.csv");
    fs::write(
        &prices,
        "date,ticker,close\n2020-01-06,A,10\n2020-01-07,A,11\n2020-01-08,A,12\n",
    )
    .unwrap();
    fs::write(&news, "date,ticker,title\n2020-01-06,A,headline\n").unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"prices_csv": "{}", "news_csv": "{}", "train_end": "2020-01-06", "val_end": "2020-01-07"}}"#,
            prices.display(),
            news.display()
        ),
    )
    .unwrap();
    let r = run_in(
        dir.path(),
        &[],
        &[
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            dir.path().join("out").to_str().unwrap(),
            "ingest",
        ],
    );
    assert_eq!(r.code, 2, "{}", r.stderr);
}

#[test]
fn seed_precedence_flag_over_env_over_default() {
    let dir = tempfile::tempdir().unwrap();
    let synth = |name: &str, envs: &[(&str, &str)], extra: &[&str]| {
        let out = dir.path().join(name);
        let mut args = vec!["--out-dir", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        args.extend_from_slice(&["ingest", "--synth", "--days", "60"]);
        let r = run_in(dir.path(), envs, &args);
        assert_eq!(r.code, 0, "{}", r.stderr);
        fs::read(out.join("panel.json")).unwrap()
    };

    let via_env = synth("a", &[("SBCA_SEED", "7")], &[]);
    let via_flag = synth("b", &[], &["--seed", "7"]);
    let flag_beats_env = synth("c", &[("SBCA_SEED", "9")], &["--seed", "7"]);
    let default_seed = synth("d", &[], &[]);

    assert_eq!(via_env, via_flag);
    assert_eq!(via_flag, flag_beats_env);
    assert_ne!(via_flag, default_seed);
}

#[test]
fn synthetic_inputs_are_deterministic_with_golden_checksum() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str| {
        let out = dir.path().join(name);
        let r = run_in(
            dir.path(),
            &[],
            &[
                "--out-dir",
                out.to_str().unwrap(),
                "synth",
                "--assets",
                "2",
                "--days",
                "60",
            ],
        );
        assert_eq!(r.code, 0, "{}", r.stderr);
        fs::read(out.join("prices.csv")).unwrap()
    };
    let first = gen("a");
    let second = gen("b");
    assert_eq!(first, second);
    assert_eq!(
        sha256_hex(&first),
        "2d8a62793aa64758556cc23acbabc32ea1194103b10ea157fd980b2cdb2f287e"
    );
}

#[test]
fn ablation_over_groups_writes_tables_and_curves() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("config.json");
    fs::write(
        &cfg,
        r#"{"window": 6, "hidden": 4, "max_epochs": 1, "patience": 1,
            "variants": ["sb", "sbca"],
            "groups": {"one": ["SYN0"], "both": ["SYN0", "SYN1"]}}"#,
    )
    .unwrap();
    let base = [
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
    ];

    let args: Vec<&str> = base
        .iter()
        .chain(&["ingest", "--synth", "--assets", "2", "--days", "120"])
        .copied()
        .collect();
    let r = run_in(dir.path(), &[], &args);
    assert_eq!(r.code, 0, "{}", r.stderr);

    // two groups configured: training without --group is ambiguous
    let args: Vec<&str> = base.iter().chain(&["train", "--variant", "sb"]).copied().collect();
    let r = run_in(dir.path(), &[], &args);
    assert_eq!(r.code, 2, "{}", r.stderr);

    let args: Vec<&str> = base.iter().chain(&["ablate"]).copied().collect();
    let r = run_in(dir.path(), &[], &args);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let table = fs::read_to_string(out.join("ablation.csv")).unwrap();
    assert_eq!(table.lines().count(), 1 + 2 * 2);
    assert!(out.join("pv_curves_one.csv").exists());
    assert!(out.join("pv_curves_both.csv").exists());
    RunManifest::verify(&out).unwrap();
}
