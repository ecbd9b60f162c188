use std::path::{Path, PathBuf};
use std::process::Command as Process;

use clap::Parser;
use uqtrace_cli::{commands, Cli, CliError, Command};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn golden_inputs() -> [String; 3] {
    ["eval", "train", "background"].map(|s| fixture(&format!("golden/{s}.jsonl.gz")).display().to_string())
}

/// Parses `args` as a command line and runs the command, returning the run directory.
fn run(args: &[&str]) -> Result<Option<PathBuf>, CliError> {
    let cli = Cli::try_parse_from(std::iter::once("uqtrace").chain(args.iter().copied())).expect("arguments parse");
    match cli.command {
        Command::Score(a) => commands::score(&a).map(Some),
        Command::Eval(a) => commands::eval(&a).map(Some),
        Command::Synth(a) => commands::synth(&a).map(|_| None),
        Command::Report(a) => commands::report(&a.path).map(|_| None),
    }
}

fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

const GOLDEN_FILES: [&str; 6] =
    ["scores.csv", "metrics.csv", "redundancy.json", "family_roc.json", "rank_variability.json", "kendall.json"];

#[test]
fn golden_fixture_end_to_end() {
    let out = tempfile::tempdir().unwrap();
    let [eval, train, bg] = golden_inputs();
    let o = out.path().to_str().unwrap();
    let dir = run(&["eval", "--traces", &eval, "--train-traces", &train, "--background-traces", &bg, "--out", o])
        .unwrap()
        .unwrap();
    assert_eq!(dir.file_name().unwrap(), "eval");
    let expected = fixture("golden/expected");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(&expected).unwrap();
        for f in GOLDEN_FILES {
            std::fs::copy(dir.join(f), expected.join(f)).unwrap();
        }
        return;
    }
    for f in GOLDEN_FILES {
        assert!(read(&dir.join(f)) == read(&expected.join(f)), "{f} differs from the committed golden file");
    }
}

#[test]
fn score_then_eval_matches_fused_run() {
    let out = tempfile::tempdir().unwrap();
    let o = out.path().to_str().unwrap();
    let [eval, train, bg] = golden_inputs();
    let common =
        ["--train-traces", &train, "--background-traces", &bg, "--out", o, "--estimators", "information,md,kle"];
    let scored = run(&[&["score", "--traces", &eval, "--run-id", "s"][..], &common].concat()).unwrap().unwrap();
    let scores = scored.join("scores.csv");
    let split = run(&[
        &["eval", "--traces", &eval, "--scores", scores.to_str().unwrap(), "--run-id", "split", "--replicates", "100"]
            [..],
        &common,
    ]
    .concat())
    .unwrap()
    .unwrap();
    let fused = run(&[&["eval", "--traces", &eval, "--run-id", "fused", "--replicates", "100"][..], &common].concat())
        .unwrap()
        .unwrap();
    assert_eq!(read(&scores), read(&fused.join("scores.csv")));
    for f in ["metrics.csv", "redundancy.json", "family_roc.json", "kendall.json", "rank_variability.json"] {
        assert_eq!(read(&split.join(f)), read(&fused.join(f)), "{f}");
    }
}

fn small_corpus(dir: &Path, extra: &[&str]) -> PathBuf {
    let d = dir.join("corpus");
    let mut args = vec!["synth", "--out", d.to_str().unwrap(), "--seed", "3"];
    args.extend_from_slice(extra);
    run(&args).unwrap();
    d
}

#[test]
fn single_estimator_gives_one_row() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small_corpus(tmp.path(), &["--n", "3", "--n-train", "0", "--n-background", "0"]);
    let eval = c.join("eval.jsonl");
    let dir = run(&[
        "score",
        "--traces",
        eval.to_str().unwrap(),
        "--estimators",
        "msp",
        "--out",
        tmp.path().to_str().unwrap(),
    ])
    .unwrap()
    .unwrap();
    let text = read(&dir.join("scores.csv"));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], "estimator,family,eval-0000,eval-0001,eval-0002");
    assert!(lines[1].starts_with("msp,information,"));
    assert_eq!(lines[1].split(',').count(), 5);
}

#[test]
fn training_estimators_without_train_split_are_missing() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small_corpus(tmp.path(), &["--n", "4", "--n-train", "0", "--n-background", "0"]);
    let eval = c.join("eval.jsonl");
    let dir = run(&[
        "score",
        "--traces",
        eval.to_str().unwrap(),
        "--estimators",
        "md,ppl",
        "--out",
        tmp.path().to_str().unwrap(),
    ])
    .unwrap()
    .unwrap();
    let text = read(&dir.join("scores.csv"));
    assert!(text.lines().any(|l| l == "md,training,NA,NA,NA,NA"), "{text}");
}

#[test]
fn single_estimator_eval_has_one_metric_row() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small_corpus(tmp.path(), &["--n", "40", "--n-train", "0", "--n-background", "0"]);
    let eval = c.join("eval.jsonl");
    let dir = run(&[
        "eval",
        "--traces",
        eval.to_str().unwrap(),
        "--estimators",
        "ppl",
        "--replicates",
        "50",
        "--bins",
        "4",
        "--out",
        tmp.path().to_str().unwrap(),
    ])
    .unwrap()
    .unwrap();
    let text = read(&dir.join("metrics.csv"));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(&cells[..5], ["eval", "ppl", "information", "40", "1"]);
    assert!(cells[5..10].iter().all(|c| c.parse::<f64>().is_ok()), "{}", lines[1]);
    let report = commands::report(&dir).unwrap();
    assert!(report.contains("ppl") && report.contains("1.000 ± 0.000"), "{report}");
}

#[test]
fn constant_quality_panel_reports_missing_prr() {
    let tmp = tempfile::tempdir().unwrap();
    let c =
        small_corpus(tmp.path(), &["--n", "20", "--n-train", "0", "--n-background", "0", "--hallucination-rate", "0"]);
    let eval = c.join("eval.jsonl");
    let dir = run(&[
        "eval",
        "--traces",
        eval.to_str().unwrap(),
        "--estimators",
        "msp,mte",
        "--replicates",
        "20",
        "--bins",
        "4",
        "--out",
        tmp.path().to_str().unwrap(),
    ])
    .unwrap()
    .unwrap();
    let text = read(&dir.join("metrics.csv"));
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[4], "NA", "AUROC needs both classes: {line}");
        assert_eq!(cells[6], "NA", "PRR needs varying quality: {line}");
    }
}

#[test]
fn mismatched_score_table_names_first_missing_instance() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small_corpus(tmp.path(), &["--n", "5", "--n-train", "0", "--n-background", "0"]);
    let eval = c.join("eval.jsonl");
    let scores = tmp.path().join("scores.csv");
    std::fs::write(&scores, "estimator,family,eval-0000,ghost-1,ghost-2\nmsp,information,0.1,0.2,0.3\n").unwrap();
    let err = run(&[
        "eval",
        "--traces",
        eval.to_str().unwrap(),
        "--scores",
        scores.to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ])
    .unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(err.to_string().contains("ghost-1"), "{err}");
}

#[test]
fn synth_with_zero_instances_writes_empty_file() {
    let tmp = tempfile::tempdir().unwrap();
    let c = small_corpus(tmp.path(), &["--n", "0", "--n-train", "2", "--n-background", "0"]);
    assert_eq!(read(&c.join("eval.jsonl")), "");
    assert_eq!(read(&c.join("train.jsonl")).lines().count(), 2);
    let err = run(&["synth", "--out", tmp.path().to_str().unwrap(), "--min-len", "5", "--max-len", "2"]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn synth_is_deterministic_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = small_corpus(a.path(), &["--n", "6"]);
    let cb = small_corpus(b.path(), &["--n", "6"]);
    for f in ["eval.jsonl", "train.jsonl", "background.jsonl"] {
        assert_eq!(read(&ca.join(f)), read(&cb.join(f)));
    }
}

#[test]
fn config_file_then_overrides_then_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("run.toml");
    std::fs::write(&cfg, "seed = 5\n[synth]\nn = 7\nn_train = 1\nn_background = 0\nsignal = 0.5\n").unwrap();
    let out = tmp.path().join("c");
    let (cfg_s, out_s) = (cfg.to_str().unwrap(), out.to_str().unwrap());
    run(&["synth", "--config", cfg_s, "--set", "synth.n=9", "--out", out_s]).unwrap();
    assert_eq!(read(&out.join("eval.jsonl")).lines().count(), 9);
    run(&["synth", "--config", cfg_s, "--set", "synth.n=9", "--n", "4", "--out", out_s]).unwrap();
    assert_eq!(read(&out.join("eval.jsonl")).lines().count(), 4);

    std::fs::write(&cfg, "renyi.alpah = 0.5\n").unwrap();
    let err = run(&["synth", "--config", cfg_s, "--out", out_s]).unwrap_err();
    assert_eq!(err.exit_code(), 2);
    assert!(err.to_string().contains("renyi.alpah"));
}

#[test]
fn multi_panel_eval_writes_cross_panel_summaries() {
    let tmp = tempfile::tempdir().unwrap();
    let mut panels = Vec::new();
    for (name, seed) in [("alpha", "1"), ("beta", "2")] {
        let d = tmp.path().join(name);
        run(&[
            "synth",
            "--out",
            d.to_str().unwrap(),
            "--seed",
            seed,
            "--n",
            "30",
            "--n-train",
            "0",
            "--n-background",
            "0",
        ])
        .unwrap();
        let p = tmp.path().join(format!("{name}.jsonl"));
        std::fs::rename(d.join("eval.jsonl"), &p).unwrap();
        panels.push(p.to_str().unwrap().to_string());
    }
    let dir = run(&[
        "eval",
        "--traces",
        &panels[0],
        "--traces",
        &panels[1],
        "--estimators",
        "msp,ppl,mte,kle",
        "--replicates",
        "20",
        "--bins",
        "5",
        "--out",
        tmp.path().to_str().unwrap(),
    ])
    .unwrap()
    .unwrap();
    assert_eq!(dir.file_name().unwrap(), "eval");
    assert!(dir.join("scores_alpha.csv").exists() && dir.join("scores_beta.csv").exists());
    let metrics = read(&dir.join("metrics.csv"));
    assert_eq!(metrics.lines().filter(|l| l.starts_with("alpha,")).count(), 4);
    assert_eq!(metrics.lines().filter(|l| l.starts_with("beta,")).count(), 4);
    let ranks: serde_json::Value = serde_json::from_str(&read(&dir.join("rank_variability.json"))).unwrap();
    assert_eq!(ranks["estimators"].as_array().unwrap().len(), 4);
    assert_eq!(ranks["estimators"][0]["panels"], 2);
    let roc: serde_json::Value = serde_json::from_str(&read(&dir.join("family_roc.json"))).unwrap();
    assert_eq!(roc["panels"].as_array().unwrap().len(), 2);
    assert_eq!(roc["mean_over_panels"][0]["members"], serde_json::json!(["alpha", "beta"]));
    assert_eq!(roc["mean_over_panels"][0]["fpr"].as_array().unwrap().len(), 101);
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_uqtrace");
    let [eval, ..] = golden_inputs();
    let typo = Process::new(bin).args(["score", "--traces", &eval, "--estimators", "msq"]).output().unwrap();
    assert_eq!(typo.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&typo.stderr);
    assert!(stderr.contains("unknown estimator") && stderr.contains("semantic_entropy"), "{stderr}");
    let missing = Process::new(bin).args(["score", "--traces", "/definitely/not/here.jsonl"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));
    let usage = Process::new(bin).args(["score"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(2));
    let tmp = tempfile::tempdir().unwrap();
    let ok = Process::new(bin).args(["synth", "--n", "2", "--out", tmp.path().to_str().unwrap()]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
}
