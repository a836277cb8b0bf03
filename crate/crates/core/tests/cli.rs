//! End-to-end tests of the `offlang` binary: full pipeline over a fixture
//! corpus plus exit-code contracts.

use std::path::Path;
use std::process::{Command, Output};

fn offlang(config: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_offlang"))
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .expect("binary should spawn")
}

fn stdout(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn write_fixture(dir: &Path) -> std::path::PathBuf {
    let mut train = String::from("id\ttext\tlabel\n");
    for i in 0..4 {
        train.push_str(&format!("h{i}\tখারাপ লোক {i} @spam http://x.co/y\tHOF\n"));
        train.push_str(&format!("n{i}\tভালো মানুষ {i}\tNOT\n"));
    }
    std::fs::write(dir.join("train.tsv"), train).unwrap();
    std::fs::write(
        dir.join("test.tsv"),
        "id\ttext\np1\tখারাপ লোক\np2\tভালো মানুষ\np3\tভালো দিন\np4\tখারাপ কথা\np5\tভালো খবর\n",
    )
    .unwrap();
    std::fs::write(
        dir.join("gold.tsv"),
        "id\ttext\tlabel\np1\tখারাপ লোক\tHOF\np2\tভালো মানুষ\tNOT\np3\tভালো দিন\tNOT\np4\tখারাপ কথা\tHOF\np5\tভালো খবর\tNOT\n",
    )
    .unwrap();

    let config = dir.join("run.toml");
    std::fs::write(
        &config,
        format!(
            r#"task = "bengali_task4"
output_dir = "{out}"

[data]
train = "{train}"
test = "{test}"

[model]
backbone = "tiny-random-2layer"
freeze_layers = 1

[train]
epochs = 3
learning_rate = 1e-3
batch_size = 4
seed = 7
"#,
            out = dir.join("out").display(),
            train = dir.join("train.tsv").display(),
            test = dir.join("test.tsv").display(),
        ),
    )
    .unwrap();
    config
}

#[test]
fn full_pipeline_through_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_fixture(dir.path());

    let out = offlang(&config, &["stats"]);
    assert!(out.status.success(), "stats failed: {out:?}");
    assert!(stdout(&out).contains("total = 8"));

    let cleaned = dir.path().join("cleaned.tsv");
    let out = offlang(&config, &["normalize", "--output", cleaned.to_str().unwrap()]);
    assert!(out.status.success(), "normalize failed: {out:?}");
    assert!(stdout(&out).contains("changed_strip_urls = 4"));
    let cleaned_text = std::fs::read_to_string(&cleaned).unwrap();
    assert!(!cleaned_text.contains("http"));
    assert!(!cleaned_text.contains("@spam"));

    let out = offlang(&config, &["train"]);
    assert!(out.status.success(), "train failed: {out:?}");
    let text = stdout(&out);
    assert!(text.contains("epoch_3_loss"));
    assert!(dir.path().join("out/checkpoint/manifest.txt").exists());
    assert!(dir.path().join("out/registry.txt").exists());

    let out = offlang(&config, &["predict"]);
    assert!(out.status.success(), "predict failed: {out:?}");
    assert!(stdout(&out).contains("predictions = 5"));
    let submission = std::fs::read_to_string(dir.path().join("out/predictions.tsv")).unwrap();
    let ids: Vec<&str> = submission
        .lines()
        .map(|l| l.split('\t').next().unwrap())
        .collect();
    assert_eq!(ids, ["p1", "p2", "p3", "p4", "p5"]);

    // Evaluate against a gold copy of the test file.
    let gold_config = dir.path().join("gold.toml");
    let base = std::fs::read_to_string(&config).unwrap();
    std::fs::write(
        &gold_config,
        base.replace("test.tsv", "gold.tsv"),
    )
    .unwrap();
    let out = offlang(&gold_config, &["evaluate"]);
    assert!(out.status.success(), "evaluate failed: {out:?}");
    let report = stdout(&out);
    assert!(report.contains("macro_f1 = "), "report:\n{report}");
    assert!(report.contains("n = 5"));

    let exported = dir.path().join("final.tsv");
    let out = offlang(
        &config,
        &[
            "export",
            "--predictions",
            dir.path().join("out/predictions.tsv").to_str().unwrap(),
            "--output",
            exported.to_str().unwrap(),
        ],
    );
    assert!(out.status.success(), "export failed: {out:?}");
    assert_eq!(std::fs::read_to_string(&exported).unwrap(), submission);
}

#[test]
fn missing_config_exits_1() {
    let out = offlang(Path::new("/nonexistent/run.toml"), &["stats"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_fixture(dir.path());
    std::fs::write(
        dir.path().join("train.tsv"),
        "id\ttext\tlabel\na\tকথা\tMAYBE\n",
    )
    .unwrap();
    let out = offlang(&config, &["train"]);
    assert_eq!(out.status.code(), Some(2), "stderr: {out:?}");
}

#[test]
fn predict_without_checkpoint_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_fixture(dir.path());
    let out = offlang(&config, &["predict"]);
    assert_eq!(out.status.code(), Some(3), "stderr: {out:?}");
}

#[test]
fn seed_override_changes_config_hash_only_not_usage() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_fixture(dir.path());
    let out = offlang(&config, &["--seed", "99", "train"]);
    assert!(out.status.success(), "train with --seed failed: {out:?}");
}
