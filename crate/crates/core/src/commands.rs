//! Library-level implementations of the CLI subcommands. Each returns the
//! text that belongs on stdout, so the binary stays a thin argument parser
//! and the behaviour is testable without spawning processes.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::checkpoint;
use crate::config::RunConfig;
use crate::corpus::{self, Corpus, Label};
use crate::encoder::{BackboneRegistry, LoadOptions};
use crate::eval;
use crate::normalize::{self, RULE_ORDER};
use crate::registry::{self, RegistryEntry};
use crate::submission::{self, PredictionRecord};
use crate::train;

/// Command failures bucketed by exit code: usage/config problems exit 1,
/// data problems exit 2, runtime problems exit 3.
#[derive(Debug, Error)]
pub enum CommandError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Runtime(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Usage(_) => 1,
            CommandError::Data(_) => 2,
            CommandError::Runtime(_) => 3,
        }
    }
}

impl From<crate::config::ConfigError> for CommandError {
    fn from(e: crate::config::ConfigError) -> Self {
        CommandError::Usage(e.to_string())
    }
}

impl From<crate::corpus::CorpusError> for CommandError {
    fn from(e: crate::corpus::CorpusError) -> Self {
        CommandError::Data(e.to_string())
    }
}

impl From<crate::submission::SubmissionError> for CommandError {
    fn from(e: crate::submission::SubmissionError) -> Self {
        CommandError::Data(e.to_string())
    }
}

impl From<crate::eval::EvalError> for CommandError {
    fn from(e: crate::eval::EvalError) -> Self {
        CommandError::Data(e.to_string())
    }
}

impl From<crate::encoder::EncoderError> for CommandError {
    fn from(e: crate::encoder::EncoderError) -> Self {
        CommandError::Runtime(e.to_string())
    }
}

impl From<crate::train::TrainError> for CommandError {
    fn from(e: crate::train::TrainError) -> Self {
        CommandError::Runtime(e.to_string())
    }
}

impl From<crate::checkpoint::CheckpointError> for CommandError {
    fn from(e: crate::checkpoint::CheckpointError) -> Self {
        CommandError::Runtime(e.to_string())
    }
}

impl From<crate::registry::RegistryError> for CommandError {
    fn from(e: crate::registry::RegistryError) -> Self {
        CommandError::Runtime(e.to_string())
    }
}

fn require_path<'a>(
    path: &'a Option<PathBuf>,
    what: &str,
) -> Result<&'a Path, CommandError> {
    path.as_deref()
        .ok_or_else(|| CommandError::Usage(format!("config is missing data.{what}")))
}

fn ingest_labeled(config: &RunConfig, path: &Path) -> Result<Corpus, CommandError> {
    let corpus = corpus::ingest(path, &config.columns, config.language())?;
    if !corpus.is_labeled() {
        return Err(CommandError::Data(format!(
            "{} must carry gold labels",
            path.display()
        )));
    }
    Ok(corpus)
}

fn ingest_unlabeled(config: &RunConfig, path: &Path) -> Result<Corpus, CommandError> {
    let mut mapping = config.columns.clone();
    mapping.label = None;
    Ok(corpus::ingest(path, &mapping, config.language())?)
}

fn stats_block(title: &str, corpus: &Corpus) -> String {
    let s = corpus::stats(corpus);
    let mut out = format!("[{title}]\n");
    out.push_str(&format!("total = {}\n", s.total));
    out.push_str(&format!("hof = {}\n", s.hof));
    out.push_str(&format!("not = {}\n", s.not));
    out.push_str(&format!("unlabeled = {}\n", s.unlabeled));
    for w in corpus.warnings() {
        out.push_str(&format!("warning = {w}\n"));
    }
    out
}

/// `stats`: label distribution of the configured train/test files.
pub fn cmd_stats(config: &RunConfig) -> Result<String, CommandError> {
    config.validate()?;
    let mut out = format!("task = {}\n", config.task.as_str());
    let mut saw_any = false;
    if let Some(path) = &config.data.train {
        let corpus = corpus::ingest(path, &config.columns, config.language())?;
        out.push_str(&stats_block("train", &corpus));
        saw_any = true;
    }
    if let Some(path) = &config.data.test {
        let corpus = ingest_unlabeled(config, path)?;
        out.push_str(&stats_block("test", &corpus));
        saw_any = true;
    }
    if !saw_any {
        return Err(CommandError::Usage(
            "config names neither data.train nor data.test".to_string(),
        ));
    }
    Ok(out)
}

fn write_corpus(
    corpus: &Corpus,
    texts: &[String],
    mapping: &crate::corpus::ColumnMapping,
    path: &Path,
) -> Result<(), CommandError> {
    let io_err = |e: std::io::Error| CommandError::Runtime(format!("{}: {e}", path.display()));
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(io_err)?;
        }
    }
    let labeled = corpus.is_labeled() && !corpus.posts().is_empty();
    let mut writer = csv::WriterBuilder::new()
        .delimiter(mapping.delimiter.as_byte())
        .from_path(path)
        .map_err(|e| CommandError::Runtime(e.to_string()))?;
    let csv_err = |e: csv::Error| CommandError::Runtime(e.to_string());
    let mut header = vec![mapping.id.as_str(), mapping.text.as_str()];
    let label_col = mapping.label.as_deref().unwrap_or("label");
    if labeled {
        header.push(label_col);
    }
    writer.write_record(&header).map_err(csv_err)?;
    for (post, text) in corpus.posts().iter().zip(texts) {
        let mut row = vec![post.id.as_str(), text.as_str()];
        if labeled {
            row.push(post.label.map(Label::as_str).unwrap_or(""));
        }
        writer.write_record(&row).map_err(csv_err)?;
    }
    writer.flush().map_err(io_err)?;
    Ok(())
}

/// `normalize`: clean the configured train file (or an explicit input),
/// write it back out in the same tabular format, and report per-rule
/// change counts.
pub fn cmd_normalize(
    config: &RunConfig,
    input: Option<&Path>,
    output: &Path,
) -> Result<String, CommandError> {
    config.validate()?;
    let owned;
    let path = match input {
        Some(p) => p,
        None => {
            owned = require_path(&config.data.train, "train")?.to_path_buf();
            &owned
        }
    };
    let corpus = corpus::ingest(path, &config.columns, config.language())?;
    let cleaned = normalize::normalize_corpus(&corpus, &config.normalize);
    let texts: Vec<String> = cleaned.posts.iter().map(|p| p.text.clone()).collect();
    write_corpus(&corpus, &texts, &config.columns, output)?;
    let mut out = format!("posts = {}\n", corpus.len());
    out.push_str(&format!("became_empty = {}\n", cleaned.empty_count));
    for (rule, count) in RULE_ORDER.iter().zip(cleaned.change_counts) {
        out.push_str(&format!("changed_{} = {}\n", rule.as_str(), count));
    }
    Ok(out)
}

fn load_model(config: &RunConfig, seed: u64) -> Result<crate::encoder::ClassifierModel, CommandError> {
    let registry = BackboneRegistry::builtin();
    let spec = config.model_spec()?;
    let options = LoadOptions {
        seed,
        cache_root: None,
    };
    Ok(crate::encoder::load_backbone(
        &config.model.backbone,
        &registry,
        Some(spec),
        &options,
    )?)
}

pub fn checkpoint_dir(config: &RunConfig) -> PathBuf {
    config.output_dir.join("checkpoint")
}

/// `train`: ingest, normalize, fine-tune with the configured freeze depth,
/// save a checkpoint, and record the run in the registry.
pub fn cmd_train(config: &RunConfig) -> Result<String, CommandError> {
    config.validate()?;
    let train_path = require_path(&config.data.train, "train")?;
    let corpus = ingest_labeled(config, train_path)?;
    let labels = corpus::encode_labels(&corpus)?;
    let cleaned = normalize::normalize_corpus(&corpus, &config.normalize);
    let texts: Vec<String> = cleaned.posts.iter().map(|p| p.text.clone()).collect();

    let mut model = load_model(config, config.train.seed)?;
    let (frozen, trainable) = model.apply_freeze(config.model.freeze_layers)?;

    let record = train::train(&mut model, &texts, &labels, &config.train)?;

    let ckpt_dir = checkpoint_dir(config);
    checkpoint::save(&model, &ckpt_dir)?;

    let entry = RegistryEntry {
        timestamp: chrono::Utc::now(),
        run_id: record.run_id.clone(),
        task: config.task.as_str().to_string(),
        config_hash: config.train.content_hash(),
        macro_f1: None,
    };
    let warning = registry::append_entry(&config.registry_path(), &entry)?;

    let mut out = format!("run_id = {}\n", record.run_id);
    out.push_str(&format!("examples = {}\n", texts.len()));
    out.push_str(&format!("frozen_params = {frozen}\n"));
    out.push_str(&format!("trainable_params = {trainable}\n"));
    for (epoch, loss) in record.epoch_losses.iter().enumerate() {
        out.push_str(&format!("epoch_{}_loss = {loss:.6}\n", epoch + 1));
    }
    out.push_str(&format!("optimizer_steps = {}\n", record.optimizer_steps));
    out.push_str(&format!("checkpoint = {}\n", ckpt_dir.display()));
    if let Some(w) = warning {
        out.push_str(&format!("warning = {w}\n"));
    }
    Ok(out)
}

/// `predict`: run the saved checkpoint over the configured test file and
/// write a submission file plus a sidecar with per-post HOF scores.
pub fn cmd_predict(
    config: &RunConfig,
    checkpoint_override: Option<&Path>,
    output: Option<&Path>,
) -> Result<String, CommandError> {
    config.validate()?;
    let test_path = require_path(&config.data.test, "test")?;
    let default_ckpt = checkpoint_dir(config);
    let ckpt = checkpoint_override.unwrap_or(&default_ckpt);
    let model = checkpoint::load_with_spec(ckpt, &config.model_spec()?)?;

    let corpus = ingest_unlabeled(config, test_path)?;
    let cleaned = normalize::normalize_corpus(&corpus, &config.normalize);
    let texts: Vec<String> = cleaned.posts.iter().map(|p| p.text.clone()).collect();
    let predictions = train::predict(&model, &texts)?;

    let ids: Vec<String> = corpus.posts().iter().map(|p| p.id.clone()).collect();
    let records: Vec<PredictionRecord> = ids
        .iter()
        .zip(&predictions)
        .map(|(id, &(label, score))| PredictionRecord {
            id: id.clone(),
            label: Label::decode(label).expect("predict yields binary labels"),
            score,
        })
        .collect();

    let default_out = config.output_dir.join("predictions.tsv");
    let out_path = output.unwrap_or(&default_out);
    submission::export_submission(&records, &ids, out_path)?;

    let scores_path = out_path.with_extension("scores.tsv");
    let mut scores = String::new();
    for r in &records {
        scores.push_str(&format!("{}\t{:.6}\n", r.id, r.score));
    }
    std::fs::write(&scores_path, scores)
        .map_err(|e| CommandError::Runtime(format!("{}: {e}", scores_path.display())))?;

    let hof = records.iter().filter(|r| r.label == Label::Hof).count();
    let mut out = format!("predictions = {}\n", records.len());
    out.push_str(&format!("hof = {hof}\n"));
    out.push_str(&format!("not = {}\n", records.len() - hof));
    out.push_str(&format!("submission = {}\n", out_path.display()));
    out.push_str(&format!("scores = {}\n", scores_path.display()));
    Ok(out)
}

/// `evaluate`: score a submission file against a gold-labeled corpus.
pub fn cmd_evaluate(
    config: &RunConfig,
    predictions_override: Option<&Path>,
) -> Result<String, CommandError> {
    config.validate()?;
    let gold_path = require_path(&config.data.test, "test")?;
    let gold_corpus = ingest_labeled(config, gold_path)?;
    let pred_path = match predictions_override {
        Some(p) => p.to_path_buf(),
        None => match &config.data.predictions {
            Some(p) => p.clone(),
            None => config.output_dir.join("predictions.tsv"),
        },
    };
    let rows = submission::parse_submission(&pred_path)?;
    let by_id: HashMap<&str, Label> = rows.iter().map(|(id, l)| (id.as_str(), *l)).collect();

    let mut gold = Vec::with_capacity(gold_corpus.len());
    let mut pred = Vec::with_capacity(gold_corpus.len());
    for post in gold_corpus.posts() {
        let predicted = by_id.get(post.id.as_str()).ok_or_else(|| {
            CommandError::Data(format!("no prediction for id {:?}", post.id))
        })?;
        gold.push(Label::encode(post.label.expect("checked labeled")));
        pred.push(Label::encode(*predicted));
    }
    if rows.len() != gold_corpus.len() {
        return Err(CommandError::Data(format!(
            "prediction file has {} rows but gold corpus has {}",
            rows.len(),
            gold_corpus.len()
        )));
    }
    let report = eval::report(&gold, &pred)?;
    Ok(report.to_kv())
}

/// `export`: rewrite a prediction file in canonical submission order for
/// the configured test set, validating coverage on the way.
pub fn cmd_export(
    config: &RunConfig,
    predictions: &Path,
    output: &Path,
) -> Result<String, CommandError> {
    config.validate()?;
    let test_path = require_path(&config.data.test, "test")?;
    let corpus = ingest_unlabeled(config, test_path)?;
    let ids: Vec<String> = corpus.posts().iter().map(|p| p.id.clone()).collect();
    let rows = submission::parse_submission(predictions)?;
    let records: Vec<PredictionRecord> = rows
        .into_iter()
        .map(|(id, label)| PredictionRecord {
            id,
            label,
            score: f64::NAN,
        })
        .collect();
    submission::export_submission(&records, &ids, output)?;
    Ok(format!(
        "exported = {}\nrows = {}\n",
        output.display(),
        ids.len()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Task;

    fn write_train_file(dir: &Path) -> PathBuf {
        let path = dir.join("train.tsv");
        let mut text = String::from("id\ttext\tlabel\n");
        for i in 0..4 {
            text.push_str(&format!("h{i}\tখারাপ লোক {i}\tHOF\n"));
            text.push_str(&format!("n{i}\tভালো মানুষ {i}\tNOT\n"));
        }
        std::fs::write(&path, text).unwrap();
        path
    }

    fn write_test_file(dir: &Path) -> PathBuf {
        let path = dir.join("test.tsv");
        std::fs::write(
            &path,
            "id\ttext\np1\tখারাপ লোক\np2\tভালো মানুষ\np3\tভালো দিন\n",
        )
        .unwrap();
        path
    }

    fn tiny_config(dir: &Path) -> RunConfig {
        let mut config = RunConfig::default();
        config.task = Task::BengaliTask4;
        config.output_dir = dir.join("out");
        config.model.backbone = "tiny-random-2layer".to_string();
        config.model.freeze_layers = 1;
        config.data.train = Some(write_train_file(dir));
        config.data.test = Some(write_test_file(dir));
        config.train.epochs = 2;
        config.train.learning_rate = 1e-3;
        config.train.batch_size = 4;
        config
    }

    #[test]
    fn stats_reports_both_splits() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());
        let out = cmd_stats(&config).unwrap();
        assert!(out.contains("[train]\ntotal = 8\nhof = 4\nnot = 4\n"));
        assert!(out.contains("[test]\ntotal = 3\n"));
    }

    #[test]
    fn train_then_predict_then_export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config(dir.path());

        let out = cmd_train(&config).unwrap();
        assert!(out.contains("optimizer_steps = 4\n"));
        assert!(checkpoint_dir(&config).join("manifest.txt").exists());
        assert!(config.registry_path().exists());

        let out = cmd_predict(&config, None, None).unwrap();
        assert!(out.contains("predictions = 3\n"));
        let sub = config.output_dir.join("predictions.tsv");
        let rows = submission::parse_submission(&sub).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].0, "p1");

        let exported = dir.path().join("final.tsv");
        cmd_export(&config, &sub, &exported).unwrap();
        assert_eq!(
            std::fs::read(&exported).unwrap(),
            std::fs::read(&sub).unwrap()
        );
    }

    #[test]
    fn evaluate_scores_a_submission() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config(dir.path());
        // Re-point test at a labeled gold file.
        let gold = dir.path().join("gold.tsv");
        std::fs::write(
            &gold,
            "id\ttext\tlabel\np1\tখারাপ লোক\tHOF\np2\tভালো মানুষ\tNOT\n",
        )
        .unwrap();
        config.data.test = Some(gold);
        let preds = dir.path().join("preds.tsv");
        std::fs::write(&preds, "p1\tHOF\np2\tHOF\n").unwrap();
        let out = cmd_evaluate(&config, Some(&preds)).unwrap();
        assert!(out.contains("accuracy = 0.500000"));
        // gold [1,0], pred [1,1]: F1(HOF)=2/3, F1(NOT)=0 -> macro 1/3.
        assert!(out.contains("macro_f1 = 0.333333"));
    }

    #[test]
    fn missing_train_path_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config(dir.path());
        config.data.train = None;
        let err = cmd_train(&config).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn bad_data_maps_to_exit_code_2() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config(dir.path());
        let bad = dir.path().join("bad.tsv");
        std::fs::write(&bad, "id\ttext\tlabel\na\thello\tMAYBE\n").unwrap();
        config.data.train = Some(bad);
        let err = cmd_train(&config).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
