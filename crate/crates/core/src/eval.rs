//! Macro-F1 scoring with per-class diagnostics.
//!
//! Precision, recall and F1 fall back to 0 whenever their denominator is 0,
//! matching common shared-task scorer behaviour; macro F1 is the arithmetic
//! mean of the two per-class F1 values.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("gold has {gold} entries but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("label value {value} at position {index} is not 0 or 1")]
    InvalidLabelValue { index: usize, value: u8 },
    #[error("cannot score an empty input")]
    EmptyInput,
}

/// 2x2 contingency table indexed (gold, predicted) over {0, 1}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[usize; 2]; 2],
}

impl ConfusionMatrix {
    pub fn get(&self, gold: u8, pred: u8) -> usize {
        self.counts[gold as usize][pred as usize]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "            pred=NOT  pred=HOF")?;
        writeln!(
            f,
            "gold=NOT  {:>9} {:>9}",
            self.counts[0][0], self.counts[0][1]
        )?;
        write!(
            f,
            "gold=HOF  {:>9} {:>9}",
            self.counts[1][0], self.counts[1][1]
        )
    }
}

/// Precision/recall/F1 for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Full scoring output: per-class diagnostics plus the leaderboard metric.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub class_not: ClassScores,
    pub class_hof: ClassScores,
    pub macro_f1: f64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub n: usize,
}

impl EvalReport {
    /// Flat key-value rendering used by the run registry and the CLI.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("n = {}\n", self.n));
        out.push_str(&format!("accuracy = {:.6}\n", self.accuracy));
        out.push_str(&format!("macro_f1 = {:.6}\n", self.macro_f1));
        for (name, c) in [("not", self.class_not), ("hof", self.class_hof)] {
            out.push_str(&format!("precision_{name} = {:.6}\n", c.precision));
            out.push_str(&format!("recall_{name} = {:.6}\n", c.recall));
            out.push_str(&format!("f1_{name} = {:.6}\n", c.f1));
        }
        for g in 0..2u8 {
            for p in 0..2u8 {
                out.push_str(&format!(
                    "confusion_{}_{} = {}\n",
                    g,
                    p,
                    self.confusion.get(g, p)
                ));
            }
        }
        out
    }
}

fn check_vectors(gold: &[u8], pred: &[u8]) -> Result<(), EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    for vector in [gold, pred] {
        for (index, &value) in vector.iter().enumerate() {
            if value > 1 {
                return Err(EvalError::InvalidLabelValue { index, value });
            }
        }
    }
    Ok(())
}

/// Count (gold, predicted) pairs into a 2x2 matrix.
pub fn confusion(gold: &[u8], pred: &[u8]) -> Result<ConfusionMatrix, EvalError> {
    check_vectors(gold, pred)?;
    let mut counts = [[0usize; 2]; 2];
    for (&g, &p) in gold.iter().zip(pred) {
        counts[g as usize][p as usize] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

fn class_scores(matrix: &ConfusionMatrix, class: u8) -> ClassScores {
    let tp = matrix.get(class, class) as f64;
    let fp = matrix.get(1 - class, class) as f64;
    let fn_ = matrix.get(class, 1 - class) as f64;
    let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
    let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    ClassScores {
        precision,
        recall,
        f1,
    }
}

/// Arithmetic mean of the two per-class F1 scores.
pub fn macro_f1(gold: &[u8], pred: &[u8]) -> Result<f64, EvalError> {
    Ok(report(gold, pred)?.macro_f1)
}

/// Full report with confusion matrix, per-class scores, macro F1 and accuracy.
pub fn report(gold: &[u8], pred: &[u8]) -> Result<EvalReport, EvalError> {
    if gold.is_empty() && pred.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let matrix = confusion(gold, pred)?;
    let class_not = class_scores(&matrix, 0);
    let class_hof = class_scores(&matrix, 1);
    let correct = matrix.get(0, 0) + matrix.get(1, 1);
    Ok(EvalReport {
        class_not,
        class_hof,
        macro_f1: (class_not.f1 + class_hof.f1) / 2.0,
        accuracy: correct as f64 / gold.len() as f64,
        confusion: matrix,
        n: gold.len(),
    })
}
