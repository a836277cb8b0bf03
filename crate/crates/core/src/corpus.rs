//! Corpus ingestion for shared-task style labeled/unlabeled post files.
//!
//! Input files are UTF-8 delimiter-separated text with a header row. A corpus
//! is uniformly labeled (training) or uniformly unlabeled (prediction-only);
//! mixed files are rejected so metrics can never silently run on partial gold.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Binary class label: HOF encodes to 1, NOT to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Hof,
    Not,
}

impl Label {
    pub fn encode(self) -> u8 {
        match self {
            Label::Hof => 1,
            Label::Not => 0,
        }
    }

    pub fn decode(value: u8) -> Option<Label> {
        match value {
            1 => Some(Label::Hof),
            0 => Some(Label::Not),
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "HOF" => Some(Label::Hof),
            "NOT" => Some(Label::Not),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Hof => "HOF",
            Label::Not => "NOT",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One social-media post as ingested, with optional gold label.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawPost {
    pub id: String,
    pub text: String,
    pub label: Option<Label>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Bengali,
    Assamese,
    Gujarati,
    Other,
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Language::Bengali => "bengali",
            Language::Assamese => "assamese",
            Language::Gujarati => "gujarati",
            Language::Other => "other",
        };
        f.write_str(s)
    }
}

/// Field delimiter of the flat input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    #[default]
    Tab,
    Comma,
}

impl Delimiter {
    pub fn as_byte(self) -> u8 {
        match self {
            Delimiter::Tab => b'\t',
            Delimiter::Comma => b',',
        }
    }
}

/// Maps header column names onto the (id, text, label) schema.
/// `label` is `None` for prediction-only test files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub id: String,
    pub text: String,
    pub label: Option<String>,
    #[serde(default)]
    pub delimiter: Delimiter,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        ColumnMapping {
            id: "id".to_string(),
            text: "text".to_string(),
            label: Some("label".to_string()),
            delimiter: Delimiter::Tab,
        }
    }
}

/// Per-label counts for one corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub hof: usize,
    pub not: usize,
    pub unlabeled: usize,
    pub total: usize,
    pub language: Language,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed row {row}: {source}")]
    Csv { row: usize, source: csv::Error },
    #[error("missing column {column:?} in header")]
    MissingColumn { column: String },
    #[error("duplicate id {id:?} at row {row}")]
    DuplicateId { row: usize, id: String },
    #[error("invalid label {value:?} at row {row} (expected HOF or NOT)")]
    InvalidLabel { row: usize, value: String },
    #[error("empty id at row {row}")]
    EmptyId { row: usize },
    #[error("row {row} mixes labeled and unlabeled posts in one file")]
    MixedLabeling { row: usize },
    #[error("post {id:?} has no label")]
    UnlabeledPost { id: String },
    #[error("class {label} has too few posts ({count}) for dev fraction {fraction}")]
    InsufficientClassCount {
        label: Label,
        count: usize,
        fraction: f64,
    },
}

/// Immutable collection of posts, uniformly labeled or uniformly unlabeled.
#[derive(Debug, Clone)]
pub struct Corpus {
    posts: Vec<RawPost>,
    language: Language,
    warnings: Vec<String>,
}

impl Corpus {
    /// Build a corpus from posts already in memory. Enforces the same
    /// id-uniqueness and uniform-labeling rules as `ingest`.
    pub fn from_posts(posts: Vec<RawPost>, language: Language) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        let mut warnings = Vec::new();
        let labeled = posts.first().map(|p| p.label.is_some());
        for (idx, post) in posts.iter().enumerate() {
            let row = idx + 2; // header is row 1
            if post.id.is_empty() {
                return Err(CorpusError::EmptyId { row });
            }
            if !seen.insert(post.id.clone()) {
                return Err(CorpusError::DuplicateId {
                    row,
                    id: post.id.clone(),
                });
            }
            if post.label.is_some() != labeled.unwrap() {
                return Err(CorpusError::MixedLabeling { row });
            }
            if post.text.is_empty() {
                warnings.push(format!("post {} has empty text", post.id));
            }
        }
        Ok(Corpus {
            posts,
            language,
            warnings,
        })
    }

    pub fn posts(&self) -> &[RawPost] {
        &self.posts
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn language(&self) -> Language {
        self.language
    }

    /// True when every post carries a gold label. Empty corpora count as labeled.
    pub fn is_labeled(&self) -> bool {
        self.posts.iter().all(|p| p.label.is_some())
    }

    /// Validation warnings collected at ingestion time (e.g. empty texts).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Read a delimiter-separated post file into a corpus.
///
/// Rejects duplicate ids, label strings outside {HOF, NOT}, and files mixing
/// labeled with unlabeled rows. When the mapping declares no label column the
/// corpus is prediction-only.
pub fn ingest(
    path: &Path,
    mapping: &ColumnMapping,
    language: Language,
) -> Result<Corpus, CorpusError> {
    let file = std::fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(mapping.delimiter.as_byte())
        .flexible(false)
        .from_reader(file);

    let headers = reader
        .headers()
        .map_err(|source| CorpusError::Csv { row: 1, source })?
        .clone();
    let col_index = |name: &str| -> Result<usize, CorpusError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CorpusError::MissingColumn {
                column: name.to_string(),
            })
    };
    let id_col = col_index(&mapping.id)?;
    let text_col = col_index(&mapping.text)?;
    let label_col = match &mapping.label {
        Some(name) => Some(col_index(name)?),
        None => None,
    };

    let mut posts = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2;
        let record = record.map_err(|source| CorpusError::Csv { row, source })?;
        let id = record.get(id_col).unwrap_or("").to_string();
        let text = record.get(text_col).unwrap_or("").to_string();
        let label = match label_col {
            Some(col) => {
                let raw = record.get(col).unwrap_or("").trim();
                if raw.is_empty() {
                    None
                } else {
                    Some(Label::parse(raw).ok_or_else(|| CorpusError::InvalidLabel {
                        row,
                        value: raw.to_string(),
                    })?)
                }
            }
            None => None,
        };
        posts.push(RawPost { id, text, label });
    }
    Corpus::from_posts(posts, language)
}

/// Encode gold labels as a {0,1} vector aligned with corpus order.
pub fn encode_labels(corpus: &Corpus) -> Result<Vec<u8>, CorpusError> {
    corpus
        .posts()
        .iter()
        .map(|p| {
            p.label
                .map(Label::encode)
                .ok_or_else(|| CorpusError::UnlabeledPost { id: p.id.clone() })
        })
        .collect()
}

/// Per-label counts plus total; unlabeled posts counted separately.
pub fn stats(corpus: &Corpus) -> CorpusStats {
    let mut s = CorpusStats {
        hof: 0,
        not: 0,
        unlabeled: 0,
        total: corpus.len(),
        language: corpus.language(),
    };
    for post in corpus.posts() {
        match post.label {
            Some(Label::Hof) => s.hof += 1,
            Some(Label::Not) => s.not += 1,
            None => s.unlabeled += 1,
        }
    }
    s
}

/// Deterministic stratified train/dev partition.
///
/// Per-class dev counts are `round(dev_fraction * class_size)`; the union of
/// the two outputs is exactly the input and order within each side follows the
/// original corpus order.
pub fn stratified_split(
    corpus: &Corpus,
    dev_fraction: f64,
    seed: u64,
) -> Result<(Corpus, Corpus), CorpusError> {
    assert!(
        (0.0..1.0).contains(&dev_fraction),
        "dev_fraction must be in [0, 1)"
    );
    if dev_fraction == 0.0 {
        let train = corpus.clone();
        let dev = Corpus::from_posts(Vec::new(), corpus.language())?;
        return Ok((train, dev));
    }
    for post in corpus.posts() {
        if post.label.is_none() {
            return Err(CorpusError::UnlabeledPost {
                id: post.id.clone(),
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dev_indices = HashSet::new();
    for label in [Label::Hof, Label::Not] {
        let mut class_indices: Vec<usize> = corpus
            .posts()
            .iter()
            .enumerate()
            .filter(|(_, p)| p.label == Some(label))
            .map(|(i, _)| i)
            .collect();
        if class_indices.is_empty() {
            continue;
        }
        let want = (dev_fraction * class_indices.len() as f64).round() as usize;
        if want == 0 || want >= class_indices.len() {
            return Err(CorpusError::InsufficientClassCount {
                label,
                count: class_indices.len(),
                fraction: dev_fraction,
            });
        }
        class_indices.shuffle(&mut rng);
        dev_indices.extend(class_indices.into_iter().take(want));
    }

    let mut train_posts = Vec::new();
    let mut dev_posts = Vec::new();
    for (i, post) in corpus.posts().iter().enumerate() {
        if dev_indices.contains(&i) {
            dev_posts.push(post.clone());
        } else {
            train_posts.push(post.clone());
        }
    }
    let language = corpus.language();
    Ok((
        Corpus::from_posts(train_posts, language)?,
        Corpus::from_posts(dev_posts, language)?,
    ))
}
