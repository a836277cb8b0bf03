//! Checkpoint persistence: a directory holding a plain-text manifest plus a
//! single binary weight payload. The manifest carries the model spec, the
//! backbone shape and a SHA-256 of the payload so corruption is caught at
//! load time.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encoder::{
    Backbone, BackboneConfig, ClassifierModel, HashTokenizer, ModelSpec, Pooling,
};
use crate::nn::Linear;

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const WEIGHTS_FILE: &str = "weights.bin";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint io error at {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed manifest: {0}")]
    Parse(String),
    #[error("weights checksum mismatch: manifest says {expected}, payload is {actual}")]
    ChecksumMismatch { expected: String, actual: String },
    #[error("checkpoint spec mismatch on {field}: checkpoint has {found}, expected {expected}")]
    SpecMismatch {
        field: String,
        found: String,
        expected: String,
    },
    #[error("weight record {0:?} missing from payload")]
    MissingWeight(String),
    #[error("weight record {name:?} has {found} values, expected {expected}")]
    ShapeMismatch {
        name: String,
        found: usize,
        expected: usize,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CheckpointError + '_ {
    move |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn pooling_str(p: Pooling) -> &'static str {
    match p {
        Pooling::ClsToken => "cls_token",
        Pooling::MeanPool => "mean_pool",
    }
}

fn parse_pooling(s: &str) -> Result<Pooling, CheckpointError> {
    match s {
        "cls_token" => Ok(Pooling::ClsToken),
        "mean_pool" => Ok(Pooling::MeanPool),
        other => Err(CheckpointError::Parse(format!("bad pooling {other:?}"))),
    }
}

fn serialize_weights(model: &ClassifierModel) -> Vec<u8> {
    let mut payload = Vec::new();
    for (name, _, view) in model.params() {
        payload.extend((name.len() as u32).to_le_bytes());
        payload.extend(name.as_bytes());
        let shape = view.shape();
        payload.extend((shape.len() as u32).to_le_bytes());
        for &d in shape {
            payload.extend((d as u32).to_le_bytes());
        }
        for v in view.iter() {
            payload.extend(v.to_le_bytes());
        }
    }
    payload
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Write model weights and manifest under `dir`, creating it if needed.
pub fn save(model: &ClassifierModel, dir: &Path) -> Result<(), CheckpointError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let payload = serialize_weights(model);
    let checksum = sha256_hex(&payload);

    let weights_path = dir.join(WEIGHTS_FILE);
    let mut f = std::fs::File::create(&weights_path).map_err(io_err(&weights_path))?;
    f.write_all(&payload).map_err(io_err(&weights_path))?;

    let spec = &model.spec;
    let config = &model.backbone.config;
    let mut manifest = String::new();
    let mut kv = |k: &str, v: String| manifest.push_str(&format!("{k} = {v}\n"));
    kv("format_version", FORMAT_VERSION.to_string());
    kv("backbone", spec.backbone.clone());
    kv("pooling", pooling_str(spec.pooling).to_string());
    kv("freeze_layers", spec.freeze_layers.to_string());
    kv("freeze_embeddings", spec.freeze_embeddings.to_string());
    kv("num_classes", spec.num_classes.to_string());
    kv("max_sequence_length", spec.max_sequence_length.to_string());
    kv("truncate", spec.truncate.to_string());
    kv("vocab_size", config.vocab_size.to_string());
    kv("dim", config.dim.to_string());
    kv("ffn_dim", config.ffn_dim.to_string());
    kv("num_layers", config.num_layers.to_string());
    kv("max_len", config.max_len.to_string());
    kv("weights_sha256", checksum);

    let manifest_path = dir.join(MANIFEST_FILE);
    std::fs::write(&manifest_path, manifest).map_err(io_err(&manifest_path))?;
    Ok(())
}

fn read_manifest(dir: &Path) -> Result<BTreeMap<String, String>, CheckpointError> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let mut map = BTreeMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CheckpointError::Parse(format!("bad line {line:?}")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn get<'a>(
    map: &'a BTreeMap<String, String>,
    key: &str,
) -> Result<&'a String, CheckpointError> {
    map.get(key)
        .ok_or_else(|| CheckpointError::Parse(format!("missing key {key:?}")))
}

fn get_num<T: std::str::FromStr>(
    map: &BTreeMap<String, String>,
    key: &str,
) -> Result<T, CheckpointError> {
    get(map, key)?
        .parse()
        .map_err(|_| CheckpointError::Parse(format!("bad value for {key:?}")))
}

fn read_weights(
    dir: &Path,
    expected_checksum: &str,
) -> Result<BTreeMap<String, Vec<f64>>, CheckpointError> {
    let path = dir.join(WEIGHTS_FILE);
    let mut payload = Vec::new();
    std::fs::File::open(&path)
        .map_err(io_err(&path))?
        .read_to_end(&mut payload)
        .map_err(io_err(&path))?;
    let actual = sha256_hex(&payload);
    if actual != expected_checksum {
        return Err(CheckpointError::ChecksumMismatch {
            expected: expected_checksum.to_string(),
            actual,
        });
    }
    let mut map = BTreeMap::new();
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, n: usize| -> Result<&[u8], CheckpointError> {
        if *cursor + n > payload.len() {
            return Err(CheckpointError::Parse("truncated weights payload".into()));
        }
        let slice = &payload[*cursor..*cursor + n];
        *cursor += n;
        Ok(slice)
    };
    while cursor < payload.len() {
        let name_len = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        let name = String::from_utf8(take(&mut cursor, name_len)?.to_vec())
            .map_err(|_| CheckpointError::Parse("non-utf8 weight name".into()))?;
        let ndim = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
        let mut count = 1usize;
        for _ in 0..ndim {
            let d = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
            count *= d;
        }
        let bytes = take(&mut cursor, count * 8)?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        map.insert(name, values);
    }
    Ok(map)
}

fn config_from_manifest(
    map: &BTreeMap<String, String>,
) -> Result<BackboneConfig, CheckpointError> {
    Ok(BackboneConfig {
        vocab_size: get_num(map, "vocab_size")?,
        dim: get_num(map, "dim")?,
        ffn_dim: get_num(map, "ffn_dim")?,
        num_layers: get_num(map, "num_layers")?,
        max_len: get_num(map, "max_len")?,
    })
}

fn spec_from_manifest(map: &BTreeMap<String, String>) -> Result<ModelSpec, CheckpointError> {
    Ok(ModelSpec {
        backbone: get(map, "backbone")?.clone(),
        pooling: parse_pooling(get(map, "pooling")?)?,
        freeze_layers: get_num(map, "freeze_layers")?,
        freeze_embeddings: get_num(map, "freeze_embeddings")?,
        num_classes: get_num(map, "num_classes")?,
        max_sequence_length: get_num(map, "max_sequence_length")?,
        truncate: get_num(map, "truncate")?,
    })
}

fn fill_model(
    model: &mut ClassifierModel,
    weights: &BTreeMap<String, Vec<f64>>,
    require_head: bool,
) -> Result<(), CheckpointError> {
    for (name, _, mut view) in model.params_mut() {
        let stored = match weights.get(&name) {
            Some(v) => v,
            None if !require_head && name.starts_with("head.") => continue,
            None => return Err(CheckpointError::MissingWeight(name)),
        };
        if stored.len() != view.len() {
            return Err(CheckpointError::ShapeMismatch {
                name,
                found: stored.len(),
                expected: view.len(),
            });
        }
        for (slot, &v) in view.iter_mut().zip(stored) {
            *slot = v;
        }
    }
    Ok(())
}

/// Load a full model (backbone + trained head) from a checkpoint directory.
pub fn load(dir: &Path) -> Result<ClassifierModel, CheckpointError> {
    let manifest = read_manifest(dir)?;
    let spec = spec_from_manifest(&manifest)?;
    let config = config_from_manifest(&manifest)?;
    let weights = read_weights(dir, get(&manifest, "weights_sha256")?)?;
    let backbone = Backbone::zeros(config);
    let tokenizer = HashTokenizer {
        vocab_size: backbone.config.vocab_size,
        add_cls: spec.pooling == Pooling::ClsToken,
    };
    let mut model = ClassifierModel {
        head: Linear::zeros(backbone.config.dim, spec.num_classes),
        spec,
        backbone,
        tokenizer,
    };
    fill_model(&mut model, &weights, true)?;
    Ok(model)
}

/// Load with an expected spec; any divergence is an explicit error.
pub fn load_with_spec(
    dir: &Path,
    expected: &ModelSpec,
) -> Result<ClassifierModel, CheckpointError> {
    let model = load(dir)?;
    let fields = [
        ("backbone", model.spec.backbone.clone(), expected.backbone.clone()),
        (
            "pooling",
            pooling_str(model.spec.pooling).to_string(),
            pooling_str(expected.pooling).to_string(),
        ),
        (
            "freeze_layers",
            model.spec.freeze_layers.to_string(),
            expected.freeze_layers.to_string(),
        ),
        (
            "num_classes",
            model.spec.num_classes.to_string(),
            expected.num_classes.to_string(),
        ),
        (
            "max_sequence_length",
            model.spec.max_sequence_length.to_string(),
            expected.max_sequence_length.to_string(),
        ),
    ];
    for (field, found, want) in fields {
        if found != want {
            return Err(CheckpointError::SpecMismatch {
                field: field.to_string(),
                found,
                expected: want,
            });
        }
    }
    Ok(model)
}

/// Load only the backbone weights from a converted checkpoint, attaching a
/// freshly seeded head. Used when resolving pretrained registry entries.
pub fn load_backbone_only(
    dir: &Path,
    spec: ModelSpec,
    head_seed: u64,
) -> Result<ClassifierModel, CheckpointError> {
    let manifest = read_manifest(dir)?;
    let config = config_from_manifest(&manifest)?;
    let weights = read_weights(dir, get(&manifest, "weights_sha256")?)?;
    let backbone = Backbone::zeros(config);
    let mut model = ClassifierModel::new(spec, backbone, head_seed);
    fill_model(&mut model, &weights, false)?;
    Ok(model)
}
