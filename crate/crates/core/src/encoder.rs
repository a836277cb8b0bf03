//! Pretrained-encoder abstraction: backbone registry, a small BERT-style
//! transformer with hand-written backward pass, pooling, layer freezing and
//! the binary classification head.
//!
//! Real checkpoints are resolved from a local cache directory in this
//! artifact's own checkpoint format; the `tiny-random-2layer` entry builds a
//! seeded 2-layer/32-dim backbone in memory so the whole test suite runs
//! without downloads.

use std::collections::BTreeMap;
use std::path::PathBuf;

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::nn::{gelu, gelu_grad, sample_normal, softmax, LayerNorm, LayerNormCache, Linear};

pub const PAD_TOKEN: u32 = 0;
pub const CLS_TOKEN: u32 = 1;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("unknown backbone {0:?}")]
    UnknownBackbone(String),
    #[error("checkpoint for backbone {name:?} not available at {looked_in}")]
    CheckpointUnavailable { name: String, looked_in: String },
    #[error("freeze_layers {requested} exceeds layer count {layers}")]
    FreezeOutOfRange { requested: usize, layers: usize },
    #[error("sequence of {len} tokens exceeds max_sequence_length {max} and truncation is disabled")]
    SequenceTooLong { len: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Bert,
    Sbert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LanguageScope {
    Mono,
    Multi,
}

/// How token states collapse into one sentence vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pooling {
    ClsToken,
    MeanPool,
}

/// One registry row: symbolic name plus everything needed to resolve and
/// configure the backbone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackboneEntry {
    pub name: String,
    pub locator: String,
    pub scope: LanguageScope,
    pub family: Family,
    pub layers: usize,
    pub hidden_dim: usize,
}

/// Symbolic name -> backbone resolution table.
#[derive(Debug, Clone)]
pub struct BackboneRegistry {
    entries: BTreeMap<String, BackboneEntry>,
}

impl BackboneRegistry {
    /// The models evaluated in the experiments, plus the deterministic test
    /// fixture backbone.
    pub fn builtin() -> Self {
        let mut entries = BTreeMap::new();
        let rows = [
            ("bengali-sbert", "l3cube-pune/bengali-sentence-bert-nli", LanguageScope::Mono, Family::Sbert),
            ("bengali-bert", "l3cube-pune/bengali-bert", LanguageScope::Mono, Family::Bert),
            ("assamese-bert", "l3cube-pune/assamese-bert", LanguageScope::Mono, Family::Bert),
            ("gujarati-sbert", "l3cube-pune/gujarati-sentence-bert-nli", LanguageScope::Mono, Family::Sbert),
            ("indic-sbert", "l3cube-pune/indic-sentence-bert-nli", LanguageScope::Multi, Family::Sbert),
            ("indic-bert", "ai4bharat/indic-bert", LanguageScope::Multi, Family::Bert),
        ];
        for (name, locator, scope, family) in rows {
            entries.insert(
                name.to_string(),
                BackboneEntry {
                    name: name.to_string(),
                    locator: locator.to_string(),
                    scope,
                    family,
                    layers: 12,
                    hidden_dim: 768,
                },
            );
        }
        entries.insert(
            "tiny-random-2layer".to_string(),
            BackboneEntry {
                name: "tiny-random-2layer".to_string(),
                locator: "test:tiny-random".to_string(),
                scope: LanguageScope::Mono,
                family: Family::Sbert,
                layers: 2,
                hidden_dim: 32,
            },
        );
        BackboneRegistry { entries }
    }

    pub fn get(&self, name: &str) -> Result<&BackboneEntry, EncoderError> {
        self.entries
            .get(name)
            .ok_or_else(|| EncoderError::UnknownBackbone(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Symbolic encoder identity plus freezing and head configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub backbone: String,
    pub pooling: Pooling,
    pub freeze_layers: usize,
    /// Freeze the embedding block together with the bottom layers.
    pub freeze_embeddings: bool,
    pub num_classes: usize,
    pub max_sequence_length: usize,
    pub truncate: bool,
}

impl ModelSpec {
    /// Defaults for a registry entry: family-appropriate pooling, the
    /// freeze-six recipe, 128-token sequences.
    pub fn for_entry(entry: &BackboneEntry) -> Self {
        ModelSpec {
            backbone: entry.name.clone(),
            pooling: match entry.family {
                Family::Bert => Pooling::ClsToken,
                Family::Sbert => Pooling::MeanPool,
            },
            freeze_layers: 6.min(entry.layers),
            freeze_embeddings: true,
            num_classes: 2,
            max_sequence_length: 128,
            truncate: true,
        }
    }
}

/// Structural hyperparameters of one backbone instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub vocab_size: usize,
    pub dim: usize,
    pub ffn_dim: usize,
    pub num_layers: usize,
    pub max_len: usize,
}

/// Whitespace tokenizer hashing each token into a fixed vocabulary.
/// Id 0 is padding, id 1 the CLS marker prepended for CLS pooling.
#[derive(Debug, Clone)]
pub struct HashTokenizer {
    pub vocab_size: usize,
    pub add_cls: bool,
}

impl HashTokenizer {
    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        let mut tokens = Vec::new();
        if self.add_cls {
            tokens.push(CLS_TOKEN);
        }
        for word in text.split_whitespace() {
            let mut h: u64 = 0xcbf2_9ce4_8422_2325;
            for byte in word.as_bytes() {
                h ^= u64::from(*byte);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            tokens.push(2 + (h % (self.vocab_size as u64 - 2)) as u32);
        }
        tokens
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParamBlock {
    Embeddings,
    Layer(usize),
    Head,
}

#[derive(Debug, Clone)]
pub struct EncoderLayer {
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub ln1: LayerNorm,
    pub ff1: Linear,
    pub ff2: Linear,
    pub ln2: LayerNorm,
}

impl EncoderLayer {
    fn init(rng: &mut ChaCha8Rng, dim: usize, ffn_dim: usize) -> Self {
        let std = 0.02;
        EncoderLayer {
            wq: Linear::init(rng, dim, dim, std),
            wk: Linear::init(rng, dim, dim, std),
            wv: Linear::init(rng, dim, dim, std),
            wo: Linear::init(rng, dim, dim, std),
            ln1: LayerNorm::new(dim),
            ff1: Linear::init(rng, dim, ffn_dim, std),
            ff2: Linear::init(rng, ffn_dim, dim, std),
            ln2: LayerNorm::new(dim),
        }
    }

    fn zeros(dim: usize, ffn_dim: usize) -> Self {
        EncoderLayer {
            wq: Linear::zeros(dim, dim),
            wk: Linear::zeros(dim, dim),
            wv: Linear::zeros(dim, dim),
            wo: Linear::zeros(dim, dim),
            ln1: LayerNorm {
                gamma: Array1::zeros(dim),
                beta: Array1::zeros(dim),
                eps: 1e-5,
            },
            ff1: Linear::zeros(dim, ffn_dim),
            ff2: Linear::zeros(ffn_dim, dim),
            ln2: LayerNorm {
                gamma: Array1::zeros(dim),
                beta: Array1::zeros(dim),
                eps: 1e-5,
            },
        }
    }
}

/// Single-head transformer encoder.
#[derive(Debug, Clone)]
pub struct Backbone {
    pub config: BackboneConfig,
    pub tok_emb: Array2<f64>,
    pub pos_emb: Array2<f64>,
    pub emb_ln: LayerNorm,
    pub layers: Vec<EncoderLayer>,
}

struct LayerCache {
    x: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    attn: Array2<f64>,
    ctx: Array2<f64>,
    ln1: LayerNormCache,
    h: Array2<f64>,
    u: Array2<f64>,
    f: Array2<f64>,
    ln2: LayerNormCache,
}

pub struct SeqCache {
    tokens: Vec<u32>,
    mask: Vec<bool>,
    emb_ln: LayerNormCache,
    layers: Vec<LayerCache>,
}

impl Backbone {
    pub fn random(config: BackboneConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let std = 0.02;
        let tok_emb =
            Array2::from_shape_fn((config.vocab_size, config.dim), |_| sample_normal(&mut rng) * std);
        let pos_emb =
            Array2::from_shape_fn((config.max_len, config.dim), |_| sample_normal(&mut rng) * std);
        let emb_ln = LayerNorm::new(config.dim);
        let layers = (0..config.num_layers)
            .map(|_| EncoderLayer::init(&mut rng, config.dim, config.ffn_dim))
            .collect();
        Backbone {
            config,
            tok_emb,
            pos_emb,
            emb_ln,
            layers,
        }
    }

    pub fn zeros(config: BackboneConfig) -> Self {
        let layers = (0..config.num_layers)
            .map(|_| EncoderLayer::zeros(config.dim, config.ffn_dim))
            .collect();
        Backbone {
            tok_emb: Array2::zeros((config.vocab_size, config.dim)),
            pos_emb: Array2::zeros((config.max_len, config.dim)),
            emb_ln: LayerNorm {
                gamma: Array1::zeros(config.dim),
                beta: Array1::zeros(config.dim),
                eps: 1e-5,
            },
            layers,
            config,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Backbone::zeros(self.config.clone())
    }

    /// Encode one token sequence into per-token hidden states.
    /// Padding positions are masked out of attention, so real positions are
    /// unaffected by trailing PAD tokens.
    pub fn forward_seq(&self, tokens: &[u32]) -> (Array2<f64>, SeqCache) {
        let len = tokens.len();
        let dim = self.config.dim;
        let mask: Vec<bool> = tokens.iter().map(|&t| t != PAD_TOKEN).collect();
        let mut embedded = Array2::zeros((len, dim));
        for (i, &t) in tokens.iter().enumerate() {
            for j in 0..dim {
                embedded[(i, j)] = self.tok_emb[(t as usize, j)] + self.pos_emb[(i, j)];
            }
        }
        let (mut x, emb_ln) = self.emb_ln.forward(&embedded);
        let scale = 1.0 / (dim as f64).sqrt();
        let mut layer_caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let q = layer.wq.forward(&x);
            let k = layer.wk.forward(&x);
            let v = layer.wv.forward(&x);
            let mut scores = q.dot(&k.t()) * scale;
            for j in 0..len {
                if !mask[j] {
                    for i in 0..len {
                        scores[(i, j)] = -1e30;
                    }
                }
            }
            let mut attn = Array2::zeros((len, len));
            for i in 0..len {
                let row: Vec<f64> = (0..len).map(|j| scores[(i, j)]).collect();
                for (j, p) in softmax(&row).into_iter().enumerate() {
                    attn[(i, j)] = p;
                }
            }
            let ctx = attn.dot(&v);
            let attn_out = layer.wo.forward(&ctx);
            let res1 = &x + &attn_out;
            let (h, ln1) = layer.ln1.forward(&res1);
            let u = layer.ff1.forward(&h);
            let f = u.mapv(gelu);
            let ff_out = layer.ff2.forward(&f);
            let res2 = &h + &ff_out;
            let (out, ln2) = layer.ln2.forward(&res2);
            layer_caches.push(LayerCache {
                x,
                q,
                k,
                v,
                attn,
                ctx,
                ln1,
                h,
                u,
                f,
                ln2,
            });
            x = out;
        }
        (
            x,
            SeqCache {
                tokens: tokens.to_vec(),
                mask,
                emb_ln,
                layers: layer_caches,
            },
        )
    }

    /// Backpropagate through the encoder stack, accumulating into `grads`.
    pub fn backward_seq(&self, cache: &SeqCache, d_out: Array2<f64>, grads: &mut Backbone) {
        let scale = 1.0 / (self.config.dim as f64).sqrt();
        let mut dy = d_out;
        for (layer, lgrad, lc) in itertools_rev(&self.layers, &mut grads.layers, &cache.layers) {
            let d_res2 = layer.ln2.backward(&lc.ln2, &dy, &mut lgrad.ln2);
            let mut d_h = d_res2.clone();
            let d_f = layer.ff2.backward(&lc.f, &d_res2, &mut lgrad.ff2);
            let d_u = &d_f * &lc.u.mapv(gelu_grad);
            d_h += &layer.ff1.backward(&lc.h, &d_u, &mut lgrad.ff1);
            let d_res1 = layer.ln1.backward(&lc.ln1, &d_h, &mut lgrad.ln1);
            let mut d_x = d_res1.clone();
            let d_ctx = layer.wo.backward(&lc.ctx, &d_res1, &mut lgrad.wo);
            let d_attn = d_ctx.dot(&lc.v.t());
            let d_v = lc.attn.t().dot(&d_ctx);
            // softmax backward, row-wise
            let len = lc.attn.nrows();
            let mut d_scores = Array2::zeros((len, len));
            for i in 0..len {
                let dot: f64 = (0..len).map(|j| lc.attn[(i, j)] * d_attn[(i, j)]).sum();
                for j in 0..len {
                    d_scores[(i, j)] = lc.attn[(i, j)] * (d_attn[(i, j)] - dot);
                }
            }
            let d_q = d_scores.dot(&lc.k) * scale;
            let d_k = d_scores.t().dot(&lc.q) * scale;
            d_x += &layer.wq.backward(&lc.x, &d_q, &mut lgrad.wq);
            d_x += &layer.wk.backward(&lc.x, &d_k, &mut lgrad.wk);
            d_x += &layer.wv.backward(&lc.x, &d_v, &mut lgrad.wv);
            dy = d_x;
        }
        let d_embedded = self.emb_ln.backward(&cache.emb_ln, &dy, &mut grads.emb_ln);
        for (i, &t) in cache.tokens.iter().enumerate() {
            for j in 0..self.config.dim {
                grads.tok_emb[(t as usize, j)] += d_embedded[(i, j)];
                grads.pos_emb[(i, j)] += d_embedded[(i, j)];
            }
        }
    }

    pub fn params(&self) -> Vec<(String, ParamBlock, ArrayViewD<'_, f64>)> {
        let mut out: Vec<(String, ParamBlock, ArrayViewD<'_, f64>)> = vec![
            ("embeddings.token".into(), ParamBlock::Embeddings, self.tok_emb.view().into_dyn()),
            ("embeddings.position".into(), ParamBlock::Embeddings, self.pos_emb.view().into_dyn()),
            ("embeddings.ln.gamma".into(), ParamBlock::Embeddings, self.emb_ln.gamma.view().into_dyn()),
            ("embeddings.ln.beta".into(), ParamBlock::Embeddings, self.emb_ln.beta.view().into_dyn()),
        ];
        for (i, layer) in self.layers.iter().enumerate() {
            let block = ParamBlock::Layer(i);
            let pairs: Vec<(&str, ArrayViewD<'_, f64>)> = vec![
                ("attn.q.w", layer.wq.w.view().into_dyn()),
                ("attn.q.b", layer.wq.b.view().into_dyn()),
                ("attn.k.w", layer.wk.w.view().into_dyn()),
                ("attn.k.b", layer.wk.b.view().into_dyn()),
                ("attn.v.w", layer.wv.w.view().into_dyn()),
                ("attn.v.b", layer.wv.b.view().into_dyn()),
                ("attn.o.w", layer.wo.w.view().into_dyn()),
                ("attn.o.b", layer.wo.b.view().into_dyn()),
                ("ln1.gamma", layer.ln1.gamma.view().into_dyn()),
                ("ln1.beta", layer.ln1.beta.view().into_dyn()),
                ("ffn.1.w", layer.ff1.w.view().into_dyn()),
                ("ffn.1.b", layer.ff1.b.view().into_dyn()),
                ("ffn.2.w", layer.ff2.w.view().into_dyn()),
                ("ffn.2.b", layer.ff2.b.view().into_dyn()),
                ("ln2.gamma", layer.ln2.gamma.view().into_dyn()),
                ("ln2.beta", layer.ln2.beta.view().into_dyn()),
            ];
            for (suffix, view) in pairs {
                out.push((format!("layer.{i}.{suffix}"), block, view));
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, ParamBlock, ArrayViewMutD<'_, f64>)> {
        let mut out: Vec<(String, ParamBlock, ArrayViewMutD<'_, f64>)> = vec![
            ("embeddings.token".into(), ParamBlock::Embeddings, self.tok_emb.view_mut().into_dyn()),
            ("embeddings.position".into(), ParamBlock::Embeddings, self.pos_emb.view_mut().into_dyn()),
            ("embeddings.ln.gamma".into(), ParamBlock::Embeddings, self.emb_ln.gamma.view_mut().into_dyn()),
            ("embeddings.ln.beta".into(), ParamBlock::Embeddings, self.emb_ln.beta.view_mut().into_dyn()),
        ];
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let block = ParamBlock::Layer(i);
            let pairs: Vec<(&str, ArrayViewMutD<'_, f64>)> = vec![
                ("attn.q.w", layer.wq.w.view_mut().into_dyn()),
                ("attn.q.b", layer.wq.b.view_mut().into_dyn()),
                ("attn.k.w", layer.wk.w.view_mut().into_dyn()),
                ("attn.k.b", layer.wk.b.view_mut().into_dyn()),
                ("attn.v.w", layer.wv.w.view_mut().into_dyn()),
                ("attn.v.b", layer.wv.b.view_mut().into_dyn()),
                ("attn.o.w", layer.wo.w.view_mut().into_dyn()),
                ("attn.o.b", layer.wo.b.view_mut().into_dyn()),
                ("ln1.gamma", layer.ln1.gamma.view_mut().into_dyn()),
                ("ln1.beta", layer.ln1.beta.view_mut().into_dyn()),
                ("ffn.1.w", layer.ff1.w.view_mut().into_dyn()),
                ("ffn.1.b", layer.ff1.b.view_mut().into_dyn()),
                ("ffn.2.w", layer.ff2.w.view_mut().into_dyn()),
                ("ffn.2.b", layer.ff2.b.view_mut().into_dyn()),
                ("ln2.gamma", layer.ln2.gamma.view_mut().into_dyn()),
                ("ln2.beta", layer.ln2.beta.view_mut().into_dyn()),
            ];
            for (suffix, view) in pairs {
                out.push((format!("layer.{i}.{suffix}"), block, view));
            }
        }
        out
    }
}

/// Reverse zip over layers, their grads and their caches.
fn itertools_rev<'a>(
    layers: &'a [EncoderLayer],
    grads: &'a mut [EncoderLayer],
    caches: &'a [LayerCache],
) -> impl Iterator<Item = (&'a EncoderLayer, &'a mut EncoderLayer, &'a LayerCache)> {
    layers
        .iter()
        .rev()
        .zip(grads.iter_mut().rev())
        .zip(caches.iter().rev())
        .map(|((l, g), c)| (l, g, c))
}

/// Gradient buffers mirroring a classifier model's parameters.
pub struct ModelGrads {
    pub backbone: Backbone,
    pub head: Linear,
}

impl ModelGrads {
    pub fn zero(&mut self) {
        for (_, _, mut view) in self.backbone.params_mut() {
            view.fill(0.0);
        }
        self.head.w.fill(0.0);
        self.head.b.fill(0.0);
    }

    pub fn params(&self) -> Vec<(String, ParamBlock, ArrayViewD<'_, f64>)> {
        let mut out = self.backbone.params();
        out.push(("head.w".into(), ParamBlock::Head, self.head.w.view().into_dyn()));
        out.push(("head.b".into(), ParamBlock::Head, self.head.b.view().into_dyn()));
        out
    }
}

/// Backbone + pooling + linear head with a frozen/trainable partition.
#[derive(Debug, Clone)]
pub struct ClassifierModel {
    pub spec: ModelSpec,
    pub backbone: Backbone,
    pub head: Linear,
    pub tokenizer: HashTokenizer,
}

impl ClassifierModel {
    /// Assemble a model around an existing backbone; the head is freshly
    /// initialized from the seed.
    pub fn new(spec: ModelSpec, backbone: Backbone, head_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(head_seed);
        let head = Linear::init(&mut rng, backbone.config.dim, spec.num_classes, 0.02);
        let tokenizer = HashTokenizer {
            vocab_size: backbone.config.vocab_size,
            add_cls: spec.pooling == Pooling::ClsToken,
        };
        ClassifierModel {
            spec,
            backbone,
            head,
            tokenizer,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.backbone.config.num_layers
    }

    /// Tokenize and truncate text per the model spec.
    pub fn tokenize(&self, text: &str) -> Result<Vec<u32>, EncoderError> {
        let mut tokens = self.tokenizer.tokenize(text);
        let max = self.spec.max_sequence_length;
        if tokens.len() > max {
            if !self.spec.truncate {
                return Err(EncoderError::SequenceTooLong {
                    len: tokens.len(),
                    max,
                });
            }
            tokens.truncate(max);
        }
        Ok(tokens)
    }

    /// Mark the embedding block plus encoder layers `[0, freeze_layers)` as
    /// non-trainable. Returns (frozen, trainable) parameter counts.
    pub fn apply_freeze(&mut self, freeze_layers: usize) -> Result<(usize, usize), EncoderError> {
        if freeze_layers > self.num_layers() {
            return Err(EncoderError::FreezeOutOfRange {
                requested: freeze_layers,
                layers: self.num_layers(),
            });
        }
        self.spec.freeze_layers = freeze_layers;
        Ok(self.partition_counts())
    }

    pub fn is_frozen(&self, block: ParamBlock) -> bool {
        match block {
            ParamBlock::Embeddings => self.spec.freeze_layers > 0 && self.spec.freeze_embeddings,
            ParamBlock::Layer(i) => i < self.spec.freeze_layers,
            ParamBlock::Head => false,
        }
    }

    /// (frozen, trainable) parameter counts; the two always sum to the total.
    pub fn partition_counts(&self) -> (usize, usize) {
        let mut frozen = 0;
        let mut trainable = 0;
        for (_, block, view) in self.params() {
            if self.is_frozen(block) {
                frozen += view.len();
            } else {
                trainable += view.len();
            }
        }
        (frozen, trainable)
    }

    pub fn params(&self) -> Vec<(String, ParamBlock, ArrayViewD<'_, f64>)> {
        let mut out = self.backbone.params();
        out.push(("head.w".into(), ParamBlock::Head, self.head.w.view().into_dyn()));
        out.push(("head.b".into(), ParamBlock::Head, self.head.b.view().into_dyn()));
        out
    }

    pub fn params_mut(&mut self) -> Vec<(String, ParamBlock, ArrayViewMutD<'_, f64>)> {
        let mut out = self.backbone.params_mut();
        out.push(("head.w".into(), ParamBlock::Head, self.head.w.view_mut().into_dyn()));
        out.push(("head.b".into(), ParamBlock::Head, self.head.b.view_mut().into_dyn()));
        out
    }

    pub fn grads_buffer(&self) -> ModelGrads {
        ModelGrads {
            backbone: self.backbone.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    /// SHA-256 over the raw parameter bytes of one block, for freeze audits.
    pub fn block_checksum(&self, block: ParamBlock) -> [u8; 32] {
        let mut hasher = Sha256::new();
        for (_, b, view) in self.params() {
            if b == block {
                for v in view.iter() {
                    hasher.update(v.to_le_bytes());
                }
            }
        }
        hasher.finalize().into()
    }

    fn pool(&self, hidden: &Array2<f64>, mask: &[bool]) -> Array1<f64> {
        match self.spec.pooling {
            Pooling::ClsToken => hidden.row(0).to_owned(),
            Pooling::MeanPool => {
                let real: Vec<usize> = mask
                    .iter()
                    .enumerate()
                    .filter(|(_, &m)| m)
                    .map(|(i, _)| i)
                    .collect();
                if real.is_empty() {
                    return Array1::zeros(hidden.ncols());
                }
                let mut pooled = Array1::zeros(hidden.ncols());
                for &i in &real {
                    pooled += &hidden.row(i);
                }
                pooled / real.len() as f64
            }
        }
    }

    /// Per-sequence logits; pooled per the model spec.
    pub fn forward_tokens(&self, tokens: &[u32]) -> Array1<f64> {
        if tokens.is_empty() {
            return self.head.b.clone();
        }
        let (hidden, cache) = self.backbone.forward_seq(tokens);
        let pooled = self.pool(&hidden, &cache.mask);
        pooled.dot(&self.head.w) + &self.head.b
    }

    /// Batch of token sequences -> logits matrix (batch x num_classes).
    pub fn forward(&self, batch: &[Vec<u32>]) -> Result<Array2<f64>, EncoderError> {
        let mut logits = Array2::zeros((batch.len(), self.spec.num_classes));
        for (i, tokens) in batch.iter().enumerate() {
            if tokens.len() > self.spec.max_sequence_length {
                return Err(EncoderError::SequenceTooLong {
                    len: tokens.len(),
                    max: self.spec.max_sequence_length,
                });
            }
            let row = self.forward_tokens(tokens);
            logits.row_mut(i).assign(&row);
        }
        Ok(logits)
    }

    /// Mean cross-entropy over the batch plus gradients for all parameters.
    /// Gradients accumulate into `grads`; zero it between steps.
    /// `class_weights`, when set, rescales each sample's loss by its label's
    /// weight (mean of weighted losses).
    pub fn loss_and_grads(
        &self,
        batch: &[Vec<u32>],
        labels: &[u8],
        class_weights: Option<[f64; 2]>,
        grads: &mut ModelGrads,
    ) -> f64 {
        assert_eq!(batch.len(), labels.len());
        let mut total_loss = 0.0;
        for (tokens, &label) in batch.iter().zip(labels) {
            let weight = class_weights.map_or(1.0, |w| w[label as usize]);
            let scale = weight / batch.len() as f64;
            if tokens.is_empty() {
                let probs = softmax(self.head.b.as_slice().unwrap());
                total_loss += -probs[label as usize].max(1e-300).ln() * weight;
                let mut dz = Array1::from_vec(probs);
                dz[label as usize] -= 1.0;
                grads.head.b += &(&dz * scale);
                continue;
            }
            let (hidden, cache) = self.backbone.forward_seq(tokens);
            let pooled = self.pool(&hidden, &cache.mask);
            let logits = pooled.dot(&self.head.w) + &self.head.b;
            let probs = softmax(logits.as_slice().unwrap());
            total_loss += -probs[label as usize].max(1e-300).ln() * weight;
            let mut dz = Array1::from_vec(probs);
            dz[label as usize] -= 1.0;
            dz *= scale;
            for r in 0..self.head.w.nrows() {
                for c in 0..self.head.w.ncols() {
                    grads.head.w[(r, c)] += pooled[r] * dz[c];
                }
            }
            grads.head.b += &dz;
            let d_pooled = self.head.w.dot(&dz);
            let mut d_hidden = Array2::zeros((tokens.len(), self.backbone.config.dim));
            match self.spec.pooling {
                Pooling::ClsToken => {
                    d_hidden.row_mut(0).assign(&d_pooled);
                }
                Pooling::MeanPool => {
                    let n_real = cache.mask.iter().filter(|&&m| m).count();
                    if n_real > 0 {
                        let share = &d_pooled / n_real as f64;
                        for (i, &m) in cache.mask.iter().enumerate() {
                            if m {
                                d_hidden.row_mut(i).assign(&share);
                            }
                        }
                    }
                }
            }
            self.backbone
                .backward_seq(&cache, d_hidden, &mut grads.backbone);
        }
        total_loss / batch.len() as f64
    }
}

/// Options controlling how `load_backbone` resolves checkpoints.
#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// Seed for the head initialization (and the tiny random backbone).
    pub seed: u64,
    /// Root directory holding converted checkpoints, one subdirectory per
    /// backbone name. Falls back to `OFFLANG_CACHE_DIR`.
    pub cache_root: Option<PathBuf>,
}

pub const CACHE_ENV_VAR: &str = "OFFLANG_CACHE_DIR";

pub fn tiny_backbone_config() -> BackboneConfig {
    BackboneConfig {
        vocab_size: 1024,
        dim: 32,
        ffn_dim: 64,
        num_layers: 2,
        max_len: 128,
    }
}

/// Resolve a symbolic backbone name into a ready classifier model with a
/// randomly initialized head.
pub fn load_backbone(
    name: &str,
    registry: &BackboneRegistry,
    spec_overrides: Option<ModelSpec>,
    options: &LoadOptions,
) -> Result<ClassifierModel, EncoderError> {
    let entry = registry.get(name)?;
    let spec = spec_overrides.unwrap_or_else(|| ModelSpec::for_entry(entry));
    if entry.locator.starts_with("test:") {
        let mut config = tiny_backbone_config();
        config.max_len = spec.max_sequence_length;
        let backbone = Backbone::random(config, options.seed);
        return Ok(ClassifierModel::new(spec, backbone, options.seed.wrapping_add(1)));
    }
    let root = options
        .cache_root
        .clone()
        .or_else(|| std::env::var_os(CACHE_ENV_VAR).map(PathBuf::from));
    if let Some(root) = root {
        let dir = root.join(&entry.name);
        if dir.join("manifest.txt").exists() {
            return crate::checkpoint::load_backbone_only(&dir, spec, options.seed).map_err(|_| {
                EncoderError::CheckpointUnavailable {
                    name: name.to_string(),
                    looked_in: dir.display().to_string(),
                }
            });
        }
        return Err(EncoderError::CheckpointUnavailable {
            name: name.to_string(),
            looked_in: dir.display().to_string(),
        });
    }
    Err(EncoderError::CheckpointUnavailable {
        name: name.to_string(),
        looked_in: format!("no cache root (set {CACHE_ENV_VAR})"),
    })
}

pub fn checksum_hex(bytes: &[u8; 32]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_model(pooling: Pooling) -> ClassifierModel {
        let registry = BackboneRegistry::builtin();
        let entry = registry.get("tiny-random-2layer").unwrap();
        let mut spec = ModelSpec::for_entry(entry);
        spec.pooling = pooling;
        spec.freeze_layers = 0;
        load_backbone(
            "tiny-random-2layer",
            &registry,
            Some(spec),
            &LoadOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn registry_resolves_known_backbones() {
        let registry = BackboneRegistry::builtin();
        for name in [
            "bengali-sbert",
            "bengali-bert",
            "assamese-bert",
            "gujarati-sbert",
            "indic-sbert",
            "indic-bert",
        ] {
            assert!(registry.get(name).is_ok(), "{name} missing");
        }
    }

    #[test]
    fn unknown_backbone_fails_loudly() {
        let registry = BackboneRegistry::builtin();
        let err = load_backbone("not-a-model", &registry, None, &LoadOptions::default());
        assert!(matches!(err, Err(EncoderError::UnknownBackbone(_))));
    }

    #[test]
    fn real_backbone_without_cache_is_unavailable() {
        let registry = BackboneRegistry::builtin();
        let options = LoadOptions {
            seed: 0,
            cache_root: Some(std::env::temp_dir().join("offlang-definitely-missing")),
        };
        let err = load_backbone("bengali-sbert", &registry, None, &options);
        assert!(matches!(err, Err(EncoderError::CheckpointUnavailable { .. })));
    }

    #[test]
    fn sbert_entries_default_to_mean_pooling() {
        let registry = BackboneRegistry::builtin();
        let spec = ModelSpec::for_entry(registry.get("bengali-sbert").unwrap());
        assert_eq!(spec.pooling, Pooling::MeanPool);
        let spec = ModelSpec::for_entry(registry.get("assamese-bert").unwrap());
        assert_eq!(spec.pooling, Pooling::ClsToken);
    }

    #[test]
    fn forward_has_batch_shape_and_finite_logits() {
        let model = tiny_model(Pooling::MeanPool);
        let batch: Vec<Vec<u32>> = ["ক খ", "গ", "ঘ ঙ চ", "ছ"]
            .iter()
            .map(|t| model.tokenize(t).unwrap())
            .collect();
        let logits = model.forward(&batch).unwrap();
        assert_eq!(logits.shape(), &[4, 2]);
        assert!(logits.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn duplicate_inputs_give_identical_rows() {
        let model = tiny_model(Pooling::ClsToken);
        let tokens = model.tokenize("ক খ গ").unwrap();
        let logits = model.forward(&[tokens.clone(), tokens]).unwrap();
        assert_eq!(logits.row(0), logits.row(1));
    }

    #[test]
    fn mean_pool_single_token_equals_projected_embedding() {
        let model = tiny_model(Pooling::MeanPool);
        let tokens = model.tokenize("শব্দ").unwrap();
        assert_eq!(tokens.len(), 1);
        let (hidden, _) = model.backbone.forward_seq(&tokens);
        let expected = hidden.row(0).dot(&model.head.w) + &model.head.b;
        let logits = model.forward_tokens(&tokens);
        for (a, b) in logits.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn padding_does_not_change_mean_pool_logits() {
        let model = tiny_model(Pooling::MeanPool);
        let tokens = model.tokenize("ক খ গ").unwrap();
        let mut padded = tokens.clone();
        padded.extend([PAD_TOKEN; 5]);
        let a = model.forward_tokens(&tokens);
        let b = model.forward_tokens(&padded);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-9, "{x} vs {y}");
        }
    }

    #[test]
    fn freeze_partition_covers_all_parameters() {
        let mut model = tiny_model(Pooling::MeanPool);
        let total: usize = model.params().iter().map(|(_, _, v)| v.len()).sum();
        for k in 0..=model.num_layers() {
            let (frozen, trainable) = model.apply_freeze(k).unwrap();
            assert_eq!(frozen + trainable, total, "freeze = {k}");
        }
        let (frozen, _) = model.apply_freeze(0).unwrap();
        assert_eq!(frozen, 0);
    }

    #[test]
    fn freeze_beyond_layer_count_is_rejected() {
        let mut model = tiny_model(Pooling::MeanPool);
        assert!(matches!(
            model.apply_freeze(3),
            Err(EncoderError::FreezeOutOfRange { requested: 3, layers: 2 })
        ));
    }

    #[test]
    fn freeze_all_layers_leaves_only_head_trainable() {
        let mut model = tiny_model(Pooling::MeanPool);
        let layers = model.num_layers();
        let (_, trainable) = model.apply_freeze(layers).unwrap();
        let head_params = model.head.w.len() + model.head.b.len();
        assert_eq!(trainable, head_params);
    }

    #[test]
    fn truncation_disabled_rejects_long_sequences() {
        let mut model = tiny_model(Pooling::MeanPool);
        model.spec.max_sequence_length = 2;
        model.spec.truncate = false;
        let err = model.tokenize("ক খ গ ঘ");
        assert!(matches!(err, Err(EncoderError::SequenceTooLong { .. })));
    }

    #[test]
    fn full_gradient_matches_finite_differences() {
        // checks the whole backward pass, not just the head
        let model = tiny_model(Pooling::MeanPool);
        let batch: Vec<Vec<u32>> = ["ক খ গ", "ঘ ঙ"]
            .iter()
            .map(|t| model.tokenize(t).unwrap())
            .collect();
        let labels = [1u8, 0];
        let mut grads = model.grads_buffer();
        model.loss_and_grads(&batch, &labels, None, &mut grads);

        let loss_of = |m: &ClassifierModel| {
            let mut g = m.grads_buffer();
            m.loss_and_grads(&batch, &labels, None, &mut g)
        };
        let h = 1e-5;
        // probe a few parameters from different blocks
        let probes = [
            ("embeddings.ln.gamma", 3),
            ("layer.0.attn.q.w", 17),
            ("layer.0.ffn.1.w", 5),
            ("layer.1.attn.v.w", 40),
            ("layer.1.ln2.beta", 2),
            ("head.w", 10),
        ];
        for (name, flat_idx) in probes {
            let analytic = {
                let found = grads
                    .params()
                    .into_iter()
                    .find(|(n, _, _)| n == name)
                    .unwrap();
                *found.2.iter().nth(flat_idx).unwrap()
            };
            let perturb = |delta: f64| {
                let mut m = model.clone();
                for (n, _, mut view) in m.params_mut() {
                    if n == name {
                        *view.iter_mut().nth(flat_idx).unwrap() += delta;
                    }
                }
                loss_of(&m)
            };
            let numeric = (perturb(h) - perturb(-h)) / (2.0 * h);
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                (analytic - numeric).abs() / denom < 1e-4,
                "{name}[{flat_idx}]: analytic {analytic} vs numeric {numeric}"
            );
        }
    }
}
