//! Seeded fine-tuning loop: AdamW over the trainable parameter partition,
//! fixed shuffled epoch order, per-epoch loss accounting.

use std::collections::HashMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::encoder::{ClassifierModel, EncoderError, ModelGrads, ParamBlock};

/// The fine-tuning recipe as data: 4 epochs, learning rate 5e-5, batch 16,
/// AdamW with weight decay 0.01.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub weight_decay: f64,
    /// Rescale per-sample loss by inverse class frequency. Off by default;
    /// the reference recipe uses plain unweighted loss.
    pub class_weighting: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 4,
            learning_rate: 5e-5,
            batch_size: 16,
            seed: 42,
            weight_decay: 0.01,
            class_weighting: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 || self.batch_size == 0 || self.learning_rate <= 0.0 {
            return Err(TrainError::InvalidConfig(format!(
                "epochs {} / batch_size {} / learning_rate {} out of range",
                self.epochs, self.batch_size, self.learning_rate
            )));
        }
        Ok(())
    }

    /// Stable hash of the configuration, used by the run registry.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(format!(
            "{}|{}|{}|{}|{}|{}",
            self.epochs,
            self.learning_rate,
            self.batch_size,
            self.seed,
            self.weight_decay,
            self.class_weighting
        ));
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// What one training run produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub config: TrainConfig,
    pub epoch_losses: Vec<f64>,
    pub optimizer_steps: usize,
    pub checkpoint: Option<String>,
    pub duration_secs: f64,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss {loss} at epoch {epoch}, step {step}")]
    NonFiniteLoss { loss: f64, epoch: usize, step: usize },
    #[error(transparent)]
    Encoder(#[from] EncoderError),
}

/// AdamW with decoupled weight decay. Frozen parameter blocks are skipped
/// entirely, so their values stay bit-identical.
pub struct AdamW {
    pub learning_rate: f64,
    pub weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: HashMap<String, Vec<f64>>,
    v: HashMap<String, Vec<f64>>,
}

impl AdamW {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        AdamW {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: HashMap::new(),
            v: HashMap::new(),
        }
    }

    pub fn step(&mut self, model: &mut ClassifierModel, grads: &ModelGrads) {
        self.t += 1;
        let freeze_layers = model.spec.freeze_layers;
        let freeze_embeddings = model.spec.freeze_embeddings;
        let frozen = |block: ParamBlock| match block {
            ParamBlock::Embeddings => freeze_layers > 0 && freeze_embeddings,
            ParamBlock::Layer(i) => i < freeze_layers,
            ParamBlock::Head => false,
        };
        let bias1 = 1.0 - self.beta1.powi(self.t as i32);
        let bias2 = 1.0 - self.beta2.powi(self.t as i32);
        let grad_views = grads.params();
        for ((name, block, mut param), (gname, _, grad)) in
            model.params_mut().into_iter().zip(grad_views)
        {
            debug_assert_eq!(name, gname);
            if frozen(block) {
                continue;
            }
            let m = self.m.entry(name.clone()).or_insert_with(|| vec![0.0; param.len()]);
            let v = self.v.entry(name).or_insert_with(|| vec![0.0; param.len()]);
            for ((p, &g), (m, v)) in param
                .iter_mut()
                .zip(grad.iter())
                .zip(m.iter_mut().zip(v.iter_mut()))
            {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= self.learning_rate * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * *p);
            }
        }
    }
}

/// One supervised step: forward, cross-entropy, backward, optimizer update
/// on the trainable partition. Returns the batch loss.
pub fn training_step(
    model: &mut ClassifierModel,
    batch: &[Vec<u32>],
    labels: &[u8],
    class_weights: Option<[f64; 2]>,
    optimizer: &mut AdamW,
    grads: &mut ModelGrads,
) -> Result<f64, TrainError> {
    grads.zero();
    let loss = model.loss_and_grads(batch, labels, class_weights, grads);
    if !loss.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            loss,
            epoch: 0,
            step: 0,
        });
    }
    optimizer.step(model, grads);
    Ok(loss)
}

fn class_weights_for(labels: &[u8]) -> [f64; 2] {
    let n = labels.len() as f64;
    let n_hof = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n_not = n - n_hof;
    // inverse-frequency weights, mean 1 on a balanced set
    let weight = |count: f64| if count > 0.0 { n / (2.0 * count) } else { 0.0 };
    [weight(n_not), weight(n_hof)]
}

/// Fine-tune `model` on normalized texts with encoded labels.
///
/// Exactly `config.epochs` passes over the data in seeded shuffled order;
/// one `RunRecord` loss entry per epoch. Frozen blocks are untouched.
pub fn train(
    model: &mut ClassifierModel,
    texts: &[String],
    labels: &[u8],
    config: &TrainConfig,
) -> Result<RunRecord, TrainError> {
    config.validate()?;
    if texts.is_empty() {
        return Err(TrainError::EmptyCorpus);
    }
    assert_eq!(texts.len(), labels.len());
    let start = Instant::now();

    let tokenized: Vec<Vec<u32>> = texts
        .iter()
        .map(|t| model.tokenize(t))
        .collect::<Result<_, _>>()?;
    let class_weights = config.class_weighting.then(|| class_weights_for(labels));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut optimizer = AdamW::new(config.learning_rate, config.weight_decay);
    let mut grads = model.grads_buffer();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut steps = 0usize;

    let mut indices: Vec<usize> = (0..texts.len()).collect();
    for epoch in 0..config.epochs {
        indices.shuffle(&mut rng);
        let mut batch_losses = Vec::new();
        for chunk in indices.chunks(config.batch_size) {
            let batch: Vec<Vec<u32>> = chunk.iter().map(|&i| tokenized[i].clone()).collect();
            let batch_labels: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
            grads.zero();
            let loss = model.loss_and_grads(&batch, &batch_labels, class_weights, &mut grads);
            if !loss.is_finite() {
                return Err(TrainError::NonFiniteLoss {
                    loss,
                    epoch,
                    step: steps,
                });
            }
            optimizer.step(model, &mut grads);
            steps += 1;
            batch_losses.push(loss);
        }
        epoch_losses.push(batch_losses.iter().sum::<f64>() / batch_losses.len() as f64);
    }

    let run_id = {
        let mut hasher = Sha256::new();
        hasher.update(config.content_hash());
        hasher.update(
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .unwrap_or_default()
                .as_nanos()
                .to_le_bytes(),
        );
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect::<String>()
    };

    Ok(RunRecord {
        run_id,
        config: config.clone(),
        epoch_losses,
        optimizer_steps: steps,
        checkpoint: None,
        duration_secs: start.elapsed().as_secs_f64(),
    })
}

/// Predicted label (argmax) and probability of HOF per text.
pub fn predict(
    model: &ClassifierModel,
    texts: &[String],
) -> Result<Vec<(u8, f64)>, EncoderError> {
    let mut out = Vec::with_capacity(texts.len());
    for text in texts {
        let tokens = model.tokenize(text)?;
        let logits = model.forward_tokens(&tokens);
        let probs = crate::nn::softmax(logits.as_slice().unwrap());
        let label = if probs[1] >= 0.5 { 1 } else { 0 };
        out.push((label, probs[1]));
    }
    Ok(out)
}
