//! Minimal neural-network primitives with hand-written backward passes.
//!
//! Everything runs in f64 on ndarray with no threading, so results are
//! bit-reproducible for a fixed seed.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Fully connected layer `y = x W + b` with `W: d_in x d_out`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

impl Linear {
    pub fn init(rng: &mut ChaCha8Rng, d_in: usize, d_out: usize, std: f64) -> Self {
        let w = Array2::from_shape_fn((d_in, d_out), |_| sample_normal(rng) * std);
        Linear {
            w,
            b: Array1::zeros(d_out),
        }
    }

    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Linear {
            w: Array2::zeros((d_in, d_out)),
            b: Array1::zeros(d_out),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Linear {
            w: Array2::zeros(self.w.raw_dim()),
            b: Array1::zeros(self.b.raw_dim()),
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.w) + &self.b
    }

    /// Accumulates dW/db into `grad` and returns dL/dx.
    pub fn backward(&self, x: &Array2<f64>, dy: &Array2<f64>, grad: &mut Linear) -> Array2<f64> {
        grad.w += &x.t().dot(dy);
        grad.b += &dy.sum_axis(Axis(0));
        dy.dot(&self.w.t())
    }
}

/// Per-row layer normalization with learned scale and shift.
#[derive(Debug, Clone)]
pub struct LayerNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub eps: f64,
}

/// Forward cache needed by the layernorm backward pass.
pub struct LayerNormCache {
    pub xhat: Array2<f64>,
    pub inv_std: Array1<f64>,
}

impl LayerNorm {
    pub fn new(dim: usize) -> Self {
        LayerNorm {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            eps: 1e-5,
        }
    }

    pub fn zeros_like(&self) -> Self {
        LayerNorm {
            gamma: Array1::zeros(self.gamma.raw_dim()),
            beta: Array1::zeros(self.beta.raw_dim()),
            eps: self.eps,
        }
    }

    pub fn forward(&self, x: &Array2<f64>) -> (Array2<f64>, LayerNormCache) {
        let rows = x.nrows();
        let dim = x.ncols() as f64;
        let mut xhat = Array2::zeros(x.raw_dim());
        let mut inv_std = Array1::zeros(rows);
        for (i, row) in x.axis_iter(Axis(0)).enumerate() {
            let mean = row.sum() / dim;
            let var = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / dim;
            let istd = 1.0 / (var + self.eps).sqrt();
            inv_std[i] = istd;
            for (j, v) in row.iter().enumerate() {
                xhat[(i, j)] = (v - mean) * istd;
            }
        }
        let y = &xhat * &self.gamma + &self.beta;
        (y, LayerNormCache { xhat, inv_std })
    }

    pub fn backward(
        &self,
        cache: &LayerNormCache,
        dy: &Array2<f64>,
        grad: &mut LayerNorm,
    ) -> Array2<f64> {
        grad.gamma += &(dy * &cache.xhat).sum_axis(Axis(0));
        grad.beta += &dy.sum_axis(Axis(0));
        let dim = dy.ncols() as f64;
        let mut dx = Array2::zeros(dy.raw_dim());
        for i in 0..dy.nrows() {
            let a: Vec<f64> = (0..dy.ncols()).map(|j| dy[(i, j)] * self.gamma[j]).collect();
            let mean_a = a.iter().sum::<f64>() / dim;
            let mean_ax = a
                .iter()
                .enumerate()
                .map(|(j, v)| v * cache.xhat[(i, j)])
                .sum::<f64>()
                / dim;
            for j in 0..dy.ncols() {
                dx[(i, j)] = cache.inv_std[i] * (a[j] - mean_a - cache.xhat[(i, j)] * mean_ax);
            }
        }
        dx
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044715;

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x.powi(3))).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let inner = GELU_C * (x + GELU_A * x.powi(3));
    let t = inner.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

/// Numerically stable softmax over a slice.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Box-Muller normal sample; two uniform draws per call keeps RNG consumption
/// independent of previous samples.
pub fn sample_normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
