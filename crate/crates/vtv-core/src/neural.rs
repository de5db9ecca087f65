//! Deterministic numeric pieces of the encoder front end and the stage-1
//! losses: tubelet patchification, sinusoidal temporal embeddings, exact
//! (erf-based) GELU, the two-layer visual projector, masked MSE,
//! cross-entropy, the combined loss, and analytic gradients verified by
//! central finite differences.

use crate::model::VideoSequence;
use crate::propagate::{TokenMask, TubeletGeometry};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),
    #[error("temporal embedding dimension must be even, got {0}")]
    OddDimension(usize),
    #[error("mask selects no tokens")]
    EmptyMask,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("loss inputs must be nonnegative, got {0}")]
    NegativeInput(f64),
}

/// (num_tokens, dim) matrix of token features, row-major f64.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenTensor {
    pub num_tokens: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl TokenTensor {
    pub fn zeros(num_tokens: usize, dim: usize) -> Self {
        Self {
            num_tokens,
            dim,
            data: vec![0.0; num_tokens * dim],
        }
    }

    pub fn token(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Dense layer y = x·W + b with W of shape (d_in, d_out), row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub d_in: usize,
    pub d_out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Linear {
    pub fn new(d_in: usize, d_out: usize, w: Vec<f64>, b: Vec<f64>) -> Result<Self, NeuralError> {
        if w.len() != d_in * d_out || b.len() != d_out {
            return Err(NeuralError::ShapeMismatch(format!(
                "linear {d_in}->{d_out} expects {} weights and {d_out} biases, got {} and {}",
                d_in * d_out,
                w.len(),
                b.len()
            )));
        }
        Ok(Self { d_in, d_out, w, b })
    }

    pub fn identity(d: usize) -> Self {
        let mut w = vec![0.0; d * d];
        for i in 0..d {
            w[i * d + i] = 1.0;
        }
        Self {
            d_in: d,
            d_out: d,
            w,
            b: vec![0.0; d],
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.d_in);
        let mut y = self.b.clone();
        for (i, &xi) in x.iter().enumerate() {
            let row = &self.w[i * self.d_out..(i + 1) * self.d_out];
            for (yj, &wij) in y.iter_mut().zip(row) {
                *yj += xi * wij;
            }
        }
        y
    }

    /// Backprop through y = x·W + b: returns (dW, db, dx) for upstream dy.
    pub fn grads(&self, x: &[f64], dy: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        assert_eq!(dy.len(), self.d_out);
        let mut dw = vec![0.0; self.d_in * self.d_out];
        let mut dx = vec![0.0; self.d_in];
        for i in 0..self.d_in {
            let row = &self.w[i * self.d_out..(i + 1) * self.d_out];
            for j in 0..self.d_out {
                dw[i * self.d_out + j] = x[i] * dy[j];
                dx[i] += row[j] * dy[j];
            }
        }
        (dw, dy.to_vec(), dx)
    }
}

/// Two-layer projector: E = W2·GELU(W1·F + b1) + b2.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectorWeights {
    pub layer1: Linear,
    pub layer2: Linear,
}

impl ProjectorWeights {
    pub fn new(layer1: Linear, layer2: Linear) -> Result<Self, NeuralError> {
        if layer1.d_out != layer2.d_in {
            return Err(NeuralError::ShapeMismatch(format!(
                "projector hidden widths disagree: {} vs {}",
                layer1.d_out, layer2.d_in
            )));
        }
        Ok(Self { layer1, layer2 })
    }
}

/// Activation used between the projector layers; `Identity` is a test hook
/// that collapses the projector to a single affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Gelu,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Gelu => gelu(x),
            Activation::Identity => x,
        }
    }
}

/// Standard normal CDF via erf.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Exact GELU: x·Φ(x) with Φ the standard normal CDF.
pub fn gelu(x: f64) -> f64 {
    x * std_normal_cdf(x)
}

/// d/dx GELU = Φ(x) + x·φ(x).
pub fn gelu_grad(x: f64) -> f64 {
    let phi = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    std_normal_cdf(x) + x * phi
}

/// Sinusoidal temporal embedding: TE(t)[2i] = sin(t/10000^{2i/D}),
/// TE(t)[2i+1] = cos(t/10000^{2i/D}).
pub fn temporal_embedding(t: usize, d: usize) -> Result<Vec<f64>, NeuralError> {
    if !d.is_multiple_of(2) {
        return Err(NeuralError::OddDimension(d));
    }
    let mut out = Vec::with_capacity(d);
    for i in 0..d / 2 {
        let angle = t as f64 / 10000f64.powf(2.0 * i as f64 / d as f64);
        out.push(angle.sin());
        out.push(angle.cos());
    }
    Ok(out)
}

/// Flatten each tubelet's pixels in (t, y, x, c) order and map them through
/// a single linear embedding. Token order is (temporal, row, col) row-major.
pub fn patchify(
    video: &VideoSequence,
    geom: TubeletGeometry,
    embed: &Linear,
) -> Result<TokenTensor, NeuralError> {
    let (t_grid, rows, cols) = geom
        .grid(video.len(), video.h(), video.w())
        .map_err(|e| NeuralError::GeometryMismatch(e.to_string()))?;
    let d_in = geom.t_patch * geom.p * geom.p * video.c();
    if embed.d_in != d_in {
        return Err(NeuralError::ShapeMismatch(format!(
            "embed expects d_in={}, tubelets have {d_in} values",
            embed.d_in
        )));
    }
    let mut out = TokenTensor::zeros(t_grid * rows * cols, embed.d_out);
    let mut flat = vec![0.0f64; d_in];
    let mut token = 0usize;
    for ti in 0..t_grid {
        for i in 0..rows {
            for j in 0..cols {
                let mut idx = 0;
                for dt in 0..geom.t_patch {
                    let frame = video.frame(ti * geom.t_patch + dt);
                    for y in i * geom.p..(i + 1) * geom.p {
                        for x in j * geom.p..(j + 1) * geom.p {
                            for ch in 0..video.c() {
                                flat[idx] = frame.get(x, y, ch) as f64;
                                idx += 1;
                            }
                        }
                    }
                }
                let y = embed.forward(&flat);
                out.data[token * embed.d_out..(token + 1) * embed.d_out].copy_from_slice(&y);
                token += 1;
            }
        }
    }
    Ok(out)
}

/// Apply the projector per token with the given activation.
pub fn project_visual_with(
    f: &TokenTensor,
    w: &ProjectorWeights,
    act: Activation,
) -> Result<TokenTensor, NeuralError> {
    if f.dim != w.layer1.d_in {
        return Err(NeuralError::ShapeMismatch(format!(
            "token dim {} does not match projector input {}",
            f.dim, w.layer1.d_in
        )));
    }
    let mut out = TokenTensor::zeros(f.num_tokens, w.layer2.d_out);
    for i in 0..f.num_tokens {
        let pre = w.layer1.forward(f.token(i));
        let hidden: Vec<f64> = pre.iter().map(|&v| act.apply(v)).collect();
        let e = w.layer2.forward(&hidden);
        out.data[i * out.dim..(i + 1) * out.dim].copy_from_slice(&e);
    }
    Ok(out)
}

/// E_V = W2·GELU(W1·F + b1) + b2, applied per token.
pub fn project_visual(f: &TokenTensor, w: &ProjectorWeights) -> Result<TokenTensor, NeuralError> {
    project_visual_with(f, w, Activation::Gelu)
}

/// Gradient of a scalar loss wrt the projector input F, given the upstream
/// gradient dE at the output.
pub fn project_visual_input_grad(
    f: &TokenTensor,
    w: &ProjectorWeights,
    de: &TokenTensor,
) -> Result<TokenTensor, NeuralError> {
    if de.num_tokens != f.num_tokens || de.dim != w.layer2.d_out {
        return Err(NeuralError::ShapeMismatch(
            "upstream gradient shape does not match projector output".into(),
        ));
    }
    let mut out = TokenTensor::zeros(f.num_tokens, f.dim);
    for i in 0..f.num_tokens {
        let pre = w.layer1.forward(f.token(i));
        let hidden: Vec<f64> = pre.iter().map(|&v| gelu(v)).collect();
        let (_, _, dh) = w.layer2.grads(&hidden, de.token(i));
        let dpre: Vec<f64> = dh
            .iter()
            .zip(&pre)
            .map(|(&g, &p)| g * gelu_grad(p))
            .collect();
        let (_, _, dx) = w.layer1.grads(f.token(i), &dpre);
        out.data[i * f.dim..(i + 1) * f.dim].copy_from_slice(&dx);
    }
    Ok(out)
}

const NORM_EPS: f64 = 1e-6;

fn normalized_token(token: &[f64]) -> Vec<f64> {
    let n = token.len() as f64;
    let mean = token.iter().sum::<f64>() / n;
    let var = token.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + NORM_EPS).sqrt();
    token.iter().map(|&v| (v - mean) * inv).collect()
}

fn masked_token_indices(mask: &TokenMask, num_tokens: usize) -> Result<Vec<usize>, NeuralError> {
    if mask.total() != num_tokens {
        return Err(NeuralError::ShapeMismatch(format!(
            "token mask has {} tokens, tensor has {num_tokens}",
            mask.total()
        )));
    }
    let idx: Vec<usize> = mask
        .bits
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect();
    if idx.is_empty() {
        return Err(NeuralError::EmptyMask);
    }
    Ok(idx)
}

/// Mean squared error over masked tokens only. With `normalize_target`,
/// each target token is standardized (mean 0, variance 1, ε = 1e−6) first.
pub fn mse_loss(
    pred: &TokenTensor,
    target: &TokenTensor,
    token_mask: &TokenMask,
    normalize_target: bool,
) -> Result<f64, NeuralError> {
    if pred.num_tokens != target.num_tokens || pred.dim != target.dim {
        return Err(NeuralError::ShapeMismatch(
            "pred and target shapes differ".into(),
        ));
    }
    let masked = masked_token_indices(token_mask, pred.num_tokens)?;
    let mut sum = 0.0f64;
    for &i in &masked {
        let t = if normalize_target {
            normalized_token(target.token(i))
        } else {
            target.token(i).to_vec()
        };
        for (p, tv) in pred.token(i).iter().zip(&t) {
            let d = p - tv;
            sum += d * d;
        }
    }
    Ok(sum / (masked.len() * pred.dim) as f64)
}

/// Gradient of [`mse_loss`] wrt `pred`; zero at unmasked tokens.
pub fn mse_loss_grad(
    pred: &TokenTensor,
    target: &TokenTensor,
    token_mask: &TokenMask,
    normalize_target: bool,
) -> Result<TokenTensor, NeuralError> {
    let masked = masked_token_indices(token_mask, pred.num_tokens)?;
    let scale = 2.0 / (masked.len() * pred.dim) as f64;
    let mut out = TokenTensor::zeros(pred.num_tokens, pred.dim);
    for &i in &masked {
        let t = if normalize_target {
            normalized_token(target.token(i))
        } else {
            target.token(i).to_vec()
        };
        for (k, (p, tv)) in pred.token(i).iter().zip(&t).enumerate() {
            out.data[i * pred.dim + k] = scale * (p - tv);
        }
    }
    Ok(out)
}

/// −log softmax(logits)[label], max-subtracted for stability.
pub fn cross_entropy(logits: &[f64], label: usize) -> Result<f64, NeuralError> {
    if label >= logits.len() {
        return Err(NeuralError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_sum = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    Ok(log_sum - (logits[label] - max))
}

/// Gradient of cross-entropy wrt logits: softmax − one-hot.
pub fn cross_entropy_grad(logits: &[f64], label: usize) -> Result<Vec<f64>, NeuralError> {
    if label >= logits.len() {
        return Err(NeuralError::LabelOutOfRange {
            label,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps
        .iter()
        .enumerate()
        .map(|(i, &e)| e / sum - if i == label { 1.0 } else { 0.0 })
        .collect())
}

/// Reconstruction + weighted attribute classification loss.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LossBreakdown {
    pub reconstruction: f64,
    pub classification: f64,
    pub weight: f64,
    pub total: f64,
}

/// classification = mean of the four attribute losses; total = recon + μ·classification.
pub fn combined_loss(
    recon: f64,
    attribute_losses: [f64; 4],
    mu: f64,
) -> Result<LossBreakdown, NeuralError> {
    for &v in std::iter::once(&recon)
        .chain(attribute_losses.iter())
        .chain(std::iter::once(&mu))
    {
        if v < 0.0 {
            return Err(NeuralError::NegativeInput(v));
        }
    }
    let classification = attribute_losses.iter().sum::<f64>() / 4.0;
    Ok(LossBreakdown {
        reconstruction: recon,
        classification,
        weight: mu,
        total: recon + mu * classification,
    })
}

/// Compare an analytic gradient against central finite differences of a
/// scalar-valued function; returns the max relative error over components.
pub fn finite_diff_check(
    f: impl Fn(&[f64]) -> f64,
    analytic: &[f64],
    point: &[f64],
    eps: f64,
) -> f64 {
    assert_eq!(analytic.len(), point.len());
    assert!((1e-6..=1e-3).contains(&eps), "eps must be in [1e-6, 1e-3]");
    let mut max_rel = 0.0f64;
    let mut probe = point.to_vec();
    for i in 0..point.len() {
        probe[i] = point[i] + eps;
        let plus = f(&probe);
        probe[i] = point[i] - eps;
        let minus = f(&probe);
        probe[i] = point[i];
        let numeric = (plus - minus) / (2.0 * eps);
        let denom = analytic[i].abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max((analytic[i] - numeric).abs() / denom);
    }
    max_rel
}
