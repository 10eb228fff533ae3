//! The trained threat model: a compact 1-D convolutional emotion classifier
//! with from-scratch training (backprop + Adam), inference, and a portable
//! weight format. Architecture: conv(k5) -> pool -> conv(k5) -> pool ->
//! conv(k3) -> global average pool -> dense -> dropout -> dense.

mod layers;
mod serialize;

pub use serialize::{load_model, model_checksum, save_model};

use std::fmt;

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureMatrix;
use layers::*;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("label list must hold 2..=8 distinct labels, got {0}")]
    BadLabelCount(usize),
    #[error("duplicate label {0} in label list")]
    DuplicateLabel(EmotionLabel),
    #[error("feature shape ({0}, {1}) does not match the model's expected ({2}, {3})")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("label {0} is not in the model's label list")]
    UnknownLabel(EmotionLabel),
    #[error("batch is empty")]
    EmptyBatch,
    #[error("training set is empty")]
    EmptyDataset,
    #[error("training set holds a single class; need at least two")]
    SingleClass,
    #[error("invalid architecture: {0}")]
    BadArchitecture(String),
    #[error("invalid train config: {0}")]
    BadTrainConfig(String),
    #[error("bad magic bytes; not a model file")]
    BadMagic,
    #[error("unsupported model file version {0}")]
    UnsupportedVersion(u16),
    #[error("model file truncated: {0}")]
    Truncated(String),
    #[error("model header missing field {0}")]
    MissingField(String),
    #[error("malformed model header: {0}")]
    BadHeader(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Canonical 8-way emotion space; every dataset's labels map into it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmotionLabel {
    Neutral,
    Calm,
    Happy,
    Sad,
    Angry,
    Fear,
    Disgust,
    Surprise,
}

pub const CANONICAL_LABELS: [EmotionLabel; 8] = [
    EmotionLabel::Neutral,
    EmotionLabel::Calm,
    EmotionLabel::Happy,
    EmotionLabel::Sad,
    EmotionLabel::Angry,
    EmotionLabel::Fear,
    EmotionLabel::Disgust,
    EmotionLabel::Surprise,
];

impl EmotionLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Calm => "calm",
            EmotionLabel::Happy => "happy",
            EmotionLabel::Sad => "sad",
            EmotionLabel::Angry => "angry",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Disgust => "disgust",
            EmotionLabel::Surprise => "surprise",
        }
    }

    pub fn parse(s: &str) -> Option<EmotionLabel> {
        CANONICAL_LABELS.iter().copied().find(|l| l.as_str() == s)
    }

    pub fn canonical_index(&self) -> usize {
        CANONICAL_LABELS.iter().position(|l| l == self).unwrap()
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One attacker decision: the argmax label (ties resolved by label-list
/// order) plus the full softmax distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackVerdict {
    pub label: EmotionLabel,
    pub confidence: f64,
    pub probabilities: Vec<f64>,
}

impl AttackVerdict {
    /// Builds a verdict from a probability vector aligned with `labels`.
    pub fn from_probabilities(probabilities: Vec<f64>, labels: &[EmotionLabel]) -> Self {
        let mut best = 0usize;
        for (i, &p) in probabilities.iter().enumerate() {
            if p > probabilities[best] {
                best = i;
            }
        }
        Self { label: labels[best], confidence: probabilities[best], probabilities }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    pub weights: Vec<f64>, // [out_ch][in_ch][kernel]
    pub bias: Vec<f64>,
    pub out_ch: usize,
    pub in_ch: usize,
    pub kernel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    pub weights: Vec<f64>, // [out_dim][in_dim]
    pub bias: Vec<f64>,
    pub out_dim: usize,
    pub in_dim: usize,
}

/// Layer sizing. `standard` is the shipped attacker; tests use smaller nets.
#[derive(Debug, Clone, PartialEq)]
pub struct Architecture {
    pub input_rows: usize,
    pub input_cols: usize,
    pub conv_channels: [usize; 3],
    pub kernels: [usize; 3],
    pub dense_hidden: usize,
}

impl Architecture {
    pub fn standard(input_rows: usize, input_cols: usize) -> Self {
        Self { input_rows, input_cols, conv_channels: [64, 128, 128], kernels: [5, 5, 3], dense_hidden: 64 }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.input_rows == 0 || self.input_cols < 4 || self.input_cols % 4 != 0 {
            return Err(ModelError::BadArchitecture(format!(
                "input must be r x c with c a positive multiple of 4, got {} x {}",
                self.input_rows, self.input_cols
            )));
        }
        if self.conv_channels.iter().any(|&c| c == 0) || self.dense_hidden == 0 {
            return Err(ModelError::BadArchitecture("zero-width layer".into()));
        }
        if self.kernels.iter().any(|&k| k % 2 == 0 || k == 0) {
            return Err(ModelError::BadArchitecture("kernels must be odd".into()));
        }
        Ok(())
    }
}

/// Full weight set plus the feature-config fingerprint and ordered label
/// list the model was trained against.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub conv1: ConvLayer,
    pub conv2: ConvLayer,
    pub conv3: ConvLayer,
    pub dense1: DenseLayer,
    pub dense2: DenseLayer,
    pub feature_fingerprint: String,
    pub label_list: Vec<EmotionLabel>,
    pub input_cols: usize,
}

impl ModelParams {
    pub fn input_rows(&self) -> usize {
        self.conv1.in_ch
    }

    pub fn n_labels(&self) -> usize {
        self.label_list.len()
    }

    /// Tensors in declared (serialization) order.
    pub(crate) fn tensor_names() -> [&'static str; 10] {
        [
            "conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias", "conv3.weight",
            "conv3.bias", "dense1.weight", "dense1.bias", "dense2.weight", "dense2.bias",
        ]
    }

    pub(crate) fn tensors(&self) -> [(&Vec<f64>, Vec<usize>); 10] {
        [
            (&self.conv1.weights, vec![self.conv1.out_ch, self.conv1.in_ch, self.conv1.kernel]),
            (&self.conv1.bias, vec![self.conv1.out_ch]),
            (&self.conv2.weights, vec![self.conv2.out_ch, self.conv2.in_ch, self.conv2.kernel]),
            (&self.conv2.bias, vec![self.conv2.out_ch]),
            (&self.conv3.weights, vec![self.conv3.out_ch, self.conv3.in_ch, self.conv3.kernel]),
            (&self.conv3.bias, vec![self.conv3.out_ch]),
            (&self.dense1.weights, vec![self.dense1.out_dim, self.dense1.in_dim]),
            (&self.dense1.bias, vec![self.dense1.out_dim]),
            (&self.dense2.weights, vec![self.dense2.out_dim, self.dense2.in_dim]),
            (&self.dense2.bias, vec![self.dense2.out_dim]),
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 10] {
        [
            &mut self.conv1.weights,
            &mut self.conv1.bias,
            &mut self.conv2.weights,
            &mut self.conv2.bias,
            &mut self.conv3.weights,
            &mut self.conv3.bias,
            &mut self.dense1.weights,
            &mut self.dense1.bias,
            &mut self.dense2.weights,
            &mut self.dense2.bias,
        ]
    }
}

/// Training hyperparameters; JSON-loadable with every field optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub dropout_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            epochs: 60,
            batch_size: 32,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            dropout_rate: 0.3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(ModelError::BadTrainConfig("epochs and batch_size must be >= 1".into()));
        }
        if !(self.dropout_rate >= 0.0 && self.dropout_rate < 1.0) {
            return Err(ModelError::BadTrainConfig(format!("dropout_rate {} outside [0, 1)", self.dropout_rate)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(ModelError::BadTrainConfig("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

fn check_labels(labels: &[EmotionLabel]) -> Result<(), ModelError> {
    if labels.len() < 2 || labels.len() > 8 {
        return Err(ModelError::BadLabelCount(labels.len()));
    }
    for (i, l) in labels.iter().enumerate() {
        if labels[..i].contains(l) {
            return Err(ModelError::DuplicateLabel(*l));
        }
    }
    Ok(())
}

/// Standard attacker sized for the default 40 x 256 feature shape and the
/// default feature fingerprint.
pub fn init_model(seed: u64, labels: &[EmotionLabel]) -> Result<ModelParams, ModelError> {
    let cfg = crate::features::MfccConfig::default();
    init_model_with(
        &Architecture::standard(cfg.n_mfcc, cfg.fixed_frames),
        &cfg.fingerprint(),
        seed,
        labels,
    )
}

/// Uniform(-b, b) init with b = sqrt(6 / fan_in) per weight tensor; biases
/// start at zero. Deterministic for a given seed.
pub fn init_model_with(
    arch: &Architecture,
    fingerprint: &str,
    seed: u64,
    labels: &[EmotionLabel],
) -> Result<ModelParams, ModelError> {
    arch.validate()?;
    check_labels(labels)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut conv = |out_ch: usize, in_ch: usize, kernel: usize| -> ConvLayer {
        let bound = (6.0 / (in_ch * kernel) as f64).sqrt();
        let dist = Uniform::new(-bound, bound);
        ConvLayer {
            weights: (0..out_ch * in_ch * kernel).map(|_| dist.sample(&mut rng)).collect(),
            bias: vec![0.0; out_ch],
            out_ch,
            in_ch,
            kernel,
        }
    };
    let conv1 = conv(arch.conv_channels[0], arch.input_rows, arch.kernels[0]);
    let conv2 = conv(arch.conv_channels[1], arch.conv_channels[0], arch.kernels[1]);
    let conv3 = conv(arch.conv_channels[2], arch.conv_channels[1], arch.kernels[2]);

    let mut dense = |out_dim: usize, in_dim: usize| -> DenseLayer {
        let bound = (6.0 / in_dim as f64).sqrt();
        let dist = Uniform::new(-bound, bound);
        DenseLayer {
            weights: (0..out_dim * in_dim).map(|_| dist.sample(&mut rng)).collect(),
            bias: vec![0.0; out_dim],
            out_dim,
            in_dim,
        }
    };
    let dense1 = dense(arch.dense_hidden, arch.conv_channels[2]);
    let dense2 = dense(labels.len(), arch.dense_hidden);

    Ok(ModelParams {
        conv1,
        conv2,
        conv3,
        dense1,
        dense2,
        feature_fingerprint: fingerprint.to_string(),
        label_list: labels.to_vec(),
        input_cols: arch.input_cols,
    })
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardCache {
    x: Vec<f64>,
    a1: Vec<f64>,
    idx1: Vec<u8>,
    p1: Vec<f64>,
    a2: Vec<f64>,
    idx2: Vec<u8>,
    p2: Vec<f64>,
    a3: Vec<f64>,
    gap: Vec<f64>,
    h_post: Vec<f64>,
    dropout_mask: Option<Vec<f64>>,
    h_dropped: Vec<f64>,
    t0: usize,
}

impl ForwardCache {
    /// (t_len after pool 1, t_len after pool 2) — pooling bookkeeping.
    pub fn pooled_lengths(&self, params: &ModelParams) -> (usize, usize) {
        (self.p1.len() / params.conv1.out_ch, self.p2.len() / params.conv2.out_ch)
    }
}

fn draw_dropout_mask(dim: usize, rate: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keep = 1.0 - rate;
    (0..dim)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { 1.0 / keep })
        .collect()
}

/// Eval-mode forward ignores `dropout_seed` and `dropout_rate`; train mode
/// applies inverted dropout after the first dense layer.
pub fn forward(
    params: &ModelParams,
    x: &FeatureMatrix,
    train_mode: bool,
    dropout_rate: f64,
    dropout_seed: u64,
) -> Result<(Vec<f64>, ForwardCache), ModelError> {
    let mask = if train_mode && dropout_rate > 0.0 {
        Some(draw_dropout_mask(params.dense1.out_dim, dropout_rate, dropout_seed))
    } else {
        None
    };
    forward_with_mask(params, x, mask)
}

fn forward_with_mask(
    params: &ModelParams,
    x: &FeatureMatrix,
    mask: Option<Vec<f64>>,
) -> Result<(Vec<f64>, ForwardCache), ModelError> {
    if x.rows() != params.input_rows() || x.cols() != params.input_cols {
        return Err(ModelError::ShapeMismatch(x.rows(), x.cols(), params.input_rows(), params.input_cols));
    }
    let t0 = x.cols();
    let xv = x.data().to_vec();

    let mut a1 = conv_forward(&params.conv1, &xv, t0);
    relu_inplace(&mut a1);
    let (p1, idx1) = maxpool2_forward(&a1, params.conv1.out_ch, t0);

    let t1 = t0 / 2;
    let mut a2 = conv_forward(&params.conv2, &p1, t1);
    relu_inplace(&mut a2);
    let (p2, idx2) = maxpool2_forward(&a2, params.conv2.out_ch, t1);

    let t2 = t1 / 2;
    let mut a3 = conv_forward(&params.conv3, &p2, t2);
    relu_inplace(&mut a3);
    let gap = global_avg_pool(&a3, params.conv3.out_ch, t2);

    let mut h_post = dense_forward(&params.dense1, &gap);
    relu_inplace(&mut h_post);
    let h_dropped = match &mask {
        Some(m) => h_post.iter().zip(m).map(|(v, s)| v * s).collect(),
        None => h_post.clone(),
    };
    let logits = dense_forward(&params.dense2, &h_dropped);

    Ok((
        logits,
        ForwardCache { x: xv, a1, idx1, p1, a2, idx2, p2, a3, gap, h_post, dropout_mask: mask, h_dropped, t0 },
    ))
}

/// Gradient buffers mirroring [`ModelParams`] tensor shapes.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub conv1_w: Vec<f64>,
    pub conv1_b: Vec<f64>,
    pub conv2_w: Vec<f64>,
    pub conv2_b: Vec<f64>,
    pub conv3_w: Vec<f64>,
    pub conv3_b: Vec<f64>,
    pub dense1_w: Vec<f64>,
    pub dense1_b: Vec<f64>,
    pub dense2_w: Vec<f64>,
    pub dense2_b: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            conv1_w: vec![0.0; params.conv1.weights.len()],
            conv1_b: vec![0.0; params.conv1.bias.len()],
            conv2_w: vec![0.0; params.conv2.weights.len()],
            conv2_b: vec![0.0; params.conv2.bias.len()],
            conv3_w: vec![0.0; params.conv3.weights.len()],
            conv3_b: vec![0.0; params.conv3.bias.len()],
            dense1_w: vec![0.0; params.dense1.weights.len()],
            dense1_b: vec![0.0; params.dense1.bias.len()],
            dense2_w: vec![0.0; params.dense2.weights.len()],
            dense2_b: vec![0.0; params.dense2.bias.len()],
        }
    }

    /// Tensor views in the same declared order as [`ModelParams`].
    pub fn tensors(&self) -> [&Vec<f64>; 10] {
        [
            &self.conv1_w, &self.conv1_b, &self.conv2_w, &self.conv2_b, &self.conv3_w,
            &self.conv3_b, &self.dense1_w, &self.dense1_b, &self.dense2_w, &self.dense2_b,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 10] {
        [
            &mut self.conv1_w, &mut self.conv1_b, &mut self.conv2_w, &mut self.conv2_b,
            &mut self.conv3_w, &mut self.conv3_b, &mut self.dense1_w, &mut self.dense1_b,
            &mut self.dense2_w, &mut self.dense2_b,
        ]
    }
}

fn backward(params: &ModelParams, cache: &ForwardCache, dlogits: &[f64], grads: &mut Gradients) {
    let t0 = cache.t0;
    let (t1, t2) = (t0 / 2, t0 / 4);

    let mut dh = dense_backward(&params.dense2, &cache.h_dropped, dlogits, &mut grads.dense2_w, &mut grads.dense2_b);
    if let Some(mask) = &cache.dropout_mask {
        for (g, &s) in dh.iter_mut().zip(mask) {
            *g *= s;
        }
    }
    relu_backward_inplace(&mut dh, &cache.h_post);

    let dgap = dense_backward(&params.dense1, &cache.gap, &dh, &mut grads.dense1_w, &mut grads.dense1_b);
    let mut da3 = global_avg_pool_backward(&dgap, params.conv3.out_ch, t2);
    relu_backward_inplace(&mut da3, &cache.a3);

    let dp2 = conv_backward(&params.conv3, &cache.p2, &da3, t2, &mut grads.conv3_w, &mut grads.conv3_b);
    let mut da2 = maxpool2_backward(&dp2, &cache.idx2, params.conv2.out_ch, t2);
    relu_backward_inplace(&mut da2, &cache.a2);

    let dp1 = conv_backward(&params.conv2, &cache.p1, &da2, t1, &mut grads.conv2_w, &mut grads.conv2_b);
    let mut da1 = maxpool2_backward(&dp1, &cache.idx1, params.conv1.out_ch, t1);
    relu_backward_inplace(&mut da1, &cache.a1);

    conv_backward(&params.conv1, &cache.x, &da1, t0, &mut grads.conv1_w, &mut grads.conv1_b);
}

/// Mean softmax cross-entropy over the batch with full reverse-mode
/// gradients. One dropout mask is drawn from `dropout_seed` and shared by
/// every sample in the batch, so duplicating the batch changes nothing.
pub fn loss_and_grad(
    params: &ModelParams,
    batch: &[(&FeatureMatrix, EmotionLabel)],
    dropout_rate: f64,
    dropout_seed: u64,
) -> Result<(f64, Gradients), ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    let mask = if dropout_rate > 0.0 {
        Some(draw_dropout_mask(params.dense1.out_dim, dropout_rate, dropout_seed))
    } else {
        None
    };

    let inv_batch = 1.0 / batch.len() as f64;
    let mut grads = Gradients::zeros_like(params);
    let mut loss = 0.0;
    for (x, label) in batch {
        let target = params
            .label_list
            .iter()
            .position(|l| l == label)
            .ok_or(ModelError::UnknownLabel(*label))?;
        let (logits, cache) = forward_with_mask(params, x, mask.clone())?;
        let probs = softmax(&logits);
        loss -= probs[target].max(1e-300).ln() * inv_batch;

        let mut dlogits = probs;
        dlogits[target] -= 1.0;
        for g in dlogits.iter_mut() {
            *g *= inv_batch;
        }
        backward(params, &cache, &dlogits, &mut grads);
    }
    Ok((loss, grads))
}

/// First/second moment accumulators for Adam.
pub struct MomentState {
    pub m: Gradients,
    pub v: Gradients,
}

impl MomentState {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self { m: Gradients::zeros_like(params), v: Gradients::zeros_like(params) }
    }
}

/// Standard bias-corrected Adam update, applied in place. `t` is 1-based.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &Gradients,
    state: &mut MomentState,
    t: usize,
    cfg: &TrainConfig,
) {
    assert!(t >= 1, "adam step index is 1-based");
    let b1 = cfg.adam_beta1;
    let b2 = cfg.adam_beta2;
    let bc1 = 1.0 - b1.powi(t as i32);
    let bc2 = 1.0 - b2.powi(t as i32);

    let param_tensors = params.tensors_mut();
    let grad_tensors = grads.tensors();
    let m_tensors = state.m.tensors_mut();
    let v_tensors = state.v.tensors_mut();
    for (((p, g), m), v) in param_tensors.into_iter().zip(grad_tensors).zip(m_tensors).zip(v_tensors) {
        for i in 0..p.len() {
            let gi = g[i];
            m[i] = b1 * m[i] + (1.0 - b1) * gi;
            v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
        }
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

/// Fraction of `set` classified correctly in eval mode.
pub fn evaluate_accuracy(params: &ModelParams, set: &[(FeatureMatrix, EmotionLabel)]) -> Result<f64, ModelError> {
    if set.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let mut hits = 0usize;
    for (x, label) in set {
        if predict(params, x)?.label == *label {
            hits += 1;
        }
    }
    Ok(hits as f64 / set.len() as f64)
}

/// Seeded-shuffle minibatch Adam over `cfg.epochs` epochs; the label list is
/// the canonical-order set of labels present in `train_set` and the returned
/// parameters are those of the best-validation-accuracy epoch (earliest on
/// ties). `fingerprint` ties the model to the feature config that produced
/// the matrices.
pub fn train(
    train_set: &[(FeatureMatrix, EmotionLabel)],
    val_set: &[(FeatureMatrix, EmotionLabel)],
    cfg: &TrainConfig,
    fingerprint: &str,
) -> Result<(ModelParams, Vec<EpochStats>), ModelError> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let labels: Vec<EmotionLabel> = CANONICAL_LABELS
        .iter()
        .copied()
        .filter(|l| train_set.iter().any(|(_, tl)| tl == l))
        .collect();
    if labels.len() < 2 {
        return Err(ModelError::SingleClass);
    }

    let rows = train_set[0].0.rows();
    let cols = train_set[0].0.cols();
    let arch = Architecture::standard(rows, cols);
    let mut params = init_model_with(&arch, fingerprint, cfg.seed, &labels)?;
    let mut state = MomentState::zeros_like(&params);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x5EED));
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, ModelParams)> = None;
    let mut global_step = 0usize;

    for epoch in 1..=cfg.epochs {
        // Fisher-Yates with the epoch-persistent rng keeps runs reproducible
        for i in (1..order.len()).rev() {
            let j = shuffle_rng.gen_range(0..=i);
            order.swap(i, j);
        }

        let mut loss_sum = 0.0;
        let mut seen = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            global_step += 1;
            let batch: Vec<(&FeatureMatrix, EmotionLabel)> =
                chunk.iter().map(|&i| (&train_set[i].0, train_set[i].1)).collect();
            let dropout_seed = cfg
                .seed
                .wrapping_mul(6364136223846793005)
                .wrapping_add(global_step as u64);
            let (loss, grads) = loss_and_grad(&params, &batch, cfg.dropout_rate, dropout_seed)?;
            adam_step(&mut params, &grads, &mut state, global_step, cfg);
            loss_sum += loss * chunk.len() as f64;
            seen += chunk.len();
        }

        let val_accuracy = evaluate_accuracy(&params, val_set)?;
        history.push(EpochStats { epoch, train_loss: loss_sum / seen as f64, val_accuracy });
        let improved = best.as_ref().map(|(acc, _)| val_accuracy > *acc).unwrap_or(true);
        if improved {
            best = Some((val_accuracy, params.clone()));
        }
    }

    Ok((best.expect("at least one epoch ran").1, history))
}

/// Eval-mode softmax verdict.
pub fn predict(params: &ModelParams, x: &FeatureMatrix) -> Result<AttackVerdict, ModelError> {
    let (logits, _) = forward_with_mask(params, x, None)?;
    let probs = softmax(&logits);
    Ok(AttackVerdict::from_probabilities(probs, &params.label_list))
}
