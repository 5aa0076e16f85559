//! From-scratch detection models: an MLP for byte vectors, an LSTM over
//! packet-type sequences, a CNN over byte matrices, and a linear SVM
//! baseline. Training is plain full-batch gradient descent, deterministic
//! given the config seed; all parameters live in one flat vector so the
//! finite-difference checks and the checkpoint format stay generic.

mod cnn;
mod lstm;
pub mod metrics;
mod mlp;
mod svm;

pub use metrics::{compute_metrics, session_threshold, Confusion, Metrics};
pub use svm::train_linear_svm;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DatasetSplit, ReprKind, Sample, SampleData};
use crate::rng::rng_from;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite loss at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("model family {family:?} cannot read {repr:?} samples")]
    WrongFamily { family: ModelFamily, repr: ReprKind },
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Mlp,
    Lstm,
    Cnn,
    Svm,
}

impl std::str::FromStr for ModelFamily {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mlp" => Ok(ModelFamily::Mlp),
            "lstm" => Ok(ModelFamily::Lstm),
            "cnn" => Ok(ModelFamily::Cnn),
            "svm" => Ok(ModelFamily::Svm),
            other => Err(format!("unknown model family: {other}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: ModelFamily,
    /// Flat feature count (MLP/SVM) or sequence length (LSTM).
    pub input_len: usize,
    /// Grid shape for the CNN.
    #[serde(default)]
    pub rows: usize,
    #[serde(default)]
    pub cols: usize,
    /// Highest type id in the table; id 0 is the reserved unseen id.
    #[serde(default)]
    pub vocab: usize,
    #[serde(default)]
    pub embed_dim: usize,
    #[serde(default)]
    pub lstm_hidden: usize,
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub conv_filters: (usize, usize),
    #[serde(default)]
    pub kernel: usize,
    pub seed: u64,
    pub epochs: usize,
    pub lr: f64,
    #[serde(default)]
    pub l2: f64,
}

impl ModelConfig {
    pub fn mlp(input_len: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            family: ModelFamily::Mlp,
            input_len,
            rows: 0,
            cols: 0,
            vocab: 0,
            embed_dim: 0,
            lstm_hidden: 0,
            hidden: vec![64, 32],
            conv_filters: (0, 0),
            kernel: 0,
            seed,
            epochs: 300,
            lr: 0.05,
            l2: 1e-4,
        }
    }

    pub fn lstm(window: usize, vocab: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            family: ModelFamily::Lstm,
            input_len: window,
            rows: 0,
            cols: 0,
            vocab,
            embed_dim: 16,
            lstm_hidden: 32,
            hidden: vec![32],
            conv_filters: (0, 0),
            kernel: 0,
            seed,
            epochs: 80,
            lr: 0.5,
            l2: 1e-5,
        }
    }

    pub fn cnn(rows: usize, cols: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            family: ModelFamily::Cnn,
            input_len: rows * cols,
            rows,
            cols,
            vocab: 0,
            embed_dim: 0,
            lstm_hidden: 0,
            hidden: vec![64],
            conv_filters: (8, 16),
            kernel: 3,
            seed,
            epochs: 60,
            lr: 0.1,
            l2: 1e-4,
        }
    }

    pub fn svm(input_len: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            family: ModelFamily::Svm,
            input_len,
            rows: 0,
            cols: 0,
            vocab: 0,
            embed_dim: 0,
            lstm_hidden: 0,
            hidden: Vec::new(),
            conv_filters: (0, 0),
            kernel: 0,
            seed,
            epochs: 200,
            lr: 0.5,
            l2: 1e-3,
        }
    }

    /// The model family a representation trains on.
    pub fn family_for(repr: ReprKind) -> ModelFamily {
        match repr {
            ReprKind::TypeSeq => ModelFamily::Lstm,
            ReprKind::ByteVec | ReprKind::HeaderVec => ModelFamily::Mlp,
            ReprKind::ByteMat => ModelFamily::Cnn,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// Named layer layout of the flat parameter vector.
pub fn layout(config: &ModelConfig) -> Result<Vec<LayerSpec>, ModelError> {
    let mut specs: Vec<LayerSpec> = Vec::new();
    let mut offset = 0usize;
    let mut push = |name: String, shape: Vec<usize>| {
        let len: usize = shape.iter().product();
        specs.push(LayerSpec {
            name,
            shape,
            offset,
            len,
        });
        offset += len;
    };
    match config.family {
        ModelFamily::Mlp => {
            let mut prev = config.input_len;
            for (i, h) in config.hidden.iter().enumerate() {
                push(format!("dense{i}.w"), vec![*h, prev]);
                push(format!("dense{i}.b"), vec![*h]);
                prev = *h;
            }
            push("out.w".into(), vec![1, prev]);
            push("out.b".into(), vec![1]);
        }
        ModelFamily::Svm => {
            push("w".into(), vec![config.input_len]);
            push("b".into(), vec![1]);
        }
        ModelFamily::Lstm => {
            let d = config.embed_dim;
            let h = config.lstm_hidden;
            if d == 0 || h == 0 {
                return Err(ModelError::ShapeMismatch("lstm dims must be positive".into()));
            }
            push("embed".into(), vec![config.vocab + 1, d]);
            push("lstm.w".into(), vec![4 * h, d + h]);
            push("lstm.b".into(), vec![4 * h]);
            let mut prev = h;
            for (i, dh) in config.hidden.iter().enumerate() {
                push(format!("dense{i}.w"), vec![*dh, prev]);
                push(format!("dense{i}.b"), vec![*dh]);
                prev = *dh;
            }
            push("out.w".into(), vec![1, prev]);
            push("out.b".into(), vec![1]);
        }
        ModelFamily::Cnn => {
            let (f1, f2) = config.conv_filters;
            let k = config.kernel;
            let (shapes, flat) = cnn::feature_shapes(config)?;
            let _ = shapes;
            push("conv1.w".into(), vec![f1, 1, k, k]);
            push("conv1.b".into(), vec![f1]);
            push("conv2.w".into(), vec![f2, f1, k, k]);
            push("conv2.b".into(), vec![f2]);
            let mut prev = flat;
            for (i, dh) in config.hidden.iter().enumerate() {
                push(format!("dense{i}.w"), vec![*dh, prev]);
                push(format!("dense{i}.b"), vec![*dh]);
                prev = *dh;
            }
            push("out.w".into(), vec![1, prev]);
            push("out.b".into(), vec![1]);
        }
    }
    Ok(specs)
}

/// Uniform init in [-r, r] with r = 1/sqrt(fan_in) per layer.
pub fn init_params(config: &ModelConfig) -> Result<Vec<f64>, ModelError> {
    let specs = layout(config)?;
    let total: usize = specs.iter().map(|s| s.len).sum();
    let mut params = vec![0.0; total];
    let mut rng = rng_from(config.seed);
    for spec in &specs {
        let fan_in = match spec.shape.len() {
            1 => spec.shape[0],                     // bias vectors
            2 => spec.shape[1],                     // dense rows x fan_in
            4 => spec.shape[1] * spec.shape[2] * spec.shape[3], // conv
            _ => spec.len,
        }
        .max(1);
        let r = 1.0 / (fan_in as f64).sqrt();
        for p in &mut params[spec.offset..spec.offset + spec.len] {
            *p = rng.gen_range(-r..=r);
        }
    }
    Ok(params)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    pub config: ModelConfig,
    pub params: Vec<f64>,
    pub loss_curve: Vec<f64>,
}

impl Weights {
    pub fn layer(&self, name: &str) -> Option<(LayerSpec, &[f64])> {
        let specs = layout(&self.config).ok()?;
        let spec = specs.into_iter().find(|s| s.name == name)?;
        let data = &self.params[spec.offset..spec.offset + spec.len];
        Some((spec, data))
    }
}

fn check_compat(config: &ModelConfig, sample: &SampleData) -> Result<(), ModelError> {
    let repr = sample.repr();
    let ok = matches!(
        (config.family, repr),
        (ModelFamily::Lstm, ReprKind::TypeSeq)
            | (ModelFamily::Mlp, ReprKind::ByteVec)
            | (ModelFamily::Mlp, ReprKind::HeaderVec)
            | (ModelFamily::Cnn, ReprKind::ByteMat)
            | (ModelFamily::Svm, _)
    );
    if !ok {
        return Err(ModelError::WrongFamily {
            family: config.family,
            repr,
        });
    }
    let expected = match config.family {
        ModelFamily::Lstm => config.input_len,
        ModelFamily::Cnn => config.rows * config.cols,
        _ => config.input_len,
    };
    if sample.feature_len() != expected {
        return Err(ModelError::ShapeMismatch(format!(
            "sample has {} features, model expects {expected}",
            sample.feature_len()
        )));
    }
    Ok(())
}

/// Mean training loss (including the L2 term) and its gradient over the
/// flat parameter vector.
pub fn loss_and_grad(
    config: &ModelConfig,
    params: &[f64],
    samples: &[Sample],
) -> Result<(f64, Vec<f64>), ModelError> {
    let (mut loss, mut grad) = match config.family {
        ModelFamily::Mlp => mlp::loss_grad(config, params, samples),
        ModelFamily::Lstm => lstm::loss_grad(config, params, samples),
        ModelFamily::Cnn => cnn::loss_grad(config, params, samples)?,
        // The SVM objective carries its own L2 inside its trainer.
        ModelFamily::Svm => return Ok(svm::loss_grad(config, params, samples)),
    };
    if config.l2 > 0.0 {
        for (g, p) in grad.iter_mut().zip(params) {
            *g += config.l2 * p;
        }
        loss += 0.5 * config.l2 * params.iter().map(|p| p * p).sum::<f64>();
    }
    Ok((loss, grad))
}

pub fn loss(config: &ModelConfig, params: &[f64], samples: &[Sample]) -> Result<f64, ModelError> {
    loss_and_grad(config, params, samples).map(|(l, _)| l)
}

/// Deterministic full-batch gradient descent on binary cross-entropy
/// (hinge for the SVM family, which trains with a decaying step).
pub fn train_model(config: &ModelConfig, split: &DatasetSplit) -> Result<Weights, ModelError> {
    if split.train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    check_compat(config, &split.train[0].x)?;
    if config.family == ModelFamily::Svm {
        return svm::train_linear_svm(config, split);
    }

    let mut params = init_params(config)?;
    let mut curve = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, grad) = loss_and_grad(config, &params, &split.train)?;
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss(epoch));
        }
        curve.push(loss);
        for (p, g) in params.iter_mut().zip(&grad) {
            *p -= config.lr * g;
        }
    }
    Ok(Weights {
        config: config.clone(),
        params,
        loss_curve: curve,
    })
}

/// Score in [0,1] for the sigmoid families, a signed margin for the SVM;
/// the label is malicious at score >= 0.5 (margin >= 0).
pub fn predict(weights: &Weights, x: &SampleData) -> Result<(f64, u8), ModelError> {
    check_compat(&weights.config, x)?;
    let score = match weights.config.family {
        ModelFamily::Mlp => mlp::score(&weights.config, &weights.params, x),
        ModelFamily::Lstm => lstm::score(&weights.config, &weights.params, x),
        ModelFamily::Cnn => cnn::score(&weights.config, &weights.params, x)?,
        ModelFamily::Svm => svm::score(&weights.config, &weights.params, x),
    };
    let label = match weights.config.family {
        ModelFamily::Svm => u8::from(score >= 0.0),
        _ => u8::from(score >= 0.5),
    };
    Ok((score, label))
}

/// Confusion-matrix metrics of a model over a labeled sample set.
pub fn evaluate(weights: &Weights, samples: &[Sample]) -> Result<Metrics, ModelError> {
    let mut confusion = Confusion::default();
    for s in samples {
        let (_, label) = predict(weights, &s.x)?;
        confusion.record(s.y, label);
    }
    Ok(compute_metrics(confusion))
}

// Checkpoint format: JSON with every number written as a 17-significant-
// digit decimal so reloading reproduces the exact bit pattern.

#[derive(Serialize, Deserialize)]
struct CheckpointLayer {
    name: String,
    shape: Vec<usize>,
    data: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    config: ModelConfig,
    layers: Vec<CheckpointLayer>,
    loss_curve: Vec<f64>,
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn checkpoint_to_string(weights: &Weights) -> Result<String, ModelError> {
    let specs = layout(&weights.config)?;
    let mut out = String::new();
    out.push_str("{\"config\":");
    out.push_str(&serde_json::to_string(&weights.config).expect("config serializes"));
    out.push_str(",\"layers\":[");
    for (i, spec) in specs.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&format!(
            "{{\"name\":\"{}\",\"shape\":{:?},\"data\":[",
            spec.name, spec.shape
        ));
        let data = &weights.params[spec.offset..spec.offset + spec.len];
        for (j, v) in data.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt17(*v));
        }
        out.push_str("]}");
    }
    out.push_str("],\"loss_curve\":[");
    for (j, v) in weights.loss_curve.iter().enumerate() {
        if j > 0 {
            out.push(',');
        }
        out.push_str(&fmt17(*v));
    }
    out.push_str("]}");
    Ok(out)
}

pub fn checkpoint_from_str(text: &str) -> Result<Weights, ModelError> {
    let file: CheckpointFile =
        serde_json::from_str(text).map_err(|e| ModelError::BadCheckpoint(e.to_string()))?;
    let specs = layout(&file.config)?;
    if specs.len() != file.layers.len() {
        return Err(ModelError::BadCheckpoint(format!(
            "expected {} layers, found {}",
            specs.len(),
            file.layers.len()
        )));
    }
    let total: usize = specs.iter().map(|s| s.len).sum();
    let mut params = vec![0.0; total];
    for (spec, layer) in specs.iter().zip(&file.layers) {
        if spec.name != layer.name || spec.shape != layer.shape || spec.len != layer.data.len() {
            return Err(ModelError::BadCheckpoint(format!(
                "layer {} does not match the config layout",
                layer.name
            )));
        }
        params[spec.offset..spec.offset + spec.len].copy_from_slice(&layer.data);
    }
    for v in params.iter().chain(&file.loss_curve) {
        if !v.is_finite() {
            return Err(ModelError::BadCheckpoint("non-finite value".into()));
        }
    }
    Ok(Weights {
        config: file.config,
        params,
        loss_curve: file.loss_curve,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_split(n: usize) -> DatasetSplit {
        // Linearly separable on feature 0.
        let train: Vec<Sample> = (0..n)
            .map(|i| {
                let hot = i % 2 == 1;
                let mut bytes = vec![10u8; 42];
                bytes[0] = if hot { 220 } else { 30 };
                bytes[1] = (i % 7) as u8;
                Sample {
                    x: SampleData::ByteVec(bytes),
                    y: u8::from(hot),
                }
            })
            .collect();
        DatasetSplit {
            train: train.clone(),
            test: train,
            seed: 0,
        }
    }

    #[test]
    fn separable_toy_set_reaches_full_training_accuracy() {
        let mut cfg = ModelConfig::mlp(42, 7);
        cfg.epochs = 200;
        cfg.lr = 0.8;
        let w = train_model(&cfg, &toy_split(20)).unwrap();
        let m = evaluate(&w, &toy_split(20).train).unwrap();
        assert_eq!(m.accuracy, Some(1.0));
    }

    #[test]
    fn training_reduces_the_loss() {
        for seed in 0..10 {
            let mut cfg = ModelConfig::mlp(42, seed);
            cfg.epochs = 50;
            cfg.lr = 0.5;
            let w = train_model(&cfg, &toy_split(40)).unwrap();
            assert!(
                w.loss_curve.last().unwrap() < w.loss_curve.first().unwrap(),
                "seed {seed}"
            );
        }
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let cfg = ModelConfig::mlp(42, 3);
        let a = train_model(&cfg, &toy_split(16)).unwrap();
        let b = train_model(&cfg, &toy_split(16)).unwrap();
        assert_eq!(
            checkpoint_to_string(&a).unwrap(),
            checkpoint_to_string(&b).unwrap()
        );
    }

    #[test]
    fn zero_weight_mlp_scores_one_half() {
        let cfg = ModelConfig::mlp(42, 0);
        let total: usize = layout(&cfg).unwrap().iter().map(|s| s.len).sum();
        let w = Weights {
            config: cfg,
            params: vec![0.0; total],
            loss_curve: Vec::new(),
        };
        let x = SampleData::ByteVec(vec![123; 42]);
        let (score, label) = predict(&w, &x).unwrap();
        assert_eq!(score, 0.5);
        assert_eq!(label, 1, "score exactly at the boundary counts positive");
    }

    #[test]
    fn prediction_is_pure_and_batch_equals_loop() {
        let cfg = ModelConfig::mlp(42, 5);
        let w = train_model(&cfg, &toy_split(12)).unwrap();
        let samples = toy_split(100).train;
        let loop_scores: Vec<f64> = samples
            .iter()
            .map(|s| predict(&w, &s.x).unwrap().0)
            .collect();
        let again: Vec<f64> = samples
            .iter()
            .map(|s| predict(&w, &s.x).unwrap().0)
            .collect();
        assert_eq!(loop_scores, again);
        let m1 = evaluate(&w, &samples).unwrap();
        let mut confusion = Confusion::default();
        for (s, score) in samples.iter().zip(&loop_scores) {
            confusion.record(s.y, u8::from(*score >= 0.5));
        }
        assert_eq!(m1.confusion, confusion);
    }

    #[test]
    fn checkpoints_reload_bit_exactly() {
        let cfg = ModelConfig::mlp(42, 11);
        let w = train_model(&cfg, &toy_split(10)).unwrap();
        let text = checkpoint_to_string(&w).unwrap();
        let back = checkpoint_from_str(&text).unwrap();
        assert_eq!(back.params, w.params);
        assert_eq!(back.loss_curve, w.loss_curve);
        assert_eq!(checkpoint_to_string(&back).unwrap(), text);
    }

    #[test]
    fn wrong_family_is_rejected() {
        let cfg = ModelConfig::cnn(8, 40, 0);
        let err = train_model(&cfg, &toy_split(4)).unwrap_err();
        assert!(matches!(err, ModelError::WrongFamily { .. }));
    }
}
