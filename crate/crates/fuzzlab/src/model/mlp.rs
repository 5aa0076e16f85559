//! Fully-connected network: ReLU hidden layers, sigmoid output, binary
//! cross-entropy.

use crate::data::{Sample, SampleData};

use super::ModelConfig;

pub(crate) fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub(crate) fn bce(p: f64, y: f64) -> f64 {
    let eps = 1e-12;
    -(y * (p + eps).ln() + (1.0 - y) * (1.0 - p + eps).ln())
}

struct Slices {
    // (w_offset, b_offset, rows, cols) per dense layer, output last.
    layers: Vec<(usize, usize, usize, usize)>,
}

fn slices(config: &ModelConfig) -> Slices {
    let mut layers = Vec::new();
    let mut offset = 0;
    let mut prev = config.input_len;
    for h in &config.hidden {
        layers.push((offset, offset + h * prev, *h, prev));
        offset += h * prev + h;
        prev = *h;
    }
    layers.push((offset, offset + prev, 1, prev));
    Slices { layers }
}

struct Forward {
    activations: Vec<Vec<f64>>, // input + post-relu per hidden layer
    zs: Vec<Vec<f64>>,          // pre-activation per layer (output last)
    p: f64,
}

fn forward(config: &ModelConfig, params: &[f64], x: &[f64]) -> Forward {
    let s = slices(config);
    let mut activations = vec![x.to_vec()];
    let mut zs = Vec::with_capacity(s.layers.len());
    for (li, (wo, bo, rows, cols)) in s.layers.iter().enumerate() {
        let a = activations.last().unwrap();
        let mut z = vec![0.0; *rows];
        for r in 0..*rows {
            let mut acc = params[bo + r];
            let w = &params[wo + r * cols..wo + (r + 1) * cols];
            for (wv, av) in w.iter().zip(a) {
                acc += wv * av;
            }
            z[r] = acc;
        }
        let last = li == s.layers.len() - 1;
        if !last {
            activations.push(z.iter().map(|v| v.max(0.0)).collect());
        }
        zs.push(z);
    }
    let p = sigmoid(zs.last().unwrap()[0]);
    Forward { activations, zs, p }
}

pub(crate) fn score(config: &ModelConfig, params: &[f64], x: &SampleData) -> f64 {
    forward(config, params, &x.features()).p
}

pub(crate) fn loss_grad(
    config: &ModelConfig,
    params: &[f64],
    samples: &[Sample],
) -> (f64, Vec<f64>) {
    let s = slices(config);
    let mut grad = vec![0.0; params.len()];
    let mut total = 0.0;
    let n = samples.len() as f64;

    for sample in samples {
        let x = sample.x.features();
        let y = f64::from(sample.y);
        let f = forward(config, params, &x);
        total += bce(f.p, y);

        // d loss / d z_out for sigmoid + cross-entropy.
        let mut dz = vec![f.p - y];
        for (li, (wo, bo, rows, cols)) in s.layers.iter().enumerate().rev() {
            let a_in = &f.activations[li];
            for r in 0..*rows {
                grad[bo + r] += dz[r] / n;
                for c in 0..*cols {
                    grad[wo + r * cols + c] += dz[r] * a_in[c] / n;
                }
            }
            if li == 0 {
                break;
            }
            // Propagate through the previous ReLU.
            let z_prev = &f.zs[li - 1];
            let mut da = vec![0.0; *cols];
            for (r, dzr) in dz.iter().enumerate() {
                for (c, dav) in da.iter_mut().enumerate() {
                    *dav += params[wo + r * cols + c] * dzr;
                }
            }
            dz = da
                .iter()
                .zip(z_prev)
                .map(|(d, z)| if *z > 0.0 { *d } else { 0.0 })
                .collect();
        }
    }
    (total / n, grad)
}
