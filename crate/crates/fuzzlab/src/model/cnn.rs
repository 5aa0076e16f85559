//! Small CNN for byte matrices viewed as grayscale images: two valid 3x3
//! convolutions with ReLU, a 2x2 max-pool after each (a pool dimension
//! degenerates to 1 when the feature map is thinner than 2), one dense
//! hidden layer, sigmoid output.

use crate::data::{Sample, SampleData};

use super::mlp::{bce, sigmoid};
use super::{ModelConfig, ModelError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct MapShape {
    pub ch: usize,
    pub rows: usize,
    pub cols: usize,
}

impl MapShape {
    fn len(&self) -> usize {
        self.ch * self.rows * self.cols
    }
}

fn pool_dims(rows: usize, cols: usize) -> (usize, usize) {
    (rows.min(2).max(1), cols.min(2).max(1))
}

/// Feature-map shapes after each stage, plus the flattened width feeding
/// the dense head.
pub(crate) fn feature_shapes(config: &ModelConfig) -> Result<(Vec<MapShape>, usize), ModelError> {
    let k = config.kernel;
    let (f1, f2) = config.conv_filters;
    let mut shapes = Vec::new();
    let mut cur = MapShape { ch: 1, rows: config.rows, cols: config.cols };
    shapes.push(cur);
    for f in [f1, f2] {
        if cur.rows < k || cur.cols < k {
            return Err(ModelError::ShapeMismatch(format!(
                "{}x{} map is smaller than the {k}x{k} kernel",
                cur.rows, cur.cols
            )));
        }
        cur = MapShape { ch: f, rows: cur.rows - k + 1, cols: cur.cols - k + 1 };
        shapes.push(cur);
        let (ph, pw) = pool_dims(cur.rows, cur.cols);
        cur = MapShape { ch: f, rows: cur.rows / ph, cols: cur.cols / pw };
        shapes.push(cur);
    }
    Ok((shapes, cur.len()))
}

struct Offsets {
    conv1_w: usize,
    conv1_b: usize,
    conv2_w: usize,
    conv2_b: usize,
    dense: Vec<(usize, usize, usize, usize)>, // (w, b, rows, cols), output last
}

fn offsets(config: &ModelConfig, flat: usize) -> Offsets {
    let k = config.kernel;
    let (f1, f2) = config.conv_filters;
    let conv1_w = 0;
    let conv1_b = conv1_w + f1 * k * k;
    let conv2_w = conv1_b + f1;
    let conv2_b = conv2_w + f2 * f1 * k * k;
    let mut offset = conv2_b + f2;
    let mut dense = Vec::new();
    let mut prev = flat;
    for h in &config.hidden {
        dense.push((offset, offset + h * prev, *h, prev));
        offset += h * prev + h;
        prev = *h;
    }
    dense.push((offset, offset + prev, 1, prev));
    Offsets { conv1_w, conv1_b, conv2_w, conv2_b, dense }
}

fn conv_forward(
    input: &[f64],
    in_shape: MapShape,
    w: &[f64],
    b: &[f64],
    filters: usize,
    k: usize,
) -> (Vec<f64>, MapShape) {
    let out = MapShape { ch: filters, rows: in_shape.rows - k + 1, cols: in_shape.cols - k + 1 };
    let mut data = vec![0.0; out.len()];
    for f in 0..filters {
        for i in 0..out.rows {
            for j in 0..out.cols {
                let mut acc = b[f];
                for c in 0..in_shape.ch {
                    for u in 0..k {
                        for v in 0..k {
                            let wi = ((f * in_shape.ch + c) * k + u) * k + v;
                            let xi = (c * in_shape.rows + i + u) * in_shape.cols + j + v;
                            acc += w[wi] * input[xi];
                        }
                    }
                }
                data[(f * out.rows + i) * out.cols + j] = acc;
            }
        }
    }
    (data, out)
}

fn pool_forward(input: &[f64], shape: MapShape) -> (Vec<f64>, Vec<usize>, MapShape) {
    let (ph, pw) = pool_dims(shape.rows, shape.cols);
    let out = MapShape { ch: shape.ch, rows: shape.rows / ph, cols: shape.cols / pw };
    let mut data = vec![0.0; out.len()];
    let mut argmax = vec![0usize; out.len()];
    for c in 0..shape.ch {
        for i in 0..out.rows {
            for j in 0..out.cols {
                let mut best = f64::NEG_INFINITY;
                let mut best_idx = 0;
                for u in 0..ph {
                    for v in 0..pw {
                        let idx = (c * shape.rows + i * ph + u) * shape.cols + j * pw + v;
                        if input[idx] > best {
                            best = input[idx];
                            best_idx = idx;
                        }
                    }
                }
                let o = (c * out.rows + i) * out.cols + j;
                data[o] = best;
                argmax[o] = best_idx;
            }
        }
    }
    (data, argmax, out)
}

struct Forward {
    grid: Vec<f64>,
    conv1_z: Vec<f64>,
    pool1: Vec<f64>,
    pool1_arg: Vec<usize>,
    conv2_z: Vec<f64>,
    pool2: Vec<f64>,
    pool2_arg: Vec<usize>,
    dense_in: Vec<Vec<f64>>,
    dense_z: Vec<Vec<f64>>,
    p: f64,
    s1: MapShape,
    s1p: MapShape,
    s2: MapShape,
}

fn forward(config: &ModelConfig, params: &[f64], grid: Vec<f64>) -> Result<Forward, ModelError> {
    let k = config.kernel;
    let (f1, f2) = config.conv_filters;
    let (_, flat) = feature_shapes(config)?;
    let off = offsets(config, flat);
    let in_shape = MapShape { ch: 1, rows: config.rows, cols: config.cols };

    let (conv1_z, s1) = conv_forward(
        &grid,
        in_shape,
        &params[off.conv1_w..off.conv1_b],
        &params[off.conv1_b..off.conv2_w],
        f1,
        k,
    );
    let conv1_a: Vec<f64> = conv1_z.iter().map(|v| v.max(0.0)).collect();
    let (pool1, pool1_arg, s1p) = pool_forward(&conv1_a, s1);

    let (conv2_z, s2) = conv_forward(
        &pool1,
        s1p,
        &params[off.conv2_w..off.conv2_b],
        &params[off.conv2_b..off.conv2_b + f2],
        f2,
        k,
    );
    let conv2_a: Vec<f64> = conv2_z.iter().map(|v| v.max(0.0)).collect();
    let (pool2, pool2_arg, _s2p) = pool_forward(&conv2_a, s2);

    let mut dense_in = vec![pool2.clone()];
    let mut dense_z = Vec::new();
    for (li, (wo, bo, rows, cols)) in off.dense.iter().enumerate() {
        let a = dense_in.last().unwrap();
        let mut z = vec![0.0; *rows];
        for r in 0..*rows {
            let mut acc = params[bo + r];
            for c in 0..*cols {
                acc += params[wo + r * cols + c] * a[c];
            }
            z[r] = acc;
        }
        if li != off.dense.len() - 1 {
            dense_in.push(z.iter().map(|v| v.max(0.0)).collect());
        }
        dense_z.push(z);
    }
    let p = sigmoid(dense_z.last().unwrap()[0]);
    Ok(Forward {
        grid,
        conv1_z,
        pool1,
        pool1_arg,
        conv2_z,
        pool2,
        pool2_arg,
        dense_in,
        dense_z,
        p,
        s1,
        s1p,
        s2,
    })
}

fn grid_of(x: &SampleData) -> Vec<f64> {
    x.features()
}

pub(crate) fn score(config: &ModelConfig, params: &[f64], x: &SampleData) -> Result<f64, ModelError> {
    Ok(forward(config, params, grid_of(x))?.p)
}

pub(crate) fn loss_grad(
    config: &ModelConfig,
    params: &[f64],
    samples: &[Sample],
) -> Result<(f64, Vec<f64>), ModelError> {
    let k = config.kernel;
    let (f1, f2) = config.conv_filters;
    let (_, flat) = feature_shapes(config)?;
    let off = offsets(config, flat);
    let mut grad = vec![0.0; params.len()];
    let mut total = 0.0;
    let n = samples.len() as f64;

    for sample in samples {
        let y = f64::from(sample.y);
        let f = forward(config, params, grid_of(&sample.x))?;
        total += bce(f.p, y);

        // Dense head, mirroring the MLP backward pass.
        let mut dz = vec![f.p - y];
        let mut d_flat = vec![0.0; flat];
        for (li, (wo, bo, rows, cols)) in off.dense.iter().enumerate().rev() {
            let a_in = &f.dense_in[li];
            let mut da = vec![0.0; *cols];
            for r in 0..*rows {
                grad[bo + r] += dz[r] / n;
                for c in 0..*cols {
                    grad[wo + r * cols + c] += dz[r] * a_in[c] / n;
                    da[c] += params[wo + r * cols + c] * dz[r];
                }
            }
            if li == 0 {
                d_flat = da;
                break;
            }
            let z_prev = &f.dense_z[li - 1];
            dz = da
                .iter()
                .zip(z_prev)
                .map(|(d, z)| if *z > 0.0 { *d } else { 0.0 })
                .collect();
        }

        // Un-pool into conv2 pre-activations.
        let mut d_conv2 = vec![0.0; f.conv2_z.len()];
        for (o, src) in f.pool2_arg.iter().enumerate() {
            if f.conv2_z[*src] > 0.0 {
                d_conv2[*src] += d_flat[o];
            }
        }

        // conv2 parameter gradients and inflow to pool1.
        let mut d_pool1 = vec![0.0; f.pool1.len()];
        for fo in 0..f2 {
            for i in 0..f.s2.rows {
                for j in 0..f.s2.cols {
                    let d = d_conv2[(fo * f.s2.rows + i) * f.s2.cols + j];
                    if d == 0.0 {
                        continue;
                    }
                    grad[off.conv2_b + fo] += d / n;
                    for c in 0..f1 {
                        for u in 0..k {
                            for v in 0..k {
                                let wi = off.conv2_w + ((fo * f1 + c) * k + u) * k + v;
                                let xi = (c * f.s1p.rows + i + u) * f.s1p.cols + j + v;
                                grad[wi] += d * f.pool1[xi] / n;
                                d_pool1[xi] += params[wi] * d;
                            }
                        }
                    }
                }
            }
        }

        // Un-pool into conv1 pre-activations.
        let mut d_conv1 = vec![0.0; f.conv1_z.len()];
        for (o, src) in f.pool1_arg.iter().enumerate() {
            if f.conv1_z[*src] > 0.0 {
                d_conv1[*src] += d_pool1[o];
            }
        }

        for fo in 0..f1 {
            for i in 0..f.s1.rows {
                for j in 0..f.s1.cols {
                    let d = d_conv1[(fo * f.s1.rows + i) * f.s1.cols + j];
                    if d == 0.0 {
                        continue;
                    }
                    grad[off.conv1_b + fo] += d / n;
                    for u in 0..k {
                        for v in 0..k {
                            let wi = off.conv1_w + (fo * k + u) * k + v;
                            let xi = (i + u) * config.cols + j + v;
                            grad[wi] += d * f.grid[xi] / n;
                        }
                    }
                }
            }
        }
    }
    Ok((total / n, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_chain_for_the_default_matrix() {
        let cfg = ModelConfig::cnn(8, 40, 0);
        let (shapes, flat) = feature_shapes(&cfg).unwrap();
        assert_eq!(shapes[1], MapShape { ch: 8, rows: 6, cols: 38 });
        assert_eq!(shapes[2], MapShape { ch: 8, rows: 3, cols: 19 });
        assert_eq!(shapes[3], MapShape { ch: 16, rows: 1, cols: 17 });
        assert_eq!(shapes[4], MapShape { ch: 16, rows: 1, cols: 8 });
        assert_eq!(flat, 128);
    }

    #[test]
    fn too_small_grids_are_rejected() {
        let cfg = ModelConfig::cnn(2, 40, 0);
        assert!(matches!(
            feature_shapes(&cfg),
            Err(ModelError::ShapeMismatch(_))
        ));
    }
}
