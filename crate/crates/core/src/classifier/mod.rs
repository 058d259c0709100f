//! A small convolutional network with hand-written backpropagation.

mod checkpoint;
mod layers;
mod tensor;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, Checkpoint};
pub use layers::{LayerSpec, Shape};
pub use tensor::Tensor;
pub use train::{evaluate, train, EpochRecord, EvalMetrics, OptimizerConfig, TrainConfig, TrainOutcome};

use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rng;
use layers::Layer;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub layers: Vec<LayerSpec>,
    pub input_edge: usize,
    pub num_classes: usize,
}

impl NetworkSpec {
    /// conv(8, 3×3) → relu → pool 2 → conv(16, 3×3) → relu → pool 2 →
    /// dense(32) → relu → dense(classes) → softmax
    pub fn default_for(input_edge: usize, num_classes: usize) -> Self {
        let conv = |out_channels, kernel, stride| LayerSpec::Conv {
            out_channels,
            kernel,
            stride,
        };
        NetworkSpec {
            layers: vec![
                conv(8, 3, 1),
                LayerSpec::Relu,
                LayerSpec::MaxPool { kernel: 2 },
                conv(16, 3, 1),
                LayerSpec::Relu,
                LayerSpec::MaxPool { kernel: 2 },
                LayerSpec::Flatten,
                LayerSpec::Dense { out_features: 32 },
                LayerSpec::Relu,
                LayerSpec::Dense {
                    out_features: num_classes,
                },
                LayerSpec::Softmax,
            ],
            input_edge,
            num_classes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    spec: NetworkSpec,
    layers: Vec<Layer>,
    params: Vec<f64>,
}

impl Network {
    /// Network with every parameter set to zero.
    pub fn zeroed(spec: NetworkSpec) -> Result<Self> {
        let input = Shape::Map {
            channels: 1,
            height: spec.input_edge,
            width: spec.input_edge,
        };
        let (layers, output, n_params) = layers::resolve(&spec.layers, input)?;
        if output != Shape::Flat(spec.num_classes) {
            return Err(Error::ShapeMismatch {
                expected: format!("{} output logits", spec.num_classes),
                got: format!("{output:?}"),
            });
        }
        Ok(Network {
            spec,
            layers,
            params: vec![0.0; n_params],
        })
    }

    /// He-uniform weights drawn from `seed`, zero biases.
    pub fn new(spec: NetworkSpec, seed: u64) -> Result<Self> {
        let mut net = Network::zeroed(spec)?;
        let mut rng = rng::seeded(seed);
        for layer in &net.layers {
            if let Some((offset, fan_in, n_weights, _)) = layer.param_block() {
                let limit = (6.0 / fan_in as f64).sqrt();
                for w in &mut net.params[offset..offset + n_weights] {
                    *w = rng.random_range(-limit..limit);
                }
            }
        }
        Ok(net)
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    /// Activations of every layer for one sample; the last entry holds the logits.
    fn activations(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        for layer in &self.layers {
            let next = layer.forward(&self.params, acts.last().expect("non-empty"));
            acts.push(next);
        }
        acts
    }

    pub(crate) fn probabilities(&self, input: &[f64]) -> Vec<f64> {
        softmax(self.activations(input).last().expect("non-empty"))
    }

    /// Cross-entropy of one sample; adds its parameter gradient into `grad`.
    /// Returns the loss and whether the argmax matched `label`.
    pub(crate) fn accumulate_sample(&self, input: &[f64], label: usize, grad: &mut [f64]) -> (f64, bool) {
        let acts = self.activations(input);
        let logits = acts.last().expect("non-empty");
        let probs = softmax(logits);
        let loss = log_sum_exp(logits) - logits[label];
        let correct = argmax(&probs) == label;
        let mut delta: Vec<f64> = probs;
        delta[label] -= 1.0;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            delta = layer.backward(&self.params, &acts[i], &acts[i + 1], &delta, grad, i > 0);
        }
        (loss, correct)
    }

    fn check_batch(&self, batch: &Tensor) -> Result<usize> {
        let e = self.spec.input_edge;
        match batch.shape() {
            [n, 1, h, w] if *h == e && *w == e => Ok(*n),
            other => Err(Error::ShapeMismatch {
                expected: format!("[N, 1, {e}, {e}]"),
                got: format!("{other:?}"),
            }),
        }
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Class probabilities for a `[N, 1, E, E]` batch, as an `[N, C]` tensor.
pub fn forward(net: &Network, batch: &Tensor) -> Result<Tensor> {
    let n = net.check_batch(batch)?;
    let mut data = Vec::with_capacity(n * net.spec.num_classes);
    for i in 0..n {
        data.extend(net.probabilities(batch.row(i)));
    }
    Tensor::new(vec![n, net.spec.num_classes], data)
}

/// Mean cross-entropy over the batch and its gradient, laid out like
/// [`Network::params`]. Sample gradients are summed in index order.
pub fn loss_and_grad(net: &Network, batch: &Tensor, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
    let n = net.check_batch(batch)?;
    if labels.len() != n {
        return Err(Error::LengthMismatch {
            left: n,
            right: labels.len(),
        });
    }
    if let Some(&class) = labels.iter().find(|&&l| l >= net.spec.num_classes) {
        return Err(Error::InvalidClass {
            class,
            num_classes: net.spec.num_classes,
        });
    }
    let mut grad = vec![0.0; net.num_params()];
    let mut loss = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        loss += net.accumulate_sample(batch.row(i), label, &mut grad).0;
    }
    let scale = 1.0 / n as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}

/// Pixel bytes scaled to `[0, 1]`.
pub fn image_input(image: &GrayImage) -> Vec<f64> {
    image.pixels().iter().map(|&p| p as f64 / 255.0).collect()
}

pub fn images_to_batch(images: &[GrayImage]) -> Result<Tensor> {
    let edge = images.first().ok_or(Error::EmptyDataset)?.edge();
    if let Some(bad) = images.iter().find(|i| i.edge() != edge) {
        return Err(Error::ShapeMismatch {
            expected: format!("{edge}x{edge} images"),
            got: format!("{0}x{0}", bad.edge()),
        });
    }
    let data = images.iter().flat_map(image_input).collect();
    Tensor::new(vec![images.len(), 1, edge, edge], data)
}

/// Most probable class of each image.
pub fn predict(net: &Network, images: &[GrayImage]) -> Result<Vec<usize>> {
    if let Some(bad) = images.iter().find(|i| i.edge() != net.spec.input_edge) {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0} images", net.spec.input_edge),
            got: format!("{0}x{0}", bad.edge()),
        });
    }
    Ok(images
        .iter()
        .map(|img| argmax(&net.probabilities(&image_input(img))))
        .collect())
}
