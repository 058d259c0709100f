//! Helpers shared by integration test targets.

#![allow(dead_code)]

use rand::Rng;
use ts2img::classifier::{loss_and_grad, LayerSpec, Network, NetworkSpec, Tensor};
use ts2img::rng;

pub const EPS: f64 = 1e-4;
pub const TOLERANCE: f64 = 1e-4;
// denominators below this are treated as this, so near-zero gradients are
// compared in absolute terms
pub const FLOOR: f64 = 1e-6;

/// Two 3×3 filters on an 8×8 input, pooled into a 3-way dense layer.
pub fn tiny_spec() -> NetworkSpec {
    NetworkSpec {
        layers: vec![
            LayerSpec::Conv {
                out_channels: 2,
                kernel: 3,
                stride: 1,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool { kernel: 2 },
            LayerSpec::Flatten,
            LayerSpec::Dense { out_features: 3 },
            LayerSpec::Softmax,
        ],
        input_edge: 8,
        num_classes: 3,
    }
}

pub fn deep_spec() -> NetworkSpec {
    NetworkSpec {
        layers: vec![
            LayerSpec::Conv {
                out_channels: 3,
                kernel: 3,
                stride: 1,
            },
            LayerSpec::Relu,
            LayerSpec::Conv {
                out_channels: 2,
                kernel: 2,
                stride: 2,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool { kernel: 2 },
            LayerSpec::Flatten,
            LayerSpec::Dense { out_features: 5 },
            LayerSpec::Relu,
            LayerSpec::Dense { out_features: 3 },
        ],
        input_edge: 10,
        num_classes: 3,
    }
}

/// Worst relative error between analytic and central-difference gradients
/// over every parameter, on a random batch of three images.
pub fn worst_relative_error(spec: NetworkSpec, seed: u64) -> f64 {
    let mut net = Network::new(spec, seed).unwrap();
    // nonzero biases so ReLUs and pools see generic inputs
    let mut r = rng::seeded(seed + 100);
    for p in net.params_mut() {
        *p += r.random_range(-0.05..0.05);
    }
    let edge = net.spec().input_edge;
    let batch = Tensor::new(
        vec![3, 1, edge, edge],
        (0..3 * edge * edge).map(|_| r.random::<f64>()).collect(),
    )
    .unwrap();
    let labels = [0, 2, 1];
    let (_, analytic) = loss_and_grad(&net, &batch, &labels).unwrap();
    let mut worst: f64 = 0.0;
    for k in 0..net.num_params() {
        let original = net.params()[k];
        net.params_mut()[k] = original + EPS;
        let plus = loss_and_grad(&net, &batch, &labels).unwrap().0;
        net.params_mut()[k] = original - EPS;
        let minus = loss_and_grad(&net, &batch, &labels).unwrap().0;
        net.params_mut()[k] = original;
        let numeric = (plus - minus) / (2.0 * EPS);
        let rel = (analytic[k] - numeric).abs() / analytic[k].abs().max(numeric.abs()).max(FLOOR);
        worst = worst.max(rel);
    }
    worst
}
