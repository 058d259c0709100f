//! Mini-batch training loop.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{image_input, predict, Network};
use crate::augment::{random_erase_black, AugmentConfig};
use crate::dataset::{split, LabeledImageSet};
use crate::error::{Error, Result};
use crate::metrics::{confusion, scores, ConfusionMatrix, Scores};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerConfig {
    Sgd,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerConfig,
    /// Seeds shuffling, random erasing and the validation split.
    pub rng_seed: u64,
    /// Holds out this fraction of the training data and returns the weights
    /// of the epoch with the best validation accuracy.
    pub validation_fraction: Option<f64>,
    /// Random erasing applied to every training image, freshly drawn each epoch.
    pub random_erase: Option<AugmentConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 60,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: OptimizerConfig::default(),
            rng_seed: 0,
            validation_fraction: None,
            random_erase: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch_size must be positive".into()));
        }
        // zero is accepted: it freezes the weights
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate must be a finite non-negative number, got {}",
                self.learning_rate
            )));
        }
        if let Some(f) = self.validation_fraction {
            if !(f > 0.0 && f < 1.0) {
                return Err(Error::FractionOutOfRange(f));
            }
        }
        if let Some(re) = &self.random_erase {
            re.validate()?;
        }
        Ok(())
    }
}

/// Macro-averaged scores on a held-out set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub macro_f1: f64,
}

impl From<&Scores> for EvalMetrics {
    fn from(s: &Scores) -> Self {
        EvalMetrics {
            accuracy: s.accuracy,
            precision: s.macro_precision,
            recall: s.macro_recall,
            macro_f1: s.macro_f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch's batches.
    pub loss: f64,
    /// Categorical accuracy on the training batches, before each update.
    pub accuracy: f64,
    pub eval: Option<EvalMetrics>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub network: Network,
    pub history: Vec<EpochRecord>,
    /// Epoch whose weights were kept when validating.
    pub best_epoch: Option<usize>,
}

enum Optimizer {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
        step: i32,
        m: Vec<f64>,
        v: Vec<f64>,
    },
}

impl Optimizer {
    fn new(config: OptimizerConfig, n: usize) -> Self {
        match config {
            OptimizerConfig::Sgd => Optimizer::Sgd,
            OptimizerConfig::Adam { beta1, beta2, epsilon } => Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
                step: 0,
                m: vec![0.0; n],
                v: vec![0.0; n],
            },
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        match self {
            Optimizer::Sgd => {
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
            }
            Optimizer::Adam {
                beta1,
                beta2,
                epsilon,
                step,
                m,
                v,
            } => {
                *step += 1;
                let c1 = 1.0 - beta1.powi(*step);
                let c2 = 1.0 - beta2.powi(*step);
                for (((p, g), m), v) in params.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                    *m = *beta1 * *m + (1.0 - *beta1) * g;
                    *v = *beta2 * *v + (1.0 - *beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + *epsilon);
                }
            }
        }
    }
}

fn class_indices(set: &LabeledImageSet, classes: &[String]) -> Result<Vec<usize>> {
    set.images
        .iter()
        .map(|img| {
            classes
                .iter()
                .position(|c| c == &img.label)
                .ok_or_else(|| Error::Manifest(format!("label `{}` is not a known class", img.label)))
        })
        .collect()
}

/// Confusion matrix and scores of `net` on `set`.
pub fn evaluate(net: &Network, set: &LabeledImageSet, classes: &[String]) -> Result<(ConfusionMatrix, Scores)> {
    let truth = class_indices(set, classes)?;
    let predicted = predict(net, &set.images)?;
    let cm = confusion(&truth, &predicted, classes.len())?;
    let s = scores(&cm)?;
    Ok((cm, s))
}

const ERASE_DOMAIN: u64 = 1 << 40;
const VALIDATION_DOMAIN: u64 = 1 << 41;

/// Trains `net` on `data`. `classes[i]` is the label of output `i`.
///
/// When `monitor` is given (and no validation fraction is configured) it is
/// scored after every epoch for the history only; it never influences the
/// returned weights.
pub fn train(
    mut net: Network,
    data: &LabeledImageSet,
    classes: &[String],
    config: &TrainConfig,
    monitor: Option<&LabeledImageSet>,
) -> Result<TrainOutcome> {
    config.validate()?;
    if classes.len() != net.spec().num_classes {
        return Err(Error::ShapeMismatch {
            expected: format!("{} classes", net.spec().num_classes),
            got: format!("{} class names", classes.len()),
        });
    }
    let (fit, held_out) = match config.validation_fraction {
        Some(f) => {
            let (fit, val) = split(data, f, rng::derive_seed(config.rng_seed, VALIDATION_DOMAIN))?;
            (fit, Some(val))
        }
        None => (data.clone(), None),
    };
    if fit.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let eval_set = held_out.as_ref().filter(|v| !v.is_empty()).or(monitor);
    let labels = class_indices(&fit, classes)?;
    if let Some(bad) = fit.images.iter().find(|i| i.edge() != net.spec().input_edge) {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0} images", net.spec().input_edge),
            got: format!("{0}x{0}", bad.edge()),
        });
    }
    let clean_inputs: Vec<Vec<f64>> = fit.images.iter().map(image_input).collect();

    let mut optimizer = Optimizer::new(config.optimizer, net.num_params());
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let n = fit.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; net.num_params()];

    for epoch in 0..config.epochs {
        order.sort_unstable();
        order.shuffle(&mut rng::stream(config.rng_seed, epoch as u64));
        let erase_seed = rng::derive_seed(config.rng_seed, ERASE_DOMAIN + epoch as u64);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in batch {
                let (loss, hit) = match &config.random_erase {
                    Some(re) => {
                        let erased = random_erase_black(&fit.images[i], re, &mut rng::stream(erase_seed, i as u64));
                        net.accumulate_sample(&image_input(&erased), labels[i], &mut grad)
                    }
                    None => net.accumulate_sample(&clean_inputs[i], labels[i], &mut grad),
                };
                loss_sum += loss;
                correct += hit as usize;
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            optimizer.step(net.params_mut(), &grad, config.learning_rate);
        }
        if net.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Training(format!(
                "parameters became non-finite at epoch {epoch}; lower the learning rate"
            )));
        }
        let eval = match eval_set {
            Some(set) => Some(EvalMetrics::from(&evaluate(&net, set, classes)?.1)),
            None => None,
        };
        if held_out.is_some() {
            if let Some(m) = eval {
                if best.as_ref().is_none_or(|(acc, _, _)| m.accuracy > *acc) {
                    best = Some((m.accuracy, epoch, net.params().to_vec()));
                }
            }
        }
        history.push(EpochRecord {
            epoch,
            loss: loss_sum / n as f64,
            accuracy: correct as f64 / n as f64,
            eval,
        });
    }

    let best_epoch = best.map(|(_, epoch, params)| {
        net.params_mut().copy_from_slice(&params);
        epoch
    });
    Ok(TrainOutcome {
        network: net,
        history,
        best_epoch,
    })
}
