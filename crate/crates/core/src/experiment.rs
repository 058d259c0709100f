//! End-to-end experiment runs and configuration sweeps.
//!
//! One run goes: corpus → (optional moving average) → encode → balance →
//! split → train (optional random erasing in the loader) → evaluate. Each
//! row is repeated with seeds derived from the master seed and the row index,
//! so rows never share random streams.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::augment::AugmentConfig;
use crate::classifier::{self, EpochRecord, Network, NetworkSpec, TrainConfig};
use crate::dataset::{self, BalanceConfig, SyntheticSpec};
use crate::encoder::{EncodingConfig, Stencil};
use crate::error::{Error, Result};
use crate::rng;
use crate::series::TimeSeries;

/// Balancing policy inside experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BalanceSection {
    /// Fixed per-class count. `None` downsamples every class to the
    /// smallest one, so no synthetic images are added.
    pub target_per_class: Option<usize>,
}

impl Default for BalanceSection {
    fn default() -> Self {
        BalanceSection {
            target_per_class: Some(200),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentationFlags {
    /// Add moving-average smoothed copies of every series.
    pub ma: bool,
    /// Random erasing of training images.
    pub re: bool,
}

impl AugmentationFlags {
    pub fn tag(&self) -> &'static str {
        match (self.ma, self.re) {
            (false, false) => "-",
            (true, false) => "MA",
            (false, true) => "RE",
            (true, true) => "MA+RE",
        }
    }
}

/// One row of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub id: usize,
    pub window_length: usize,
    pub image_edge: usize,
    #[serde(default = "default_stencil")]
    pub stencil_points: Stencil,
    #[serde(default)]
    pub augmentation: AugmentationFlags,
    /// Overrides the section-wide repetition count.
    #[serde(default)]
    pub repetitions: Option<usize>,
}

fn default_stencil() -> Stencil {
    Stencil::Three
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub master_seed: u64,
    pub repetitions: usize,
    pub test_fraction: f64,
    /// Write per-run manifests and model checkpoints.
    pub artifacts: bool,
    /// Rows to run; empty means [`default_grid`].
    pub rows: Vec<ExperimentSpec>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            master_seed: 0,
            repetitions: 3,
            test_fraction: 0.2,
            artifacts: false,
            rows: Vec::new(),
        }
    }
}

/// The single configuration document accepted by the CLI.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Series recipes; empty means the three built-in presets.
    pub synthetic: Vec<SyntheticSpec>,
    pub encoding: EncodingConfig,
    pub augment: AugmentConfig,
    pub balance: BalanceSection,
    pub train: TrainConfig,
    /// Network layout; `None` uses [`NetworkSpec::default_for`].
    pub network: Option<NetworkSpec>,
    pub experiment: ExperimentSection,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: PipelineConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        PipelineConfig::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.encoding.validate()?;
        self.augment.validate()?;
        self.train.validate()?;
        for spec in &self.synthetic {
            spec.validate()?;
        }
        let f = self.experiment.test_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::FractionOutOfRange(f));
        }
        if self.experiment.repetitions == 0 {
            return Err(Error::InvalidConfig("experiment.repetitions must be positive".into()));
        }
        for row in &self.experiment.rows {
            row.encoding(&self.encoding).validate()?;
        }
        Ok(())
    }

    /// Synthetic recipes in effect, with presets seeded from `seed`.
    pub fn synthetic_specs(&self, seed: u64) -> Vec<SyntheticSpec> {
        if self.synthetic.is_empty() {
            dataset::preset_specs(seed)
        } else {
            self.synthetic.clone()
        }
    }

    pub fn rows(&self) -> Vec<ExperimentSpec> {
        if self.experiment.rows.is_empty() {
            default_grid()
        } else {
            self.experiment.rows.clone()
        }
    }
}

impl ExperimentSpec {
    pub fn encoding(&self, base: &EncodingConfig) -> EncodingConfig {
        EncodingConfig {
            image_edge: self.image_edge,
            window_length: self.window_length,
            stencil_points: self.stencil_points,
            ..*base
        }
    }
}

/// Window lengths 5–50 at edge 64, each with and without MA+RE, then
/// window 50 at edge 128.
pub fn default_grid() -> Vec<ExperimentSpec> {
    let settings = [(5, 64), (10, 64), (15, 64), (30, 64), (40, 64), (50, 64), (50, 128)];
    settings
        .iter()
        .flat_map(|&(window_length, image_edge)| [false, true].map(move |aug| (window_length, image_edge, aug)))
        .enumerate()
        .map(|(i, (window_length, image_edge, aug))| ExperimentSpec {
            id: i + 1,
            window_length,
            image_edge,
            stencil_points: Stencil::Three,
            augmentation: AugmentationFlags { ma: aug, re: aug },
            repetitions: None,
        })
        .collect()
}

/// Outcome of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub repetition: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub train_size: usize,
    pub test_size: usize,
    pub history: Vec<EpochRecord>,
}

/// Aggregate of one sweep row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub f1_mean: f64,
    pub f1_std: f64,
    pub runs: Vec<RunResult>,
}

/// Artifacts of a single run, kept when requested.
pub struct RunArtifacts {
    pub train: dataset::LabeledImageSet,
    pub test: dataset::LabeledImageSet,
    pub network: Network,
    pub classes: Vec<String>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Seed of repetition `rep` of the row at position `row_index`.
pub fn run_seed(master_seed: u64, row_index: usize, rep: usize) -> u64 {
    rng::derive_seed(rng::derive_seed(master_seed, row_index as u64), rep as u64)
}

/// One repetition of one row.
pub fn run_once(
    spec: &ExperimentSpec,
    corpus: &[TimeSeries],
    config: &PipelineConfig,
    seed: u64,
) -> Result<(f64, f64, Vec<EpochRecord>, RunArtifacts)> {
    let encoding = spec.encoding(&config.encoding);
    let ma = spec.augmentation.ma.then_some(config.augment.ma_window);
    let encoded = dataset::encode_corpus(corpus, &encoding, ma)?;
    let classes = encoded.classes();
    let target = match config.balance.target_per_class {
        Some(t) => t,
        None => encoded.class_counts().iter().map(|(_, n)| *n).min().ok_or(Error::EmptyDataset)?,
    };
    let balanced = dataset::balance(
        &encoded,
        &BalanceConfig {
            target_per_class: target,
            rng_seed: rng::derive_seed(seed, 1),
            augment: config.augment,
            classes: corpus.iter().map(|s| s.label.clone()).collect(),
        },
    )?;
    let (train_set, test_set) =
        dataset::split(&balanced, config.experiment.test_fraction, rng::derive_seed(seed, 2))?;

    let network_spec = match &config.network {
        Some(n) => NetworkSpec {
            input_edge: spec.image_edge,
            num_classes: classes.len(),
            ..n.clone()
        },
        None => NetworkSpec::default_for(spec.image_edge, classes.len()),
    };
    let net = Network::new(network_spec, rng::derive_seed(seed, 3))?;
    let train_config = TrainConfig {
        rng_seed: rng::derive_seed(seed, 4),
        random_erase: spec.augmentation.re.then_some(config.augment),
        ..config.train
    };
    let outcome = classifier::train(net, &train_set, &classes, &train_config, Some(&test_set))?;
    let (_, scores) = classifier::evaluate(&outcome.network, &test_set, &classes)?;
    Ok((
        scores.accuracy,
        scores.macro_f1,
        outcome.history,
        RunArtifacts {
            train: train_set,
            test: test_set,
            network: outcome.network,
            classes,
        },
    ))
}

/// Runs every repetition of a row. `out_dir`, when given, receives history
/// CSVs and (if enabled) manifests and checkpoints.
pub fn run_experiment(
    spec: &ExperimentSpec,
    row_index: usize,
    corpus: &[TimeSeries],
    config: &PipelineConfig,
    out_dir: Option<&Path>,
) -> Result<ExperimentResult> {
    spec.encoding(&config.encoding).validate()?;
    let repetitions = spec.repetitions.unwrap_or(config.experiment.repetitions);
    let mut runs = Vec::with_capacity(repetitions);
    for rep in 0..repetitions {
        let seed = run_seed(config.experiment.master_seed, row_index, rep);
        let (accuracy, macro_f1, history, artifacts) = run_once(spec, corpus, config, seed)
            .map_err(|e| e.context(format!("experiment {} repetition {rep}", spec.id)))?;
        if let Some(dir) = out_dir {
            let prefix = format!("exp{:02}_rep{rep}", spec.id);
            emit_plots(&history, dir, &prefix)?;
            if config.experiment.artifacts {
                let run_dir = dir.join(&prefix);
                fs::create_dir_all(&run_dir)?;
                dataset::write_manifest(run_dir.join("train.jsonl"), &artifacts.train.manifest)?;
                dataset::write_manifest(run_dir.join("test.jsonl"), &artifacts.test.manifest)?;
                classifier::save_checkpoint(run_dir.join("model.bin"), &artifacts.network, &artifacts.classes)?;
            }
        }
        runs.push(RunResult {
            repetition: rep,
            seed,
            accuracy,
            macro_f1,
            train_size: artifacts.train.len(),
            test_size: artifacts.test.len(),
            history,
        });
    }
    let accuracies: Vec<f64> = runs.iter().map(|r| r.accuracy).collect();
    let f1s: Vec<f64> = runs.iter().map(|r| r.macro_f1).collect();
    let (accuracy_mean, accuracy_std) = mean_std(&accuracies);
    let (f1_mean, f1_std) = mean_std(&f1s);
    Ok(ExperimentResult {
        spec: spec.clone(),
        accuracy_mean,
        accuracy_std,
        f1_mean,
        f1_std,
        runs,
    })
}

/// Builds the corpus a config describes.
pub fn build_corpus(config: &PipelineConfig) -> Result<Vec<TimeSeries>> {
    config
        .synthetic_specs(config.experiment.master_seed)
        .iter()
        .map(dataset::generate_synthetic)
        .collect()
}

/// Runs all rows and writes `results.csv` (plus histories) into `out_dir`.
pub fn run_sweep(config: &PipelineConfig, corpus: &[TimeSeries], out_dir: &Path) -> Result<Vec<ExperimentResult>> {
    fs::create_dir_all(out_dir)?;
    let mut results = Vec::new();
    for (index, row) in config.rows().iter().enumerate() {
        results.push(run_experiment(row, index, corpus, config, Some(out_dir))?);
    }
    write_results_csv(out_dir.join("results.csv"), &results)?;
    Ok(results)
}

pub const RESULTS_HEADER: &str =
    "experiment,window_length,data_augmentation,image_edge,accuracy_test,f1_score,accuracy_std,f1_std,repetitions";

pub fn results_csv_row(r: &ExperimentResult) -> String {
    format!(
        "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{}",
        r.spec.id,
        r.spec.window_length,
        r.spec.augmentation.tag(),
        r.spec.image_edge,
        r.accuracy_mean,
        r.f1_mean,
        r.accuracy_std,
        r.f1_std,
        r.runs.len()
    )
}

pub fn write_results_csv(path: impl AsRef<Path>, results: &[ExperimentResult]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in results {
        writeln!(out, "{}", results_csv_row(r))?;
    }
    out.flush()?;
    Ok(())
}

pub const ACCURACY_HEADER: &str = "epoch,loss,accuracy,eval_accuracy";
pub const PRF_HEADER: &str = "epoch,precision,recall,macro_f1";

/// Writes `<prefix>_accuracy.csv` (loss and accuracy per epoch) and
/// `<prefix>_prf.csv` (held-out macro precision, recall and F1 per epoch).
/// Held-out columns are empty when the history has no evaluation.
pub fn emit_plots(history: &[EpochRecord], dir: &Path, prefix: &str) -> Result<[PathBuf; 2]> {
    if history.is_empty() {
        return Err(Error::EmptyHistory);
    }
    fs::create_dir_all(dir)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();

    let acc_path = dir.join(format!("{prefix}_accuracy.csv"));
    let mut out = BufWriter::new(File::create(&acc_path)?);
    writeln!(out, "{ACCURACY_HEADER}")?;
    for r in history {
        writeln!(
            out,
            "{},{:.6},{:.6},{}",
            r.epoch,
            r.loss,
            r.accuracy,
            opt(r.eval.map(|e| e.accuracy))
        )?;
    }
    out.flush()?;

    let prf_path = dir.join(format!("{prefix}_prf.csv"));
    let mut out = BufWriter::new(File::create(&prf_path)?);
    writeln!(out, "{PRF_HEADER}")?;
    for r in history {
        writeln!(
            out,
            "{},{},{},{}",
            r.epoch,
            opt(r.eval.map(|e| e.precision)),
            opt(r.eval.map(|e| e.recall)),
            opt(r.eval.map(|e| e.macro_f1))
        )?;
    }
    out.flush()?;
    Ok([acc_path, prf_path])
}
