use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ts2img::classifier::{self, EpochRecord, Network, NetworkSpec, TrainConfig};
use ts2img::dataset::{self, BalanceConfig, SyntheticSpec};
use ts2img::encoder::Stencil;
use ts2img::experiment::{self, PipelineConfig};
use ts2img::metrics::EvalReport;
use ts2img::{rng, Error, ErrorKind, Result, TimeSeries};

/// Time series to polar image encoding, augmentation and CNN experiments.
#[derive(Parser)]
#[command(name = "ts2img", version)]
struct Cli {
    /// JSON config with sections synthetic, encoding, augment, balance, train, experiment.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true, env = "TS2IMG_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic series and write them as a JSON corpus.
    Synth {
        /// A synthetic recipe or list of recipes; defaults to the config or the presets.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a corpus into window images plus a manifest.
    Encode {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        encoding: EncodingArgs,
        /// Also encode moving-average smoothed series.
        #[arg(long)]
        ma: bool,
        /// Write PNG copies next to the PGM files.
        #[arg(long)]
        png: bool,
    },
    /// Append randomly erased copies of every image.
    Augment {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        copies: usize,
        /// Erase probability per copy.
        #[arg(long)]
        probability: Option<f64>,
    },
    /// Equalize per-class counts.
    Balance {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        target: Option<usize>,
        /// Randomly flip synthesized minority images.
        #[arg(long)]
        flips: bool,
    },
    /// Leakage-free train/test split into `<out>/train` and `<out>/test`.
    Split {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        test_fraction: Option<f64>,
    },
    /// Train a network and save a checkpoint.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Per-epoch history as JSON.
        #[arg(long)]
        history: Option<PathBuf>,
        /// Held-out set scored after every epoch.
        #[arg(long)]
        monitor: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
        /// Random erasing in the training loader.
        #[arg(long)]
        random_erase: bool,
    },
    /// Score a checkpoint on a labeled set and print the report as JSON.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured sweep and write results.csv.
    Experiment {
        #[arg(long)]
        out: PathBuf,
        /// Only run these row ids.
        #[arg(long, value_delimiter = ',')]
        rows: Vec<usize>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Turn a training history into accuracy and precision/recall/F1 CSVs.
    PlotData {
        #[arg(long)]
        history: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "history")]
        prefix: String,
    },
}

#[derive(Args)]
struct EncodingArgs {
    #[arg(long)]
    window_length: Option<usize>,
    #[arg(long)]
    image_edge: Option<usize>,
    /// 3, 5 or 7.
    #[arg(long)]
    stencil: Option<u8>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    validation_fraction: Option<f64>,
}

impl TrainArgs {
    fn apply(&self, cfg: &mut TrainConfig) {
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.batch_size {
            cfg.batch_size = v;
        }
        if let Some(v) = self.learning_rate {
            cfg.learning_rate = v;
        }
        if let Some(v) = self.validation_fraction {
            cfg.validation_fraction = Some(v);
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Runtime => 4,
            })
        }
    }
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_specs(path: &Path) -> Result<Vec<SyntheticSpec>> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let specs = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|s| vec![s])
    };
    specs.map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path).map_err(|e| e.context(format!("config `{}`", path.display())))?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.experiment.master_seed = seed;
    }
    let seed = config.experiment.master_seed;

    match cli.command {
        Command::Synth { spec, out } => {
            let specs = match spec {
                Some(path) => read_specs(&path)?,
                None => config.synthetic_specs(seed),
            };
            let corpus = specs
                .iter()
                .map(dataset::generate_synthetic)
                .collect::<Result<Vec<TimeSeries>>>()?;
            dataset::save_corpus(&out, &corpus)?;
            println!("wrote {} series to {}", corpus.len(), out.display());
        }
        Command::Encode {
            corpus,
            out,
            encoding,
            ma,
            png,
        } => {
            let mut enc = config.encoding;
            if let Some(v) = encoding.window_length {
                enc.window_length = v;
            }
            if let Some(v) = encoding.image_edge {
                enc.image_edge = v;
            }
            if let Some(v) = encoding.stencil {
                enc.stencil_points = Stencil::try_from(v).map_err(Error::InvalidConfig)?;
            }
            enc.validate()?;
            let corpus = dataset::load_corpus(&corpus)?;
            let set = dataset::encode_corpus(&corpus, &enc, ma.then_some(config.augment.ma_window))?;
            let manifest = dataset::save_set(&set, &out, png)?;
            println!("wrote {} images, manifest {}", set.len(), manifest.display());
        }
        Command::Augment {
            manifest,
            out,
            copies,
            probability,
        } => {
            let mut aug = config.augment;
            aug.rng_seed = rng::derive_seed(seed, 5);
            if let Some(p) = probability {
                aug.re_probability = p;
            }
            let set = dataset::load_set(&manifest)?;
            let augmented = dataset::augment_copies(&set, copies, &aug)?;
            let path = dataset::save_set(&augmented, &out, false)?;
            println!("wrote {} images, manifest {}", augmented.len(), path.display());
        }
        Command::Balance {
            manifest,
            out,
            target,
            flips,
        } => {
            let set = dataset::load_set(&manifest)?;
            let target = target.or(config.balance.target_per_class).ok_or_else(|| {
                Error::InvalidConfig("balance needs --target or balance.target_per_class".into())
            })?;
            let mut augment = config.augment;
            augment.flips |= flips;
            let balanced = dataset::balance(
                &set,
                &BalanceConfig {
                    target_per_class: target,
                    rng_seed: rng::derive_seed(seed, 1),
                    augment,
                    classes: Vec::new(),
                },
            )?;
            let path = dataset::save_set(&balanced, &out, false)?;
            println!("wrote {} images, manifest {}", balanced.len(), path.display());
        }
        Command::Split {
            manifest,
            out,
            test_fraction,
        } => {
            let set = dataset::load_set(&manifest)?;
            let fraction = test_fraction.unwrap_or(config.experiment.test_fraction);
            let (train, test) = dataset::split(&set, fraction, rng::derive_seed(seed, 2))?;
            dataset::save_set(&train, out.join("train"), false)?;
            dataset::save_set(&test, out.join("test"), false)?;
            println!("train {} images, test {} images", train.len(), test.len());
        }
        Command::Train {
            manifest,
            model,
            history,
            monitor,
            train,
            random_erase,
        } => {
            let set = dataset::load_set(&manifest)?;
            let monitor = monitor.map(dataset::load_set).transpose()?;
            let classes = set.classes();
            let edge = set.images.first().ok_or(Error::EmptyDataset)?.edge();
            let spec = match &config.network {
                Some(n) => NetworkSpec {
                    input_edge: edge,
                    num_classes: classes.len(),
                    ..n.clone()
                },
                None => NetworkSpec::default_for(edge, classes.len()),
            };
            let net = Network::new(spec, rng::derive_seed(seed, 3))?;
            let mut cfg = config.train;
            train.apply(&mut cfg);
            cfg.rng_seed = rng::derive_seed(seed, 4);
            if random_erase {
                cfg.random_erase = Some(config.augment);
            }
            cfg.validate()?;
            let outcome = classifier::train(net, &set, &classes, &cfg, monitor.as_ref())?;
            classifier::save_checkpoint(&model, &outcome.network, &classes)?;
            if let Some(path) = history {
                write_json(&path, &outcome.history)?;
            }
            if let Some(last) = outcome.history.last() {
                println!(
                    "trained {} epochs: loss {:.4}, accuracy {:.4}",
                    outcome.history.len(),
                    last.loss,
                    last.accuracy
                );
            }
        }
        Command::Eval { model, manifest, out } => {
            let checkpoint = classifier::load_checkpoint(&model)?;
            let set = dataset::load_set(&manifest)?;
            let (cm, _) = classifier::evaluate(&checkpoint.network, &set, &checkpoint.classes)?;
            let report = EvalReport::new(&cm, &checkpoint.classes)?;
            if let Some(path) = out {
                write_json(&path, &report)?;
            }
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Experiment {
            out,
            rows,
            repetitions,
            train,
        } => {
            if let Some(r) = repetitions {
                config.experiment.repetitions = r;
            }
            train.apply(&mut config.train);
            if !rows.is_empty() {
                let all = config.rows();
                if let Some(missing) = rows.iter().find(|id| !all.iter().any(|r| r.id == **id)) {
                    return Err(Error::InvalidConfig(format!("no experiment row with id {missing}")));
                }
                config.experiment.rows = all.into_iter().filter(|r| rows.contains(&r.id)).collect();
            }
            config.validate()?;
            let corpus = experiment::build_corpus(&config)?;
            let results = experiment::run_sweep(&config, &corpus, &out)?;
            write_json(&out.join("results.json"), &results)?;
            println!("{}", experiment::RESULTS_HEADER);
            for r in &results {
                println!("{}", experiment::results_csv_row(r));
            }
        }
        Command::PlotData { history, out, prefix } => {
            let text = fs::read_to_string(&history)?;
            let records: Vec<EpochRecord> = serde_json::from_str(&text)?;
            let [acc, prf] = experiment::emit_plots(&records, &out, &prefix)?;
            println!("wrote {} and {}", acc.display(), prf.display());
        }
    }
    Ok(())
}
