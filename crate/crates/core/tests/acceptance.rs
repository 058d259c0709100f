//! Acceptance criteria. Runs every criterion, prints one PASS/FAIL line per
//! criterion and exits non-zero if any failed.

mod common;

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::Rng;

use ts2img::classifier::{loss_and_grad, images_to_batch, Network, NetworkSpec};
use ts2img::dataset::{self, BalanceConfig, LabeledImageSet};
use ts2img::encoder::{
    central_difference, derive, encode_series, map_window_to_image, DerivedSeries, EncodingConfig, PreparedSeries,
    Stencil,
};
use ts2img::experiment::{self, default_grid, ExperimentSpec, PipelineConfig};
use ts2img::metrics::{confusion, scores};
use ts2img::{rng, GrayImage, TimeSeries};

/// Epochs per training run in the trend criteria; the sweep default is 60.
const TREND_EPOCHS: usize = 30;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: impl Into<String>) -> Outcome {
    if ok {
        Ok(detail.into())
    } else {
        Err(detail.into())
    }
}

// ---------------------------------------------------------------- 1

fn encoder_properties() -> Outcome {
    let started = Instant::now();
    let mut runner = TestRunner::new(ProptestConfig {
        cases: 256,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    let strategy = (10usize..=500)
        .prop_flat_map(|len| (Just(len), 2usize..=len, any::<u64>(), prop::bool::weighted(0.1)));
    runner
        .run(&strategy, |(len, window, seed, constant)| {
            let mut r = rng::seeded(seed);
            let samples: Vec<f64> = if constant {
                vec![r.random_range(-100.0..-50.0); len]
            } else {
                (0..len).map(|_| r.random_range(-100.0..-50.0)).collect()
            };
            let series = TimeSeries::new("p", "c", samples).unwrap();
            let cfg = EncodingConfig {
                image_edge: 32,
                window_length: window,
                ..EncodingConfig::default()
            };
            let images = encode_series(&series, &cfg).unwrap();
            prop_assert_eq!(images.len(), len - window + 1);
            let prepared = PreparedSeries::new(&series, &cfg).unwrap();
            for p in &prepared.polar {
                let (row, col) = ts2img::encoder::pixel_position(*p, cfg.image_edge);
                prop_assert!(row < cfg.image_edge && col < cfg.image_edge);
            }
            for img in &images {
                prop_assert_eq!(img.pixels().len(), cfg.image_edge * cfg.image_edge);
                prop_assert!(img.count_nonzero() <= window);
                if constant {
                    prop_assert_eq!(img.nonzero_positions(), vec![(cfg.image_edge / 2, cfg.image_edge / 2)]);
                }
            }
            let again = encode_series(&series, &cfg).unwrap();
            let bytes = |v: &[GrayImage]| v.iter().map(|i| i.to_pgm_bytes()).collect::<Vec<_>>();
            prop_assert_eq!(bytes(&images), bytes(&again));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    check(
        elapsed < Duration::from_secs(30),
        format!("256 random cases, {:.1} s", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- 2

fn differentiation() -> Outcome {
    let mut r = rng::seeded(2);
    let mut worst: f64 = 0.0;
    for stencil in [Stencil::Three, Stencil::Five, Stencil::Seven] {
        let degree = stencil.points() - 1;
        let half = degree / 2;
        for _ in 0..50 {
            // terms stay O(1) over the sampled range, so rounding is ~1e-14
            let coeffs: Vec<f64> = (0..=degree)
                .map(|k| r.random_range(-1.0..1.0) / 10f64.powi(k as i32))
                .collect();
            let n = 21;
            let at = |t: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * (t - 10.0) + c);
            let slope = |t: f64| {
                coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .map(|(k, c)| k as f64 * c * (t - 10.0).powi(k as i32 - 1))
                    .sum::<f64>()
            };
            let values: Vec<f64> = (0..n).map(|t| at(t as f64)).collect();
            let d = central_difference(&values, stencil).unwrap();
            for t in half..n - half {
                worst = worst.max((d[t] - slope(t as f64)).abs());
            }
        }
        // twice-applied stencil on a quadratic is the constant 2a
        let a = r.random_range(-2.0..2.0);
        let (b, c) = (r.random_range(-2.0..2.0), r.random_range(-2.0..2.0));
        let q: Vec<f64> = (0..30).map(|t| a * (t as f64 * 0.1).powi(2) * 100.0 + b * t as f64 + c).collect();
        let second = central_difference(&central_difference(&q, stencil).unwrap(), stencil).unwrap();
        for &v in &second[2 * half..30 - 2 * half] {
            worst = worst.max((v - 2.0 * a).abs());
        }
    }
    check(worst <= 1e-9, format!("worst interior error {worst:.1e}"))
}

// ---------------------------------------------------------------- 3

/// Independent re-simulation of the window rasterization with a dictionary
/// of pixel writes.
fn oracle_window(derived: &DerivedSeries, start: usize, cfg: &EncodingConfig) -> GrayImage {
    let rescale = |xs: Vec<f64>, upper: f64| -> Vec<f64> {
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if hi <= lo {
            return vec![0.0; xs.len()];
        }
        xs.iter().map(|x| ((x - lo) * (upper / (hi - lo))).clamp(0.0, upper)).collect()
    };
    let edge = cfg.image_edge;
    let rho = rescale(derived.rho.clone(), (edge - 1) as f64);
    let theta = rescale(derived.theta.iter().map(|x| x.abs()).collect(), TAU);
    let mut writes: HashMap<(usize, usize), u8> = HashMap::new();
    for t in start..start + cfg.window_length {
        let coord = |v: f64| (v + (edge / 2) as f64).floor().clamp(0.0, (edge - 1) as f64) as usize;
        let key = (coord(rho[t] * theta[t].cos()), coord(rho[t] * theta[t].sin()));
        let value = if derived.constant {
            255
        } else {
            (derived.normalized[t] + 0.5).floor() as u8
        };
        writes.insert(key, value);
    }
    let mut img = GrayImage::black(edge, "oracle");
    for ((row, col), v) in writes {
        img.set(row, col, v);
    }
    img
}

fn pixel_write_oracle() -> Outcome {
    let mut r = rng::seeded(3);
    let mut compared = 0;
    for case in 0..100 {
        let len = r.random_range(20..300);
        let samples: Vec<f64> = (0..len).map(|t| (t as f64 * 0.37).sin() * 5.0 + r.random_range(-2.0..2.0)).collect();
        let cfg = EncodingConfig {
            image_edge: [16, 32, 64, 128][case % 4],
            window_length: r.random_range(2..=len.min(60)),
            stencil_points: [Stencil::Three, Stencil::Five, Stencil::Seven][case % 3],
            ..EncodingConfig::default()
        };
        let derived = derive(&samples, &cfg).unwrap();
        let polar = ts2img::encoder::polar_remap(&derived, &cfg);
        let start = r.random_range(0..=len - cfg.window_length);
        let got = map_window_to_image(&derived, &polar, start, &cfg, "oracle").unwrap();
        let want = oracle_window(&derived, start, &cfg);
        if got.pixels() != want.pixels() {
            return Err(format!("window {case} (start {start}, edge {}) differs", cfg.image_edge));
        }
        compared += 1;
    }
    Ok(format!("{compared} random windows identical"))
}

// ---------------------------------------------------------------- 4

fn gradient_check() -> Outcome {
    let started = Instant::now();
    let worst = (0..3)
        .map(|seed| common::worst_relative_error(common::tiny_spec(), seed))
        .fold(0.0, f64::max);
    if worst > common::TOLERANCE {
        return Err(format!("worst relative error {worst:.1e}"));
    }
    let corpus = dataset::default_corpus(0).unwrap();
    let cfg = EncodingConfig {
        window_length: 40,
        ..EncodingConfig::default()
    };
    let set = dataset::encode_corpus(&corpus, &cfg, None).unwrap();
    let balanced = dataset::balance(
        &set,
        &BalanceConfig {
            target_per_class: 30,
            rng_seed: 1,
            augment: Default::default(),
            classes: vec![],
        },
    )
    .unwrap();
    let classes = balanced.classes();
    let labels: Vec<usize> = balanced
        .images
        .iter()
        .map(|i| classes.iter().position(|c| *c == i.label).unwrap())
        .collect();
    let batch = images_to_batch(&balanced.images).unwrap();
    let mut losses = Vec::new();
    for seed in 0..3 {
        let net = Network::new(NetworkSpec::default_for(64, 3), seed).unwrap();
        losses.push(loss_and_grad(&net, &batch, &labels).unwrap().0);
    }
    let elapsed = started.elapsed();
    check(
        losses.iter().all(|l| (0.9..=1.3).contains(l)) && elapsed < Duration::from_secs(60),
        format!(
            "worst relative error {worst:.1e}; initial losses {:?}; {:.1} s",
            losses.iter().map(|l| format!("{l:.3}")).collect::<Vec<_>>(),
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- 5

fn metrics_oracle() -> Outcome {
    let mut r = rng::seeded(5);
    for trial in 0..1000 {
        let classes = r.random_range(2..6);
        let n = r.random_range(1..80);
        let truth: Vec<usize> = (0..n).map(|_| r.random_range(0..classes)).collect();
        let pred: Vec<usize> = (0..n).map(|_| r.random_range(0..classes)).collect();
        let got = scores(&confusion(&truth, &pred, classes).unwrap()).unwrap();

        let mut f1_sum = 0.0;
        for c in 0..classes {
            let tp = (0..n).filter(|&i| truth[i] == c && pred[i] == c).count();
            let predicted = (0..n).filter(|&i| pred[i] == c).count();
            let actual = (0..n).filter(|&i| truth[i] == c).count();
            let p = if predicted == 0 { 0.0 } else { tp as f64 / predicted as f64 };
            let rc = if actual == 0 { 0.0 } else { tp as f64 / actual as f64 };
            let f1 = if p + rc == 0.0 { 0.0 } else { 2.0 * p * rc / (p + rc) };
            let s = &got.per_class[c];
            if s.precision != p || s.recall != rc || s.f1 != f1 {
                return Err(format!("trial {trial}, class {c}"));
            }
            f1_sum += f1;
        }
        let accuracy = (0..n).filter(|&i| truth[i] == pred[i]).count() as f64 / n as f64;
        if got.accuracy != accuracy || got.macro_f1 != f1_sum / classes as f64 {
            return Err(format!("trial {trial}: aggregate scores differ"));
        }
    }
    let truth: Vec<usize> = (0..30).map(|i| i % 3).collect();
    let hand = scores(&confusion(&truth, &[0; 30], 3).unwrap()).unwrap();
    check(
        hand.accuracy == 1.0 / 3.0 && (hand.macro_f1 - 1.0 / 6.0).abs() < 1e-15,
        format!(
            "1000 random trials exact; constant predictor accuracy {:.4}, macro F1 {:.4}",
            hand.accuracy, hand.macro_f1
        ),
    )
}

// ---------------------------------------------------------------- 6

fn overlapping_pairs(train: &LabeledImageSet, test: &LabeledImageSet) -> usize {
    train
        .manifest
        .iter()
        .map(|a| test.manifest.iter().filter(|b| a.overlaps(b)).count())
        .sum()
}

fn balance_split_audit() -> Outcome {
    let corpus = dataset::default_corpus(6).unwrap();
    let mut details = Vec::new();
    for (window, ma) in [(10, None), (25, Some(3))] {
        let cfg = EncodingConfig {
            image_edge: 32,
            window_length: window,
            ..EncodingConfig::default()
        };
        let set = dataset::encode_corpus(&corpus, &cfg, ma).unwrap();
        let target = 250;
        let balanced = dataset::balance(
            &set,
            &BalanceConfig {
                target_per_class: target,
                rng_seed: 7,
                augment: ts2img::augment::AugmentConfig {
                    flips: true,
                    ..Default::default()
                },
                classes: vec![],
            },
        )
        .unwrap();
        if let Some((c, n)) = balanced.class_counts().into_iter().find(|(_, n)| *n != target) {
            return Err(format!("class {c} has {n} images, expected {target}"));
        }
        for (img, entry) in balanced.images.iter().zip(&balanced.manifest) {
            if &dataset::replay(entry, &corpus, &cfg).unwrap() != img {
                return Err(format!("{} does not replay", entry.image_path));
            }
        }
        let (train, test) = dataset::split(&balanced, 0.2, 8).unwrap();
        let leaks = overlapping_pairs(&train, &test);
        if leaks > 0 {
            return Err(format!("{leaks} overlapping train/test pairs at window {window}"));
        }
        details.push(format!(
            "window {window}{}: {} train / {} test, {} pairs checked",
            if ma.is_some() { " +MA" } else { "" },
            train.len(),
            test.len(),
            train.len() * test.len()
        ));
    }
    Ok(format!("counts exact, all recipes replay, 0 leaks; {}", details.join("; ")))
}

// ---------------------------------------------------------------- 7, 8

fn trend_config() -> PipelineConfig {
    let mut cfg = PipelineConfig::default();
    cfg.train.epochs = TREND_EPOCHS;
    cfg
}

fn grid_row(window: usize, edge: usize, augmented: bool) -> (usize, ExperimentSpec) {
    default_grid()
        .into_iter()
        .enumerate()
        .find(|(_, r)| r.window_length == window && r.image_edge == edge && r.augmentation.ma == augmented)
        .expect("row in grid")
}

fn mean_accuracy(window: usize, augmented: bool, cfg: &PipelineConfig, corpus: &[TimeSeries]) -> (f64, Vec<f64>) {
    let (index, row) = grid_row(window, 64, augmented);
    let result = experiment::run_experiment(&row, index, corpus, cfg, None).unwrap();
    (result.accuracy_mean, result.runs.iter().map(|r| r.accuracy).collect())
}

fn trend_reproduction() -> Outcome {
    let started = Instant::now();
    let cfg = trend_config();
    let corpus = experiment::build_corpus(&cfg).unwrap();
    let (short, short_runs) = mean_accuracy(5, false, &cfg, &corpus);
    let (long, long_runs) = mean_accuracy(40, false, &cfg, &corpus);
    let elapsed = started.elapsed();
    check(
        long >= short + 0.10 && long >= 0.85 && elapsed <= Duration::from_secs(15 * 60),
        format!(
            "acc(l_w=5) {short:.3} {short_runs:.3?}, acc(l_w=40) {long:.3} {long_runs:.3?}; {:.0} s",
            elapsed.as_secs_f64()
        ),
    )
}

fn augmentation_effect() -> Outcome {
    let cfg = trend_config();
    let corpus = experiment::build_corpus(&cfg).unwrap();
    let (plain, _) = mean_accuracy(10, false, &cfg, &corpus);
    let (augmented, runs) = mean_accuracy(10, true, &cfg, &corpus);
    let (index, row) = grid_row(10, 64, true);
    let seed = experiment::run_seed(cfg.experiment.master_seed, index, 0);
    let (again, _, _, _) = experiment::run_once(&row, &corpus, &cfg, seed).unwrap();
    let deterministic = again == runs[0];
    check(
        augmented >= plain - 0.02 && deterministic,
        format!(
            "l_w=10: no augmentation {plain:.3}, MA+RE {augmented:.3}; \
             rerun {}",
            if deterministic { "identical" } else { "differs" }
        ),
    )
}

// ---------------------------------------------------------------- 9

fn run_cli_experiment(config: &Path, out: &Path) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_ts2img"))
        .args(["--config", config.to_str().unwrap(), "experiment", "--out", out.to_str().unwrap()])
        .env_remove("TS2IMG_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(String::from_utf8_lossy(&status.stderr).into_owned())
    }
}

fn reproducibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    std::fs::write(
        &config,
        r#"{
            "train": {"epochs": 3},
            "experiment": {
                "master_seed": 2024,
                "repetitions": 2,
                "artifacts": true,
                "rows": [
                    {"id": 1, "window_length": 10, "image_edge": 32},
                    {"id": 2, "window_length": 10, "image_edge": 32, "augmentation": {"ma": true, "re": true}}
                ]
            }
        }"#,
    )
    .map_err(|e| e.to_string())?;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    run_cli_experiment(&config, &a)?;
    run_cli_experiment(&config, &b)?;
    let mut files: Vec<_> = walk(&a);
    files.sort();
    for rel in &files {
        let left = std::fs::read(a.join(rel)).map_err(|e| e.to_string())?;
        let right = std::fs::read(b.join(rel)).map_err(|e| e.to_string())?;
        if left != right {
            return Err(format!("{} differs between reruns", rel.display()));
        }
    }
    let csv = std::fs::read_to_string(a.join("results.csv")).map_err(|e| e.to_string())?;
    check(
        csv.lines().count() == 3 && walk(&b).len() == files.len(),
        format!("results.csv and {} other output files byte-identical", files.len() - 1),
    )
}

fn walk(root: &Path) -> Vec<std::path::PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).into_iter().flatten().flatten() {
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    out
}

// ----------------------------------------------------------------

fn main() {
    let criteria: [Criterion; 9] = [
        ("encoder property suite", encoder_properties),
        ("differentiation exactness", differentiation),
        ("pixel-write oracle", pixel_write_oracle),
        ("gradient check and initial loss", gradient_check),
        ("metrics oracle", metrics_oracle),
        ("balance and split audits", balance_split_audit),
        ("window-length trend", trend_reproduction),
        ("augmentation effect", augmentation_effect),
        ("end-to-end reproducibility", reproducibility),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let number = i + 1;
        if !filter.is_empty() && !filter.iter().any(|f| *f == number.to_string()) {
            continue;
        }
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(msg)
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {number} [{name}]: PASS ({secs:.1} s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {number} [{name}]: FAIL ({secs:.1} s) {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
