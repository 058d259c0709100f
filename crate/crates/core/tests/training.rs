mod common;

use ts2img::classifier::{evaluate, train, Network, TrainConfig};
use ts2img::dataset::{LabeledImageSet, ManifestEntry};
use ts2img::GrayImage;

/// Class `k` lights a 2×2 block in corner `k`; brightness varies per sample.
fn corner_set(per_class: usize) -> (LabeledImageSet, Vec<String>) {
    let classes: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
    let corners = [(0, 0), (0, 6), (6, 0)];
    let mut images = Vec::new();
    let mut manifest = Vec::new();
    for (k, class) in classes.iter().enumerate() {
        for i in 0..per_class {
            let mut img = GrayImage::black(8, class.as_str());
            let (r, c) = corners[k];
            for (dr, dc) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                img.set(r + dr, c + dc, 120 + (i * 13 % 130) as u8);
            }
            img.set((i * 5) % 8, (i * 3) % 8, 40);
            images.push(img);
            manifest.push(ManifestEntry {
                image_path: format!("{class}_{i}.pgm"),
                label: class.clone(),
                source_id: class.clone(),
                window_start: i * 10,
                window_length: 5,
                lineage: vec![],
            });
        }
    }
    (LabeledImageSet::new(images, manifest).unwrap(), classes)
}

fn config(epochs: usize, learning_rate: f64) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 8,
        learning_rate,
        rng_seed: 11,
        ..TrainConfig::default()
    }
}

#[test]
fn loss_falls_every_early_epoch_on_separable_data() {
    let (set, classes) = corner_set(20);
    let net = Network::new(common::tiny_spec(), 3).unwrap();
    let out = train(net, &set, &classes, &config(5, 0.01), None).unwrap();
    let losses: Vec<f64> = out.history.iter().map(|r| r.loss).collect();
    assert_eq!(losses.len(), 5);
    assert!(losses.windows(2).all(|w| w[1] < w[0]), "{losses:?}");
}

#[test]
fn separable_data_is_learned() {
    let (set, classes) = corner_set(20);
    let net = Network::new(common::tiny_spec(), 4).unwrap();
    let out = train(net, &set, &classes, &config(30, 0.01), None).unwrap();
    let (_, scores) = evaluate(&out.network, &set, &classes).unwrap();
    assert_eq!(scores.accuracy, 1.0);
}

#[test]
fn zero_learning_rate_freezes_weights() {
    let (set, classes) = corner_set(4);
    let net = Network::new(common::tiny_spec(), 5).unwrap();
    let before = net.params().to_vec();
    let out = train(net, &set, &classes, &config(2, 0.0), None).unwrap();
    assert_eq!(out.network.params(), &before[..]);
}

#[test]
fn training_is_deterministic_under_seed() {
    let (set, classes) = corner_set(6);
    let run = || {
        let net = Network::new(common::tiny_spec(), 6).unwrap();
        train(net, &set, &classes, &config(3, 0.01), Some(&set)).unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.network.params(), b.network.params());
    assert_eq!(a.history, b.history);
    assert!(a.history.iter().all(|r| r.eval.is_some()));
}

#[test]
fn mismatched_class_count_is_rejected() {
    let (set, classes) = corner_set(2);
    let net = Network::new(common::tiny_spec(), 7).unwrap();
    assert!(train(net, &set, &classes[..2], &config(1, 0.01), None).is_err());
}
