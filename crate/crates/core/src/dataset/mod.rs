//! Labeled image datasets with per-image provenance.
//!
//! Every image carries a [`ManifestEntry`] naming the source series, the
//! window it was cut from and the augmentation steps applied afterwards, so
//! the image can be rebuilt from the corpus with [`replay`].

mod balance;
mod io;
mod split;
mod synthetic;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use balance::{balance, BalanceConfig};
pub use io::{load_corpus, load_set, read_manifest, save_corpus, save_set, write_manifest};
pub use split::split;
pub use synthetic::{default_corpus, generate_synthetic, preset_specs, Carrier, SyntheticSpec};

use crate::augment::{self, AugmentConfig};
use crate::encoder::{EncodingConfig, PreparedSeries};
use crate::error::{Error, Result};
use crate::image::GrayImage;
use crate::rng;
use crate::series::TimeSeries;

/// One augmentation step in an image's history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LineageStep {
    /// Series-level smoothing applied before encoding.
    MovingAverage { window: usize },
    RandomErase {
        probability: f64,
        area_range: (f64, f64),
        aspect_range: (f64, f64),
        seed: u64,
        stream: u64,
    },
    FlipHorizontal,
    FlipVertical,
    Shift { dx: i64, dy: i64 },
    RandomCrop { crop_edge: usize, seed: u64, stream: u64 },
}

impl LineageStep {
    pub fn is_series_level(&self) -> bool {
        matches!(self, LineageStep::MovingAverage { .. })
    }

    fn tag(&self) -> String {
        match self {
            LineageStep::MovingAverage { window } => format!("ma{window}"),
            LineageStep::RandomErase { .. } => "re".into(),
            LineageStep::FlipHorizontal => "fh".into(),
            LineageStep::FlipVertical => "fv".into(),
            LineageStep::Shift { .. } => "shift".into(),
            LineageStep::RandomCrop { .. } => "crop".into(),
        }
    }

    /// Applies an image-level step. Series-level steps are a no-op here.
    pub fn apply(&self, image: &GrayImage) -> Result<GrayImage> {
        Ok(match *self {
            LineageStep::MovingAverage { .. } => image.clone(),
            LineageStep::RandomErase {
                probability,
                area_range,
                aspect_range,
                seed,
                stream,
            } => {
                let cfg = AugmentConfig {
                    re_probability: probability,
                    re_area_range: area_range,
                    re_aspect_range: aspect_range,
                    ..AugmentConfig::default()
                };
                augment::random_erase_black(image, &cfg, &mut rng::stream(seed, stream))
            }
            LineageStep::FlipHorizontal => augment::flip_horizontal(image),
            LineageStep::FlipVertical => augment::flip_vertical(image),
            LineageStep::Shift { dx, dy } => augment::shift(image, dx, dy)?,
            LineageStep::RandomCrop {
                crop_edge,
                seed,
                stream,
            } => augment::random_crop(image, crop_edge, &mut rng::stream(seed, stream))?,
        })
    }
}

/// Provenance of one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// File name relative to the manifest's directory.
    pub image_path: String,
    pub label: String,
    pub source_id: String,
    /// First timestep of the window. Moving averages are trailing-aligned, so
    /// this is also the first raw timestep the window depends on.
    pub window_start: usize,
    pub window_length: usize,
    #[serde(default)]
    pub lineage: Vec<LineageStep>,
}

impl ManifestEntry {
    /// Half-open range of raw source timesteps this image depends on.
    pub fn source_range(&self) -> (usize, usize) {
        let widening: usize = self
            .lineage
            .iter()
            .map(|s| match s {
                LineageStep::MovingAverage { window } => window.saturating_sub(1),
                _ => 0,
            })
            .sum();
        (self.window_start, self.window_start + self.window_length + widening)
    }

    /// True when both images depend on at least one common raw timestep.
    pub fn overlaps(&self, other: &ManifestEntry) -> bool {
        let (a0, a1) = self.source_range();
        let (b0, b1) = other.source_range();
        self.source_id == other.source_id && a0 < b1 && b0 < a1
    }

    fn series_steps(&self) -> impl Iterator<Item = &LineageStep> {
        self.lineage.iter().filter(|s| s.is_series_level())
    }

    /// Identifies the encoded window before any image-level augmentation.
    pub(crate) fn window_key(&self) -> (String, usize, usize, Vec<String>) {
        (
            self.source_id.clone(),
            self.window_start,
            self.window_length,
            self.series_steps().map(LineageStep::tag).collect(),
        )
    }

    /// `<stem>_<tag><k>.pgm` for the `k`-th derived copy of this image.
    pub fn derived_path(&self, tag: &str, k: usize) -> String {
        let stem = self.image_path.strip_suffix(".pgm").unwrap_or(&self.image_path);
        format!("{stem}_{tag}{k}.pgm")
    }
}

/// Images with parallel provenance records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledImageSet {
    pub images: Vec<GrayImage>,
    pub manifest: Vec<ManifestEntry>,
}

impl LabeledImageSet {
    pub fn new(images: Vec<GrayImage>, manifest: Vec<ManifestEntry>) -> Result<Self> {
        if images.len() != manifest.len() {
            return Err(Error::LengthMismatch {
                left: images.len(),
                right: manifest.len(),
            });
        }
        if let Some((img, entry)) = images.iter().zip(&manifest).find(|(i, e)| i.label != e.label) {
            return Err(Error::Manifest(format!(
                "image `{}` is labeled `{}` but its manifest says `{}`",
                entry.image_path, img.label, entry.label
            )));
        }
        Ok(LabeledImageSet { images, manifest })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn labels(&self) -> Vec<&str> {
        self.images.iter().map(|i| i.label.as_str()).collect()
    }

    /// Distinct labels in sorted order; a label's position is its class index.
    pub fn classes(&self) -> Vec<String> {
        self.images
            .iter()
            .map(|i| i.label.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn class_counts(&self) -> Vec<(String, usize)> {
        let labels = self.labels();
        self.classes()
            .into_iter()
            .map(|c| {
                let n = labels.iter().filter(|&&l| l == c).count();
                (c, n)
            })
            .collect()
    }

    pub fn push(&mut self, image: GrayImage, entry: ManifestEntry) {
        self.images.push(image);
        self.manifest.push(entry);
    }

    pub(crate) fn select(&self, indices: &[usize]) -> LabeledImageSet {
        LabeledImageSet {
            images: indices.iter().map(|&i| self.images[i].clone()).collect(),
            manifest: indices.iter().map(|&i| self.manifest[i].clone()).collect(),
        }
    }
}

fn smooth(series: &TimeSeries, window: usize) -> Result<TimeSeries> {
    Ok(TimeSeries {
        id: series.id.clone(),
        label: series.label.clone(),
        samples: augment::moving_average(&series.samples, window)?,
    })
}

/// Encodes every series of the corpus into stride-1 window images. With
/// `ma_window`, a smoothed copy of each series is encoded as well.
pub fn encode_corpus(
    corpus: &[TimeSeries],
    config: &EncodingConfig,
    ma_window: Option<usize>,
) -> Result<LabeledImageSet> {
    let mut set = LabeledImageSet::default();
    for series in corpus {
        let mut variants = vec![(series.clone(), Vec::new(), series.id.clone())];
        if let Some(w) = ma_window {
            variants.push((
                smooth(series, w)?,
                vec![LineageStep::MovingAverage { window: w }],
                format!("{}-ma{w}", series.id),
            ));
        }
        for (variant, lineage, stem) in variants {
            let prepared = PreparedSeries::new(&variant, config)
                .map_err(|e| e.context(format!("encoding series `{}`", series.id)))?;
            for start in 0..prepared.window_count() {
                set.push(
                    prepared.window(start)?,
                    ManifestEntry {
                        image_path: format!("{stem}_{start}.pgm"),
                        label: series.label.clone(),
                        source_id: series.id.clone(),
                        window_start: start,
                        window_length: config.window_length,
                        lineage: lineage.clone(),
                    },
                );
            }
        }
    }
    Ok(set)
}

/// Appends `copies` randomly erased versions of every image, erasing with
/// `config.re_probability`. Copy `k` of image `i` draws from stream
/// `i·copies + k` of `config.rng_seed`.
pub fn augment_copies(set: &LabeledImageSet, copies: usize, config: &AugmentConfig) -> Result<LabeledImageSet> {
    config.validate()?;
    let mut out = set.clone();
    for (i, (image, entry)) in set.images.iter().zip(&set.manifest).enumerate() {
        for k in 0..copies {
            let step = LineageStep::RandomErase {
                probability: config.re_probability,
                area_range: config.re_area_range,
                aspect_range: config.re_aspect_range,
                seed: config.rng_seed,
                stream: (i * copies + k) as u64,
            };
            let mut copy = entry.clone();
            copy.image_path = entry.derived_path("re", k);
            copy.lineage.push(step.clone());
            out.push(step.apply(image)?, copy);
        }
    }
    Ok(out)
}

/// Rebuilds an image from its manifest record and the source corpus.
pub fn replay(entry: &ManifestEntry, corpus: &[TimeSeries], config: &EncodingConfig) -> Result<GrayImage> {
    let source = corpus
        .iter()
        .find(|s| s.id == entry.source_id)
        .ok_or_else(|| Error::Manifest(format!("unknown source series `{}`", entry.source_id)))?;
    let mut series = source.clone();
    for step in entry.series_steps() {
        if let LineageStep::MovingAverage { window } = step {
            series = smooth(&series, *window)?;
        }
    }
    let config = EncodingConfig {
        window_length: entry.window_length,
        ..*config
    };
    let mut image = PreparedSeries::new(&series, &config)?.window(entry.window_start)?;
    for step in entry.lineage.iter().filter(|s| !s.is_series_level()) {
        image = step.apply(&image)?;
    }
    Ok(image)
}
