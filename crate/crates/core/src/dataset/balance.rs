use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{LabeledImageSet, LineageStep};
use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BalanceConfig {
    pub target_per_class: usize,
    #[serde(default)]
    pub rng_seed: u64,
    /// Random erasing parameters for synthesized minority samples. The erase
    /// probability is forced to 1 for them.
    #[serde(default)]
    pub augment: AugmentConfig,
    /// Classes that must be present. Empty means "whatever the data holds".
    #[serde(default)]
    pub classes: Vec<String>,
}

/// Equalizes class sizes to `target_per_class`.
///
/// Larger classes are subsampled without replacement; smaller classes keep
/// every image and are topped up with randomly erased (and, if enabled,
/// flipped) copies of their own images, cycling through the originals.
pub fn balance(set: &LabeledImageSet, config: &BalanceConfig) -> Result<LabeledImageSet> {
    if config.target_per_class == 0 {
        return Err(Error::InvalidConfig("target_per_class must be at least 1".into()));
    }
    config.augment.validate()?;
    let mut classes = set.classes();
    for required in &config.classes {
        if !classes.contains(required) {
            return Err(Error::EmptyClass(required.clone()));
        }
    }
    if classes.is_empty() {
        return Err(Error::EmptyDataset);
    }
    classes.sort();

    let target = config.target_per_class;
    let mut out = LabeledImageSet::default();
    for (ci, class) in classes.iter().enumerate() {
        let members: Vec<usize> = (0..set.len()).filter(|&i| &set.images[i].label == class).collect();
        let mut rng = rng::stream(config.rng_seed, ci as u64);
        if members.len() >= target {
            let mut picked: Vec<usize> = index::sample(&mut rng, members.len(), target)
                .into_iter()
                .map(|k| members[k])
                .collect();
            picked.sort_unstable();
            let chosen = set.select(&picked);
            out.images.extend(chosen.images);
            out.manifest.extend(chosen.manifest);
            continue;
        }

        let chosen = set.select(&members);
        out.images.extend(chosen.images);
        out.manifest.extend(chosen.manifest);
        let fill_seed = rng::derive_seed(config.rng_seed, ci as u64);
        for k in 0..target - members.len() {
            let src = members[k % members.len()];
            let mut steps = vec![LineageStep::RandomErase {
                probability: 1.0,
                area_range: config.augment.re_area_range,
                aspect_range: config.augment.re_aspect_range,
                seed: fill_seed,
                stream: k as u64,
            }];
            if config.augment.flips {
                match rng.random_range(0..3u8) {
                    1 => steps.push(LineageStep::FlipHorizontal),
                    2 => steps.push(LineageStep::FlipVertical),
                    _ => {}
                }
            }
            let mut image = set.images[src].clone();
            for step in &steps {
                image = step.apply(&image)?;
            }
            let mut entry = set.manifest[src].clone();
            entry.image_path = entry.derived_path("aug", k);
            entry.lineage.extend(steps);
            out.push(image, entry);
        }
    }
    Ok(out)
}
