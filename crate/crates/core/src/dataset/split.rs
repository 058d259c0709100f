use std::collections::BTreeMap;

use rand::Rng;

use super::{LabeledImageSet, ManifestEntry};
use crate::error::{Error, Result};
use crate::rng;

/// Stratified train/test split that cannot leak through overlapping windows.
///
/// Within each class, images cut from the same window (including its
/// augmented copies) form one unit. Units are ordered by source position and
/// the test side takes a contiguous block of them from the head or the tail
/// (seeded coin flip) until it holds `test_fraction` of the class. Train units
/// that share a raw timestep with any test unit are dropped, so the two sides
/// never depend on a common sample.
pub fn split(
    set: &LabeledImageSet,
    test_fraction: f64,
    rng_seed: u64,
) -> Result<(LabeledImageSet, LabeledImageSet)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::FractionOutOfRange(test_fraction));
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (ci, class) in set.classes().iter().enumerate() {
        let mut units: BTreeMap<_, Vec<usize>> = BTreeMap::new();
        for (i, entry) in set.manifest.iter().enumerate() {
            if &entry.label == class {
                units.entry(unit_order(entry)).or_default().push(i);
            }
        }
        let units: Vec<Vec<usize>> = units.into_values().collect();
        let total: usize = units.iter().map(Vec::len).sum();
        let want = ((test_fraction * total as f64).round() as usize).max(1);

        let mut rng = rng::stream(rng_seed, ci as u64);
        let from_tail = rng.random::<bool>();
        let order: Vec<usize> = if from_tail {
            (0..units.len()).rev().collect()
        } else {
            (0..units.len()).collect()
        };
        let mut is_test = vec![false; units.len()];
        let mut taken = 0;
        // keep at least one unit for training
        for &u in order.iter().take(units.len().saturating_sub(1)) {
            if taken >= want {
                break;
            }
            is_test[u] = true;
            taken += units[u].len();
        }

        let test_entries: Vec<&ManifestEntry> = (0..units.len())
            .filter(|&u| is_test[u])
            .map(|u| &set.manifest[units[u][0]])
            .collect();
        for (u, members) in units.iter().enumerate() {
            if is_test[u] {
                test_idx.extend(members);
            } else {
                let rep = &set.manifest[members[0]];
                if !test_entries.iter().any(|t| t.overlaps(rep)) {
                    train_idx.extend(members);
                }
            }
        }
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((set.select(&train_idx), set.select(&test_idx)))
}

fn unit_order(entry: &ManifestEntry) -> (String, usize, usize, (String, usize, usize, Vec<String>)) {
    let (start, end) = entry.source_range();
    (entry.source_id.clone(), start, end, entry.window_key())
}
