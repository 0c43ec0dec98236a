//! Dataset ingestion and optical encoding of images.

mod encode;
mod idx;

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

pub use encode::{downsample, phase_encode, random_probe_inputs, random_probe_inputs_in_range, EncodingSpec};
pub use idx::{parse_idx, write_idx, IdxFile, ImageSet, ImageTensor, IMAGES_MAGIC, LABELS_MAGIC};

use crate::error::{QelmError, Result};
use crate::rng::rng_from_seed;

/// Balanced subsample of `classes`, relabelled `0..classes.len()` in the
/// order given. Each class contributes `min(max_per_class, smallest class
/// size)` images, chosen by a seeded shuffle; output keeps file order.
pub fn filter_classes(set: &ImageSet, classes: &[u8], max_per_class: usize, seed: u64) -> Result<ImageSet> {
    if classes.is_empty() {
        return Err(QelmError::Data("no classes requested".into()));
    }
    let mut members: BTreeMap<u8, Vec<usize>> = classes.iter().map(|&c| (c, Vec::new())).collect();
    if members.len() != classes.len() {
        return Err(QelmError::Data("duplicate class in selection".into()));
    }
    for (i, label) in set.labels().iter().enumerate() {
        if let Some(v) = members.get_mut(label) {
            v.push(i);
        }
    }
    if let Some((&c, _)) = members.iter().find(|(_, v)| v.is_empty()) {
        return Err(QelmError::MissingClass(c));
    }
    let per_class = members.values().map(Vec::len).min().unwrap_or(0).min(max_per_class);

    let mut rng = rng_from_seed(seed);
    let mut picked: Vec<(usize, u8)> = Vec::with_capacity(per_class * classes.len());
    for (new_label, c) in classes.iter().enumerate() {
        let v = members.get_mut(c).expect("class registered");
        v.shuffle(&mut rng);
        picked.extend(v[..per_class].iter().map(|&i| (i, new_label as u8)));
    }
    picked.sort_unstable();
    let indices: Vec<usize> = picked.iter().map(|&(i, _)| i).collect();
    let labels = picked.iter().map(|&(_, l)| l).collect();
    ImageSet::new(set.images().select(&indices), labels)
}
