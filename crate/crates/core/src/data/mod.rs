//! Labeled sequence datasets: loaders, generators, and splits.

mod har;
mod idx;
mod perm;
mod synth;

pub use har::{
    har2_from_text, interleave_uci_signals, load_har2, load_har2_uci, parse_har2_features,
    parse_har2_labels, FeatureStats, HAR_CHANNELS, HAR_STEPS, UCI_SIGNALS,
};
pub use idx::{
    idx_to_dataset, load_idx, parse_idx_images, parse_idx_labels, IdxImages, IMAGES_MAGIC,
    LABELS_MAGIC,
};
pub use perm::{permute, PermutationSpec, DEFAULT_PERMUTATION_SEED, PSMNIST_LEN};
pub use synth::{synth_frequency_task, SyntheticTaskSpec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{DataError, Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetMeta {
    pub name: String,
    pub seq_len: usize,
    pub input_dim: usize,
    pub num_classes: usize,
}

/// Immutable set of equally shaped sequences with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    sequences: Vec<Matrix>,
    labels: Vec<usize>,
    meta: DatasetMeta,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        sequences: Vec<Matrix>,
        labels: Vec<usize>,
        num_classes: usize,
    ) -> Result<Self> {
        if sequences.is_empty() {
            return Err(DataError::Empty.into());
        }
        if sequences.len() != labels.len() {
            return Err(DataError::CountMismatch {
                images: sequences.len(),
                labels: labels.len(),
            }
            .into());
        }
        let shape = sequences[0].shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::InvalidInput(
                "sequences must have at least one step and one feature".into(),
            ));
        }
        for (i, s) in sequences.iter().enumerate() {
            if s.shape() != shape {
                return Err(Error::InvalidInput(format!(
                    "sequence {i} has shape {:?}, expected {shape:?}",
                    s.shape()
                )));
            }
            if !s.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "sequence {i} has non-finite features"
                )));
            }
        }
        if let Some((i, l)) = labels.iter().enumerate().find(|(_, &l)| l >= num_classes) {
            return Err(Error::InvalidInput(format!(
                "label {l} of sample {i} outside [0, {num_classes})"
            )));
        }
        Ok(Dataset {
            sequences,
            labels,
            meta: DatasetMeta {
                name: name.into(),
                seq_len: shape.0,
                input_dim: shape.1,
                num_classes,
            },
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sequences(&self) -> &[Matrix] {
        &self.sequences
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn meta(&self) -> &DatasetMeta {
        &self.meta
    }

    /// Samples at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(Error::InvalidInput(format!(
                "index {bad} out of range for {} samples",
                self.len()
            )));
        }
        Dataset::new(
            self.meta.name.clone(),
            indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.meta.num_classes,
        )
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.meta.num_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Label-stratified split. Within each class a seeded shuffle picks
/// `round(count · train_fraction)` samples for training (at least one sample on
/// each side). Both halves keep the original sample order.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidInput(format!(
            "train_fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for class in 0..dataset.meta.num_classes {
        let mut members: Vec<usize> = (0..dataset.len())
            .filter(|&i| dataset.labels[i] == class)
            .collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "class {class} has {} sample(s); need at least 2 to split",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let k =
            ((members.len() as f64 * train_fraction).round() as usize).clamp(1, members.len() - 1);
        train_idx.extend_from_slice(&members[..k]);
        test_idx.extend_from_slice(&members[k..]);
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((dataset.subset(&train_idx)?, dataset.subset(&test_idx)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(n_per_class: usize, classes: usize) -> Dataset {
        let mut seqs = Vec::new();
        let mut labels = Vec::new();
        for c in 0..classes {
            for i in 0..n_per_class {
                seqs.push(Matrix::from_vec(2, 1, vec![c as f64, i as f64]).unwrap());
                labels.push(c);
            }
        }
        Dataset::new("toy", seqs, labels, classes).unwrap()
    }

    #[test]
    fn rejects_invalid_construction() {
        assert!(Dataset::new("e", vec![], vec![], 2).is_err());
        let s = Matrix::zeros(3, 1);
        assert!(Dataset::new("m", vec![s.clone()], vec![0, 1], 2).is_err());
        assert!(Dataset::new("r", vec![s.clone(), Matrix::zeros(4, 1)], vec![0, 1], 2).is_err());
        assert!(Dataset::new("l", vec![s.clone()], vec![2], 2).is_err());
        let mut bad = s.clone();
        bad.set(0, 0, f64::NAN);
        assert!(Dataset::new("n", vec![bad], vec![0], 2).is_err());
    }

    #[test]
    fn split_balanced_half() {
        let ds = toy(50, 2);
        let (tr, te) = split(&ds, 0.5, 7).unwrap();
        assert_eq!((tr.len(), te.len()), (50, 50));
        assert_eq!(tr.class_counts(), vec![25, 25]);
        assert_eq!(te.class_counts(), vec![25, 25]);
    }

    #[test]
    fn split_is_exhaustive_disjoint_and_seeded() {
        let ds = toy(13, 3);
        let (tr, te) = split(&ds, 0.7, 1).unwrap();
        let mut all: Vec<(usize, i64)> = tr
            .sequences()
            .iter()
            .chain(te.sequences())
            .map(|s| (s.get(0, 0) as usize, s.get(1, 0) as i64))
            .collect();
        all.sort();
        let mut want: Vec<(usize, i64)> = ds
            .sequences()
            .iter()
            .map(|s| (s.get(0, 0) as usize, s.get(1, 0) as i64))
            .collect();
        want.sort();
        assert_eq!(all, want);
        assert_eq!(split(&ds, 0.7, 1).unwrap(), (tr, te));
        assert_ne!(split(&ds, 0.7, 2).unwrap().0, split(&ds, 0.7, 1).unwrap().0);
    }

    #[test]
    fn split_rejects_singleton_class_and_bad_fraction() {
        let ds = Dataset::new(
            "s",
            vec![
                Matrix::zeros(1, 1),
                Matrix::zeros(1, 1),
                Matrix::zeros(1, 1),
            ],
            vec![0, 0, 1],
            2,
        )
        .unwrap();
        assert!(split(&ds, 0.5, 0).is_err());
        assert!(split(&toy(4, 2), 1.0, 0).is_err());
        assert!(split(&toy(4, 2), 0.0, 0).is_err());
    }
}
