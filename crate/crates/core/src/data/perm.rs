//! Fixed pixel permutation for permuted sequential MNIST.
//!
//! The shipped permutation (`assets/psmnist_perm_seed42.txt`) was generated once by
//! [`PermutationSpec::from_seed`] with [`DEFAULT_PERMUTATION_SEED`] and is read back
//! from the file, so runs agree across machines and `rand` versions.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{DataError, Error, Result};
use crate::tensor::Matrix;

pub const DEFAULT_PERMUTATION_SEED: u64 = 42;
pub const PSMNIST_LEN: usize = 784;

const DEFAULT_PERMUTATION: &str = include_str!("../../assets/psmnist_perm_seed42.txt");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PermutationSpec {
    pub seed: u64,
    pub perm: Vec<usize>,
}

impl PermutationSpec {
    pub fn identity(len: usize) -> Self {
        PermutationSpec {
            seed: 0,
            perm: (0..len).collect(),
        }
    }

    pub fn from_seed(seed: u64, len: usize) -> Self {
        let mut perm: Vec<usize> = (0..len).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        PermutationSpec { seed, perm }
    }

    /// The committed psMNIST permutation.
    pub fn default_psmnist() -> Self {
        let perm = parse_permutation(DEFAULT_PERMUTATION).expect("bundled permutation is valid");
        PermutationSpec {
            seed: DEFAULT_PERMUTATION_SEED,
            perm,
        }
    }

    /// Parses newline-delimited indices. Blank lines are ignored.
    pub fn parse(text: &str, seed: u64) -> std::result::Result<Self, DataError> {
        Ok(PermutationSpec {
            seed,
            perm: parse_permutation(text)?,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.perm.len() * 4);
        for p in &self.perm {
            s.push_str(&p.to_string());
            s.push('\n');
        }
        s
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.perm.len()];
        for (i, &p) in self.perm.iter().enumerate() {
            inv[p] = i;
        }
        PermutationSpec {
            seed: self.seed,
            perm: inv,
        }
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.perm.len()];
        for &p in &self.perm {
            if p >= seen.len() || seen[p] {
                return false;
            }
            seen[p] = true;
        }
        true
    }
}

fn parse_permutation(text: &str) -> std::result::Result<Vec<usize>, DataError> {
    let mut perm = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: usize = line.parse().map_err(|_| DataError::Malformed {
            line: i + 1,
            detail: format!("not an index: {line:?}"),
        })?;
        perm.push(v);
    }
    let mut seen = vec![false; perm.len()];
    for &p in &perm {
        if p >= seen.len() || seen[p] {
            return Err(DataError::Malformed {
                line: 0,
                detail: format!("not a permutation of 0..{}: index {p}", perm.len()),
            });
        }
        seen[p] = true;
    }
    Ok(perm)
}

/// `sequence′[t] = sequence[perm[t]]` for every sample.
pub fn permute(dataset: &Dataset, spec: &PermutationSpec) -> Result<Dataset> {
    let meta = dataset.meta();
    if meta.input_dim != 1 || meta.seq_len != spec.perm.len() {
        return Err(Error::InvalidInput(format!(
            "permutation of length {} needs {}x1 sequences, dataset has {}x{}",
            spec.perm.len(),
            spec.perm.len(),
            meta.seq_len,
            meta.input_dim
        )));
    }
    if !spec.is_bijection() {
        return Err(Error::InvalidInput("permutation is not a bijection".into()));
    }
    let sequences = dataset
        .sequences()
        .iter()
        .map(|s| {
            let src = s.as_slice();
            Matrix::from_vec(src.len(), 1, spec.perm.iter().map(|&p| src[p]).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(
        format!("p{}", meta.name),
        sequences,
        dataset.labels().to_vec(),
        meta.num_classes,
    )
}
