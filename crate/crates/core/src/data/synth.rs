//! Synthetic frequency-detection task: each class is a sinusoid with its own number
//! of cycles over the sequence, plus Gaussian noise.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::tensor::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTaskSpec {
    pub num_classes: usize,
    pub seq_len: usize,
    /// cycles over the whole sequence, one per class
    pub class_frequencies: Vec<f64>,
    pub noise_sigma: f64,
    pub samples_per_class: usize,
    pub seed: u64,
    /// phase offsets are drawn uniformly from `[0, phase_jitter)`
    pub phase_jitter: f64,
}

impl Default for SyntheticTaskSpec {
    fn default() -> Self {
        SyntheticTaskSpec {
            num_classes: 2,
            seq_len: 128,
            class_frequencies: vec![2.0, 7.0],
            noise_sigma: 0.5,
            samples_per_class: 200,
            seed: 0,
            phase_jitter: PI / 2.0,
        }
    }
}

impl SyntheticTaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.class_frequencies.len() != self.num_classes {
            return Err(Error::InvalidInput(format!(
                "{} class frequencies for {} classes",
                self.class_frequencies.len(),
                self.num_classes
            )));
        }
        if self.seq_len == 0 || self.samples_per_class == 0 {
            return Err(Error::InvalidInput(
                "seq_len and samples_per_class must be positive".into(),
            ));
        }
        let nyquist = self.seq_len as f64 / 2.0;
        for (i, &f) in self.class_frequencies.iter().enumerate() {
            if !(f.is_finite() && f >= 0.0 && f < nyquist) {
                return Err(Error::InvalidInput(format!(
                    "class {i} frequency {f} is outside [0, {nyquist}) cycles (aliasing limit)"
                )));
            }
            if self.class_frequencies[..i].contains(&f) {
                return Err(Error::InvalidInput(format!("class frequency {f} repeated")));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidInput(
                "noise_sigma must be non-negative".into(),
            ));
        }
        if !(self.phase_jitter.is_finite() && self.phase_jitter >= 0.0) {
            return Err(Error::InvalidInput(
                "phase_jitter must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// `x⟨t⟩ = sin(2π f_k t / N + ψ) + ε`, `t = 1..N`, `ψ ~ U[0, phase_jitter)`,
/// `ε ~ N(0, σ²)`. Samples are grouped by class.
pub fn synth_frequency_task(spec: &SyntheticTaskSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise =
        Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let n = spec.seq_len;
    let mut sequences = Vec::with_capacity(spec.num_classes * spec.samples_per_class);
    let mut labels = Vec::with_capacity(sequences.capacity());
    for (class, &freq) in spec.class_frequencies.iter().enumerate() {
        for _ in 0..spec.samples_per_class {
            let phase = if spec.phase_jitter > 0.0 {
                rng.random_range(0.0..spec.phase_jitter)
            } else {
                0.0
            };
            let data = (1..=n)
                .map(|t| {
                    (2.0 * PI * freq * t as f64 / n as f64 + phase).sin() + noise.sample(&mut rng)
                })
                .collect();
            sequences.push(Matrix::from_vec(n, 1, data)?);
            labels.push(class);
        }
    }
    Dataset::new("synth", sequences, labels, spec.num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Predicts the class whose frequency carries the largest DFT magnitude.
    fn dft_oracle_accuracy(ds: &Dataset, freqs: &[f64]) -> f64 {
        let mut correct = 0;
        for (s, &label) in ds.sequences().iter().zip(ds.labels()) {
            let n = s.rows() as f64;
            let mags: Vec<f64> = freqs
                .iter()
                .map(|&f| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for t in 0..s.rows() {
                        let a = 2.0 * PI * f * (t + 1) as f64 / n;
                        re += s.get(t, 0) * a.cos();
                        im -= s.get(t, 0) * a.sin();
                    }
                    re.hypot(im)
                })
                .collect();
            let pred = mags
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0;
            correct += usize::from(pred == label);
        }
        correct as f64 / ds.len() as f64
    }

    #[test]
    fn noiseless_task_is_perfectly_separable() {
        let spec = SyntheticTaskSpec {
            noise_sigma: 0.0,
            phase_jitter: 2.0 * PI,
            ..Default::default()
        };
        let ds = synth_frequency_task(&spec).unwrap();
        assert_eq!(ds.class_counts(), vec![200, 200]);
        assert_eq!(dft_oracle_accuracy(&ds, &spec.class_frequencies), 1.0);
    }

    #[test]
    fn default_task_is_easy_for_the_oracle() {
        let spec = SyntheticTaskSpec::default();
        let acc = dft_oracle_accuracy(
            &synth_frequency_task(&spec).unwrap(),
            &spec.class_frequencies,
        );
        assert!(acc >= 0.99, "oracle accuracy {acc}");
    }

    #[test]
    fn heavy_noise_pushes_oracle_to_chance() {
        let spec = SyntheticTaskSpec {
            seq_len: 32,
            noise_sigma: 10.0,
            samples_per_class: 500,
            ..Default::default()
        };
        let acc = dft_oracle_accuracy(
            &synth_frequency_task(&spec).unwrap(),
            &spec.class_frequencies,
        );
        // measured 0.508
        assert!(acc < 0.6, "oracle accuracy {acc}");
    }

    #[test]
    fn seeded() {
        let spec = SyntheticTaskSpec::default();
        assert_eq!(
            synth_frequency_task(&spec).unwrap(),
            synth_frequency_task(&spec).unwrap()
        );
        let other = SyntheticTaskSpec {
            seed: 1,
            ..spec.clone()
        };
        assert_ne!(
            synth_frequency_task(&spec).unwrap(),
            synth_frequency_task(&other).unwrap()
        );
    }

    #[test]
    fn rejects_aliasing_and_duplicates() {
        let bad = SyntheticTaskSpec {
            class_frequencies: vec![2.0, 64.0],
            ..Default::default()
        };
        assert!(synth_frequency_task(&bad).is_err());
        let dup = SyntheticTaskSpec {
            class_frequencies: vec![3.0, 3.0],
            ..Default::default()
        };
        assert!(synth_frequency_task(&dup).is_err());
        let count = SyntheticTaskSpec {
            num_classes: 3,
            ..Default::default()
        };
        assert!(synth_frequency_task(&count).is_err());
    }
}
