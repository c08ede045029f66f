use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LossSpec {
    #[default]
    SoftmaxCrossEntropy,
    /// `½ Σ (y_k − onehot_k)²`
    MeanSquaredError,
}

impl LossSpec {
    pub fn name(self) -> &'static str {
        match self {
            LossSpec::SoftmaxCrossEntropy => "softmax_ce",
            LossSpec::MeanSquaredError => "mse",
        }
    }
}

/// Loss value and `∂L/∂y` for a single sample with class label `target`.
pub fn loss_and_output_grad(
    logits: &[f64],
    target: usize,
    spec: LossSpec,
) -> Result<(f64, Vec<f64>)> {
    if target >= logits.len() {
        return Err(Error::InvalidInput(format!(
            "target {target} out of range for {} outputs",
            logits.len()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite logits".into()));
    }
    match spec {
        LossSpec::SoftmaxCrossEntropy => {
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            let log_sum = sum.ln() + max;
            let loss = log_sum - logits[target];
            let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
            grad[target] -= 1.0;
            Ok((loss, grad))
        }
        LossSpec::MeanSquaredError => {
            let mut grad = logits.to_vec();
            grad[target] -= 1.0;
            let loss = 0.5 * grad.iter().map(|g| g * g).sum::<f64>();
            Ok((loss, grad))
        }
    }
}

/// Index of the largest logit; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
