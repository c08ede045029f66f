//! Plain gradient descent with an exponentially decaying learning rate.

use crate::error::{Error, Result};
use crate::model::Params;
use crate::training::backward::Gradients;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerState {
    pub lr_initial: f64,
    pub decay_factor: f64,
    pub epoch: u32,
}

impl OptimizerState {
    pub fn new(lr_initial: f64, decay_factor: f64) -> Result<Self> {
        if !(lr_initial.is_finite() && lr_initial >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "lr_initial must be non-negative, got {lr_initial}"
            )));
        }
        if !(decay_factor > 0.0 && decay_factor <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "decay_factor must lie in (0, 1], got {decay_factor}"
            )));
        }
        Ok(OptimizerState {
            lr_initial,
            decay_factor,
            epoch: 0,
        })
    }

    /// `lr_initial · decay_factor^epoch`
    pub fn current_lr(&self) -> f64 {
        self.lr_initial * self.decay_factor.powi(self.epoch as i32)
    }

    pub fn advance_epoch(&mut self) {
        self.epoch += 1;
    }
}

/// Descent step `params − lr · grads`.
pub fn apply_update(params: &Params, grads: &Gradients, opt: &OptimizerState) -> Params {
    let mut next = params.clone();
    apply_update_in_place(&mut next, grads, opt.current_lr());
    next
}

pub fn apply_update_in_place(params: &mut Params, grads: &Gradients, lr: f64) {
    for (p, g) in params.scalars_mut().zip(grads.scalars()) {
        *p -= lr * g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::forward;
    use crate::model::{make_channels, InputMode, ModelConfig};
    use crate::tensor::Matrix;
    use crate::training::backward::{backward, BackwardMode};
    use crate::training::gradcheck::sample_loss;
    use crate::training::loss::{loss_and_output_grad, LossSpec};

    #[test]
    fn decay_schedule() {
        let mut opt = OptimizerState::new(1e-3, 0.7).unwrap();
        assert_eq!(opt.current_lr(), 1e-3);
        opt.advance_epoch();
        opt.advance_epoch();
        assert!((opt.current_lr() - 4.9e-4).abs() < 1e-18);
        for k in 0..20 {
            opt.epoch = k;
            assert_eq!(opt.current_lr(), 1e-3 * 0.7f64.powi(k as i32));
        }
    }

    #[test]
    fn rejects_bad_hyperparameters() {
        assert!(OptimizerState::new(-1.0, 0.7).is_err());
        assert!(OptimizerState::new(1e-3, 0.0).is_err());
        assert!(OptimizerState::new(1e-3, 1.5).is_err());
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let cfg = ModelConfig {
            input_dim: 2,
            hidden_dim: 2,
            num_channels: 2,
            base_freq: 1.0,
            seq_len: 3,
            output_dim: 2,
            input_mode: InputMode::FullyConnected,
        };
        let p = crate::model::Params::init(&cfg, 1);
        let g = Gradients::zeros_like(&p);
        let opt = OptimizerState::new(0.5, 0.7).unwrap();
        assert_eq!(apply_update(&p, &g, &opt), p);
    }

    #[test]
    fn one_step_decreases_scalar_mse() {
        let cfg = ModelConfig {
            input_dim: 1,
            hidden_dim: 1,
            num_channels: 1,
            base_freq: 1.0,
            seq_len: 4,
            output_dim: 1,
            input_mode: InputMode::FullyConnected,
        };
        let ch = make_channels(&cfg).unwrap();
        let mut p = crate::model::Params::zeros(&cfg);
        p.w_x.set(0, 0, 0.5);
        p.w_y.set(0, 0, 0.2);
        let seq = Matrix::from_vec(4, 1, vec![0.1, -0.4, 0.8, 0.3]).unwrap();
        let before = sample_loss(&p, &ch, &seq, 0, &cfg, LossSpec::MeanSquaredError).unwrap();
        let (y, cache) = forward(&p, &ch, &seq, &cfg).unwrap();
        let (_, dy) = loss_and_output_grad(&y, 0, LossSpec::MeanSquaredError).unwrap();
        let g = backward(&cache, &dy, &p, &ch, &cfg, BackwardMode::ExactChainRule).unwrap();
        let opt = OptimizerState::new(1e-2, 1.0).unwrap();
        let next = apply_update(&p, &g, &opt);
        let after = sample_loss(&next, &ch, &seq, 0, &cfg, LossSpec::MeanSquaredError).unwrap();
        assert!(after < before, "{after} !< {before}");
    }
}
