//! Central finite-difference gradients through the full forward + loss pipeline.

use crate::error::{Error, Result};
use crate::model::{forward, ChannelSpec, ModelConfig, Params};
use crate::tensor::Matrix;
use crate::training::backward::Gradients;
use crate::training::loss::{loss_and_output_grad, LossSpec};

pub fn sample_loss(
    params: &Params,
    channels: &ChannelSpec,
    sequence: &Matrix,
    target: usize,
    config: &ModelConfig,
    spec: LossSpec,
) -> Result<f64> {
    let (y, _) = forward(params, channels, sequence, config)?;
    let (loss, _) = loss_and_output_grad(&y, target, spec)?;
    if !loss.is_finite() {
        return Err(Error::numeric("finite differences", "non-finite loss"));
    }
    Ok(loss)
}

/// `(L(p + ε e_k) − L(p − ε e_k)) / 2ε` for every scalar parameter `k`.
pub fn finite_diff_gradients(
    params: &Params,
    channels: &ChannelSpec,
    sequence: &Matrix,
    target: usize,
    config: &ModelConfig,
    spec: LossSpec,
    step: f64,
) -> Result<Gradients> {
    if !(step.is_finite() && step > 0.0) {
        return Err(Error::InvalidInput(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    params.check_shapes(config)?;
    let mut grads = Gradients::zeros_like(params);
    let mut probe = params.clone();
    let count = params.num_scalars();
    let mut values = Vec::with_capacity(count);
    for k in 0..count {
        let original = *probe.scalar_mut(k);
        *probe.scalar_mut(k) = original + step;
        let plus = sample_loss(&probe, channels, sequence, target, config, spec)?;
        *probe.scalar_mut(k) = original - step;
        let minus = sample_loss(&probe, channels, sequence, target, config, spec)?;
        *probe.scalar_mut(k) = original;
        values.push((plus - minus) / (2.0 * step));
    }
    for (g, v) in grads.scalars_mut().zip(values) {
        *g = v;
    }
    Ok(grads)
}

/// Elementwise `|a − b| / max(|a|, |b|, 1e-8)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Largest [`relative_error`] per parameter block.
pub fn max_relative_error_by_block(
    analytic: &Gradients,
    numeric: &Gradients,
) -> [(&'static str, f64); 4] {
    let a = analytic.blocks();
    let b = numeric.blocks();
    let mut out = [("", 0.0); 4];
    for (slot, ((name, xs), (_, ys))) in out.iter_mut().zip(a.iter().zip(b.iter())) {
        let worst = xs
            .iter()
            .zip(ys.iter())
            .map(|(x, y)| relative_error(*x, *y))
            .fold(0.0, f64::max);
        *slot = (*name, worst);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{make_channels, InputMode};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scalar_cfg() -> ModelConfig {
        ModelConfig {
            input_dim: 1,
            hidden_dim: 1,
            num_channels: 1,
            base_freq: 1.0,
            seq_len: 1,
            output_dim: 1,
            input_mode: InputMode::FullyConnected,
        }
    }

    #[test]
    fn matches_hand_derived_two_parameter_gradient() {
        // y = √2 cos(w x + b − π/4) = sin φ + cos φ, L = ½ (y − 1)²
        let cfg = scalar_cfg();
        let ch = make_channels(&cfg).unwrap();
        let (w, b, x) = (0.7, -0.3, 1.9);
        let mut p = Params::zeros(&cfg);
        p.w_x.set(0, 0, w);
        p.b_x[0] = b;
        p.w_y.set(0, 0, 1.0);
        let seq = Matrix::from_vec(1, 1, vec![x]).unwrap();
        let g = finite_diff_gradients(&p, &ch, &seq, 0, &cfg, LossSpec::MeanSquaredError, 1e-6)
            .unwrap();

        let phi: f64 = w * x + b;
        let y = phi.sin() + phi.cos();
        let dy_dphi = phi.cos() - phi.sin();
        assert!((g.g_wx.get(0, 0) - (y - 1.0) * dy_dphi * x).abs() <= 1e-7);
        assert!((g.g_bx[0] - (y - 1.0) * dy_dphi).abs() <= 1e-7);
        assert!((g.g_wy.get(0, 0) - (y - 1.0) * y).abs() <= 1e-7);
        assert!((g.g_by[0] - (y - 1.0)).abs() <= 1e-7);
    }

    #[test]
    fn robust_to_step_size() {
        let cfg = ModelConfig {
            input_dim: 2,
            hidden_dim: 3,
            num_channels: 3,
            base_freq: 2.0,
            seq_len: 6,
            output_dim: 2,
            input_mode: InputMode::FullyConnected,
        };
        let ch = make_channels(&cfg).unwrap();
        let p = Params::init(&cfg, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let seq = Matrix::from_fn(6, 2, |_, _| rng.random_range(-1.0..1.0));
        let a = finite_diff_gradients(&p, &ch, &seq, 1, &cfg, LossSpec::SoftmaxCrossEntropy, 1e-5)
            .unwrap();
        let b = finite_diff_gradients(&p, &ch, &seq, 1, &cfg, LossSpec::SoftmaxCrossEntropy, 1e-6)
            .unwrap();
        for (x, y) in a.scalars().zip(b.scalars()) {
            assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn zero_input_kills_input_weight_gradient() {
        let cfg = ModelConfig {
            input_dim: 3,
            hidden_dim: 2,
            num_channels: 2,
            base_freq: 1.0,
            seq_len: 5,
            output_dim: 2,
            input_mode: InputMode::FullyConnected,
        };
        let ch = make_channels(&cfg).unwrap();
        let mut p = Params::init(&cfg, 8);
        p.b_x = vec![0.4, -1.1];
        let g = finite_diff_gradients(
            &p,
            &ch,
            &Matrix::zeros(5, 3),
            0,
            &cfg,
            LossSpec::SoftmaxCrossEntropy,
            1e-6,
        )
        .unwrap();
        assert!(g.g_wx.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.g_bx.iter().any(|&v| v.abs() > 1e-6));
    }

    #[test]
    fn rejects_bad_step() {
        let cfg = scalar_cfg();
        let ch = make_channels(&cfg).unwrap();
        let p = Params::zeros(&cfg);
        let seq = Matrix::zeros(1, 1);
        assert!(
            finite_diff_gradients(&p, &ch, &seq, 0, &cfg, LossSpec::MeanSquaredError, 0.0).is_err()
        );
    }

    #[test]
    fn relative_error_clamps_denominator() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!((relative_error(1e-10, 0.0) - 1e-2).abs() < 1e-15);
        assert!((relative_error(2.0, 1.0) - 0.5).abs() < 1e-15);
    }
}
