//! Backward pass without back-propagation through time.
//!
//! Every hidden state is a plain sum over timesteps, so `∂L/∂φ⟨t⟩` depends only on
//! quantities cached for step `t` and on the readout gradient. Each step's term is
//! computed independently and the terms are summed at the end.
//!
//! Two weightings of the per-channel terms `−sin θ_i⟨t⟩ ⊙ (W_y[i]ᵀ ∂L/∂y)` exist:
//!
//! * [`BackwardMode::ExactChainRule`] weights channel `i` by its forward normalization
//!   (`√2/N` for DC, `1/N` for AC) and sums. This is the true gradient.
//! * [`BackwardMode::PaperFaithful`] averages all channel and step terms with a
//!   uniform `1/(C·N)` factor.
//!
//! The two differ per channel by a positive constant, so they never disagree on sign.

use crate::error::{Error, Result};
use crate::model::{ChannelSpec, ForwardCache, ModelConfig, Params};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BackwardMode {
    PaperFaithful,
    #[default]
    ExactChainRule,
}

impl BackwardMode {
    pub fn name(self) -> &'static str {
        match self {
            BackwardMode::PaperFaithful => "paper",
            BackwardMode::ExactChainRule => "exact",
        }
    }

    /// Weight applied to channel `channel`'s per-step terms.
    pub fn channel_weight(self, config: &ModelConfig, channel: usize) -> f64 {
        match self {
            BackwardMode::ExactChainRule => config.channel_scale(channel),
            BackwardMode::PaperFaithful => 1.0 / (config.num_channels * config.num_steps()) as f64,
        }
    }
}

/// `∂L/∂(·)` with the same shapes as [`Params`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub g_wx: Matrix,
    pub g_bx: Vec<f64>,
    pub g_wy: Matrix,
    pub g_by: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &Params) -> Self {
        Gradients {
            g_wx: Matrix::zeros(params.w_x.rows(), params.w_x.cols()),
            g_bx: vec![0.0; params.b_x.len()],
            g_wy: Matrix::zeros(params.w_y.rows(), params.w_y.cols()),
            g_by: vec![0.0; params.b_y.len()],
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.scalars_mut().zip(other.scalars()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.scalars_mut().for_each(|g| *g *= factor);
    }

    pub fn is_finite(&self) -> bool {
        self.scalars().all(|g| g.is_finite())
    }

    /// Order matches [`Params::scalars`].
    pub fn scalars(&self) -> impl Iterator<Item = &f64> {
        self.g_wx
            .as_slice()
            .iter()
            .chain(self.g_bx.iter())
            .chain(self.g_wy.as_slice().iter())
            .chain(self.g_by.iter())
    }

    pub fn scalars_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.g_wx
            .as_mut_slice()
            .iter_mut()
            .chain(self.g_bx.iter_mut())
            .chain(self.g_wy.as_mut_slice().iter_mut())
            .chain(self.g_by.iter_mut())
    }

    /// Named parameter blocks, for per-block reporting.
    pub fn blocks(&self) -> [(&'static str, &[f64]); 4] {
        [
            ("W_x", self.g_wx.as_slice()),
            ("b_x", &self.g_bx),
            ("W_y", self.g_wy.as_slice()),
            ("b_y", &self.g_by),
        ]
    }
}

fn check_backward_args(
    cache: &ForwardCache,
    dl_dy: &[f64],
    params: &Params,
    channels: &ChannelSpec,
    config: &ModelConfig,
) -> Result<()> {
    params.check_shapes(config)?;
    let n = config.hidden_dim;
    let ok = cache.phis.shape() == (config.num_steps(), n)
        && cache.inputs.shape() == (config.num_steps(), config.effective_input_dim())
        && cache.h_final.shape() == (config.num_channels, n)
        && cache.h_cat.len() == config.hidden_concat_dim()
        && channels.len() == config.num_channels;
    if !ok {
        return Err(Error::InvalidInput(
            "forward cache does not match params/config".into(),
        ));
    }
    if dl_dy.len() != config.output_dim {
        return Err(Error::InvalidInput(format!(
            "dL/dy has length {}, expected {}",
            dl_dy.len(),
            config.output_dim
        )));
    }
    Ok(())
}

/// `W_y[i]ᵀ ∂L/∂y` for every channel, laid out C × n.
pub fn hidden_grads(params: &Params, dl_dy: &[f64], config: &ModelConfig) -> Matrix {
    let n = config.hidden_dim;
    let mut g = Matrix::zeros(config.num_channels, n);
    for c in 0..config.num_channels {
        params
            .w_y
            .transpose_matvec_block(dl_dy, c * n, n, g.row_mut(c));
    }
    g
}

/// Per-step term `[∂L/∂b_x]_i⟨t⟩ = −sin θ_i⟨t⟩ ⊙ (W_y[i]ᵀ ∂L/∂y)` for one channel,
/// unweighted. `step` is 0-based.
pub fn channel_step_term(
    cache: &ForwardCache,
    hidden: &Matrix,
    channels: &ChannelSpec,
    channel: usize,
    step: usize,
) -> Vec<f64> {
    hidden
        .row(channel)
        .iter()
        .enumerate()
        .map(|(j, g)| -cache.theta(channels, channel, step, j).sin() * g)
        .collect()
}

/// Weighted `∂L/∂φ⟨t⟩` for one step, summed over channels.
pub fn phase_grad_at(
    cache: &ForwardCache,
    hidden: &Matrix,
    channels: &ChannelSpec,
    config: &ModelConfig,
    mode: BackwardMode,
    step: usize,
    out: &mut [f64],
) {
    out.iter_mut().for_each(|o| *o = 0.0);
    let phi = cache.phis.row(step);
    for c in 0..config.num_channels {
        let weight = mode.channel_weight(config, c);
        let off = channels.offset(c, step + 1);
        for ((o, p), g) in out.iter_mut().zip(phi).zip(hidden.row(c)) {
            *o += weight * (-(p - off).sin() * g);
        }
    }
}

pub fn backward(
    cache: &ForwardCache,
    dl_dy: &[f64],
    params: &Params,
    channels: &ChannelSpec,
    config: &ModelConfig,
    mode: BackwardMode,
) -> Result<Gradients> {
    check_backward_args(cache, dl_dy, params, channels, config)?;
    let mut grads = Gradients::zeros_like(params);

    // readout
    grads.g_by.copy_from_slice(dl_dy);
    for (r, &gy) in dl_dy.iter().enumerate() {
        for (w, h) in grads.g_wy.row_mut(r).iter_mut().zip(&cache.h_cat) {
            *w = gy * h;
        }
    }

    // input layer, one independent term per step
    let hidden = hidden_grads(params, dl_dy, config);
    let mut gphi = vec![0.0; config.hidden_dim];
    for step in 0..cache.phis.rows() {
        phase_grad_at(cache, &hidden, channels, config, mode, step, &mut gphi);
        let x = cache.inputs.row(step);
        for (j, &g) in gphi.iter().enumerate() {
            grads.g_bx[j] += g;
            for (w, xk) in grads.g_wx.row_mut(j).iter_mut().zip(x) {
                *w += g * xk;
            }
        }
    }

    if !grads.is_finite() {
        return Err(Error::numeric("backward", "non-finite gradient"));
    }
    Ok(grads)
}

/// Input-layer gradient split by channel: `(g_bx, g_Wx)` for each channel, each
/// already carrying the mode's channel weight. Summing over channels reproduces the
/// input-layer part of [`backward`] up to rounding.
pub fn channel_contributions(
    cache: &ForwardCache,
    dl_dy: &[f64],
    params: &Params,
    channels: &ChannelSpec,
    config: &ModelConfig,
    mode: BackwardMode,
) -> Result<Vec<(Vec<f64>, Matrix)>> {
    check_backward_args(cache, dl_dy, params, channels, config)?;
    let hidden = hidden_grads(params, dl_dy, config);
    let n = config.hidden_dim;
    let mut out = Vec::with_capacity(config.num_channels);
    for c in 0..config.num_channels {
        let weight = mode.channel_weight(config, c);
        let mut g_bx = vec![0.0; n];
        let mut g_wx = Matrix::zeros(n, config.effective_input_dim());
        for step in 0..cache.phis.rows() {
            let term = channel_step_term(cache, &hidden, channels, c, step);
            let x = cache.inputs.row(step);
            for (j, t) in term.iter().enumerate() {
                let g = weight * t;
                g_bx[j] += g;
                for (w, xk) in g_wx.row_mut(j).iter_mut().zip(x) {
                    *w += g * xk;
                }
            }
        }
        out.push((g_bx, g_wx));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{forward, make_channels, InputMode};
    use crate::training::loss::{loss_and_output_grad, LossSpec};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::SQRT_2;

    fn setup(c: usize, conv: bool, seed: u64) -> (ModelConfig, Params, ChannelSpec, Matrix) {
        let cfg = ModelConfig {
            input_dim: 2,
            hidden_dim: 3,
            num_channels: c,
            base_freq: 1.3,
            seq_len: 7,
            output_dim: 3,
            input_mode: if conv {
                InputMode::Conv1D {
                    window: 3,
                    stride: 1,
                }
            } else {
                InputMode::FullyConnected
            },
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Params::init(&cfg, seed);
        p.b_x
            .iter_mut()
            .for_each(|b| *b = rng.random_range(-1.0..1.0));
        let ch = make_channels(&cfg).unwrap();
        let seq = Matrix::from_fn(7, 2, |_, _| rng.random_range(-1.0..1.0));
        (cfg, p, ch, seq)
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let (cfg, p, ch, seq) = setup(3, false, 1);
        let (_, cache) = forward(&p, &ch, &seq, &cfg).unwrap();
        for mode in [BackwardMode::PaperFaithful, BackwardMode::ExactChainRule] {
            let g = backward(&cache, &[0.0; 3], &p, &ch, &cfg, mode).unwrap();
            assert!(g.scalars().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn readout_gradient_is_outer_product() {
        let (cfg, p, ch, seq) = setup(2, true, 2);
        let (_, cache) = forward(&p, &ch, &seq, &cfg).unwrap();
        let dy = [0.3, -0.1, 0.7];
        let g = backward(&cache, &dy, &p, &ch, &cfg, BackwardMode::ExactChainRule).unwrap();
        assert_eq!(g.g_by, dy.to_vec());
        for r in 0..3 {
            for k in 0..cache.h_cat.len() {
                assert_eq!(g.g_wy.get(r, k), dy[r] * cache.h_cat[k]);
            }
        }
    }

    #[test]
    fn dc_only_modes_differ_by_sqrt2() {
        let (cfg, p, ch, seq) = setup(1, false, 3);
        let (y, cache) = forward(&p, &ch, &seq, &cfg).unwrap();
        let (_, dy) = loss_and_output_grad(&y, 1, LossSpec::SoftmaxCrossEntropy).unwrap();
        let exact = backward(&cache, &dy, &p, &ch, &cfg, BackwardMode::ExactChainRule).unwrap();
        let paper = backward(&cache, &dy, &p, &ch, &cfg, BackwardMode::PaperFaithful).unwrap();
        for (e, q) in exact.g_bx.iter().zip(&paper.g_bx) {
            assert!((e - SQRT_2 * q).abs() <= 1e-12 * e.abs().max(1e-300));
        }
        assert_eq!(exact.g_wy, paper.g_wy);
    }

    #[test]
    fn channel_contributions_sum_to_backward() {
        for mode in [BackwardMode::PaperFaithful, BackwardMode::ExactChainRule] {
            let (cfg, p, ch, seq) = setup(4, true, 4);
            let (y, cache) = forward(&p, &ch, &seq, &cfg).unwrap();
            let (_, dy) = loss_and_output_grad(&y, 0, LossSpec::SoftmaxCrossEntropy).unwrap();
            let full = backward(&cache, &dy, &p, &ch, &cfg, mode).unwrap();
            let parts = channel_contributions(&cache, &dy, &p, &ch, &cfg, mode).unwrap();
            let mut sum = Matrix::zeros(3, 6);
            for (_, gw) in &parts {
                for (a, b) in sum.as_mut_slice().iter_mut().zip(gw.as_slice()) {
                    *a += b;
                }
            }
            assert!(sum.max_abs_diff(&full.g_wx) <= 1e-14);
        }
    }

    #[test]
    fn per_step_terms_are_order_independent() {
        let (cfg, p, ch, seq) = setup(3, false, 5);
        let (y, cache) = forward(&p, &ch, &seq, &cfg).unwrap();
        let (_, dy) = loss_and_output_grad(&y, 2, LossSpec::SoftmaxCrossEntropy).unwrap();
        let full = backward(&cache, &dy, &p, &ch, &cfg, BackwardMode::ExactChainRule).unwrap();
        let hidden = hidden_grads(&p, &dy, &cfg);
        let mut order: Vec<usize> = (0..cfg.num_steps()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(9));
        let mut g_bx = [0.0; 3];
        let mut gphi = [0.0; 3];
        for &s in &order {
            phase_grad_at(
                &cache,
                &hidden,
                &ch,
                &cfg,
                BackwardMode::ExactChainRule,
                s,
                &mut gphi,
            );
            for j in 0..3 {
                g_bx[j] += gphi[j];
            }
        }
        for j in 0..3 {
            assert!((g_bx[j] - full.g_bx[j]).abs() <= 1e-12);
        }
    }

    #[test]
    fn mismatched_cache_rejected() {
        let (cfg, p, ch, seq) = setup(2, false, 6);
        let (_, cache) = forward(&p, &ch, &seq, &cfg).unwrap();
        let mut other = cfg.clone();
        other.hidden_dim = 4;
        let p2 = Params::zeros(&other);
        let ch2 = make_channels(&other).unwrap();
        assert!(backward(
            &cache,
            &[0.0; 3],
            &p2,
            &ch2,
            &other,
            BackwardMode::ExactChainRule
        )
        .is_err());
        assert!(backward(
            &cache,
            &[0.0; 2],
            &p,
            &ch,
            &cfg,
            BackwardMode::ExactChainRule
        )
        .is_err());
    }
}
