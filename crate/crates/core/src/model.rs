//! O-FNN parameterization and forward pass.
//!
//! A model maps a sequence `x⟨1⟩..x⟨N⟩` to logits in three stages:
//!
//! 1. input phase `φ⟨t⟩ = W_x x⟨t⟩ + b_x` (fully connected or a sliding 1-D window),
//! 2. time-varying cosine channels: the DC channel accumulates `cos(φ⟨t⟩ − π/4)`,
//!    AC channel `i` accumulates `cos(φ⟨t⟩ − ω_i t)` with `ω_i = 2^i π f / N`,
//! 3. linear readout of the concatenated, normalized channel sums.
//!
//! Timestep index `t` is 1-based throughout. The hidden accumulators start at zero.

use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Timesteps summed sequentially at the leaves of the reduction tree.
const REDUCTION_LEAF: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputMode {
    FullyConnected,
    /// Sliding window over consecutive input vectors, no padding.
    Conv1D {
        window: usize,
        stride: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_channels: usize,
    pub base_freq: f64,
    pub seq_len: usize,
    pub output_dim: usize,
    pub input_mode: InputMode,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("num_channels", self.num_channels),
            ("seq_len", self.seq_len),
            ("output_dim", self.output_dim),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(self.base_freq.is_finite() && self.base_freq > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "base_freq must be positive and finite, got {}",
                self.base_freq
            )));
        }
        if let InputMode::Conv1D { window, stride } = self.input_mode {
            if window == 0 || stride == 0 {
                return Err(Error::InvalidConfig(
                    "conv window and stride must be positive".into(),
                ));
            }
            if window > self.seq_len {
                return Err(Error::InvalidConfig(format!(
                    "conv window {window} exceeds seq_len {}",
                    self.seq_len
                )));
            }
        }
        Ok(())
    }

    /// Width of the vector presented to the input layer at each step.
    pub fn effective_input_dim(&self) -> usize {
        match self.input_mode {
            InputMode::FullyConnected => self.input_dim,
            InputMode::Conv1D { window, .. } => window * self.input_dim,
        }
    }

    /// Number of effective timesteps; replaces `N` in the normalizations and in `ω_i`.
    pub fn num_steps(&self) -> usize {
        match self.input_mode {
            InputMode::FullyConnected => self.seq_len,
            InputMode::Conv1D { window, stride } => (self.seq_len - window) / stride + 1,
        }
    }

    pub fn hidden_concat_dim(&self) -> usize {
        self.num_channels * self.hidden_dim
    }

    /// `m_eff·n + n + d·C·n + d`
    pub fn param_count(&self) -> usize {
        let n = self.hidden_dim;
        self.effective_input_dim() * n
            + n
            + self.output_dim * self.hidden_concat_dim()
            + self.output_dim
    }

    /// Normalization applied to channel `i`'s cosine sum: `√2/N` for DC, `1/N` for AC.
    pub fn channel_scale(&self, channel: usize) -> f64 {
        let steps = self.num_steps() as f64;
        if channel == 0 {
            SQRT_2 / steps
        } else {
            1.0 / steps
        }
    }
}

/// Angular velocities per channel; `omegas[0]` is a 0 sentinel for DC.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSpec {
    pub omegas: Vec<f64>,
}

impl ChannelSpec {
    pub fn len(&self) -> usize {
        self.omegas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    /// Phase subtracted from `φ⟨t⟩` on channel `channel` at 1-based step `t`.
    #[inline]
    pub fn offset(&self, channel: usize, t: usize) -> f64 {
        if channel == 0 {
            FRAC_PI_4
        } else {
            self.omegas[channel] * t as f64
        }
    }
}

pub fn make_channels(config: &ModelConfig) -> Result<ChannelSpec> {
    config.validate()?;
    let steps = config.num_steps() as f64;
    let omegas = (0..config.num_channels)
        .map(|i| {
            if i == 0 {
                0.0
            } else {
                2f64.powi(i as i32) * PI * config.base_freq / steps
            }
        })
        .collect();
    Ok(ChannelSpec { omegas })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    /// n × m_eff
    pub w_x: Matrix,
    pub b_x: Vec<f64>,
    /// d × (C·n), column block `i` reads channel `i`
    pub w_y: Matrix,
    pub b_y: Vec<f64>,
}

impl Params {
    pub fn zeros(config: &ModelConfig) -> Self {
        let n = config.hidden_dim;
        Params {
            w_x: Matrix::zeros(n, config.effective_input_dim()),
            b_x: vec![0.0; n],
            w_y: Matrix::zeros(config.output_dim, config.hidden_concat_dim()),
            b_y: vec![0.0; config.output_dim],
        }
    }

    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Params::zeros(config);
        let bound_x = 1.0 / (config.effective_input_dim() as f64).sqrt();
        for w in p.w_x.as_mut_slice() {
            *w = rng.random_range(-bound_x..bound_x);
        }
        let bound_y = 1.0 / (config.hidden_concat_dim() as f64).sqrt();
        for w in p.w_y.as_mut_slice() {
            *w = rng.random_range(-bound_y..bound_y);
        }
        p
    }

    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        let n = config.hidden_dim;
        let expect = [
            ("W_x", self.w_x.shape(), (n, config.effective_input_dim())),
            ("b_x", (self.b_x.len(), 1), (n, 1)),
            (
                "W_y",
                self.w_y.shape(),
                (config.output_dim, config.hidden_concat_dim()),
            ),
            ("b_y", (self.b_y.len(), 1), (config.output_dim, 1)),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(Error::InvalidInput(format!(
                    "{name} has shape {got:?}, config expects {want:?}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.w_x.is_finite()
            && self.w_y.is_finite()
            && self.b_x.iter().chain(&self.b_y).all(|v| v.is_finite())
    }

    pub fn num_scalars(&self) -> usize {
        self.w_x.as_slice().len() + self.b_x.len() + self.w_y.as_slice().len() + self.b_y.len()
    }

    /// Scalar `k` in the flat order W_x, b_x, W_y, b_y.
    pub fn scalar_mut(&mut self, mut k: usize) -> &mut f64 {
        let wx = self.w_x.as_slice().len();
        if k < wx {
            return &mut self.w_x.as_mut_slice()[k];
        }
        k -= wx;
        if k < self.b_x.len() {
            return &mut self.b_x[k];
        }
        k -= self.b_x.len();
        let wy = self.w_y.as_slice().len();
        if k < wy {
            return &mut self.w_y.as_mut_slice()[k];
        }
        &mut self.b_y[k - wy]
    }

    /// Every trainable scalar in the order W_x, b_x, W_y, b_y.
    pub fn scalars_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.w_x
            .as_mut_slice()
            .iter_mut()
            .chain(self.b_x.iter_mut())
            .chain(self.w_y.as_mut_slice().iter_mut())
            .chain(self.b_y.iter_mut())
    }

    pub fn scalars(&self) -> impl Iterator<Item = &f64> {
        self.w_x
            .as_slice()
            .iter()
            .chain(self.b_x.iter())
            .chain(self.w_y.as_slice().iter())
            .chain(self.b_y.iter())
    }
}

/// Values kept from the forward pass for the backward pass.
///
/// `θ_i⟨t⟩` is not stored; [`ForwardCache::theta`] rebuilds it from `φ⟨t⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    /// N_steps × n
    pub phis: Matrix,
    /// C × n, normalized
    pub h_final: Matrix,
    /// row-major concatenation of `h_final`
    pub h_cat: Vec<f64>,
    /// N_steps × m_eff
    pub inputs: Matrix,
}

impl ForwardCache {
    /// `θ_i⟨t⟩` for 0-based step index `step` and neuron `j`.
    #[inline]
    pub fn theta(&self, channels: &ChannelSpec, channel: usize, step: usize, j: usize) -> f64 {
        self.phis.get(step, j) - channels.offset(channel, step + 1)
    }
}

pub fn effective_inputs(sequence: &Matrix, config: &ModelConfig) -> Result<Matrix> {
    if sequence.cols() != config.input_dim {
        return Err(Error::InvalidInput(format!(
            "sequence has {} features, config expects {}",
            sequence.cols(),
            config.input_dim
        )));
    }
    match config.input_mode {
        InputMode::FullyConnected => Ok(sequence.clone()),
        InputMode::Conv1D { window, stride } => {
            if window == 0 || stride == 0 {
                return Err(Error::InvalidInput(
                    "conv window and stride must be positive".into(),
                ));
            }
            let n = sequence.rows();
            if n < window {
                return Err(Error::InvalidInput(format!(
                    "sequence of length {n} is shorter than conv window {window}"
                )));
            }
            let m = sequence.cols();
            let steps = (n - window) / stride + 1;
            let flat = sequence.as_slice();
            let mut data = Vec::with_capacity(steps * window * m);
            for s in 0..steps {
                let start = s * stride * m;
                data.extend_from_slice(&flat[start..start + window * m]);
            }
            Matrix::from_vec(steps, window * m, data)
        }
    }
}

pub fn input_phase(params: &Params, x_eff: &[f64]) -> Result<Vec<f64>> {
    if x_eff.len() != params.w_x.cols() || params.b_x.len() != params.w_x.rows() {
        return Err(Error::InvalidInput(format!(
            "input of width {} against W_x {:?} and b_x of length {}",
            x_eff.len(),
            params.w_x.shape(),
            params.b_x.len()
        )));
    }
    let mut out = vec![0.0; params.w_x.rows()];
    params.w_x.matvec_add(x_eff, &params.b_x, &mut out);
    Ok(out)
}

/// Per-step reduction strategy. Both variants walk the same pairwise tree, so they
/// produce bit-identical sums.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    Sequential,
    Parallel,
}

fn check_sequence(sequence: &Matrix, config: &ModelConfig) -> Result<()> {
    if sequence.rows() != config.seq_len {
        return Err(Error::InvalidInput(format!(
            "sequence has {} steps, config expects {}",
            sequence.rows(),
            config.seq_len
        )));
    }
    Ok(())
}

fn compute_phases(params: &Params, inputs: &Matrix) -> Result<Matrix> {
    let n = params.w_x.rows();
    let mut phis = Matrix::zeros(inputs.rows(), n);
    for s in 0..inputs.rows() {
        params
            .w_x
            .matvec_add(inputs.row(s), &params.b_x, phis.row_mut(s));
        if phis.row(s).iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric(
                format!("timestep {}", s + 1),
                "non-finite input phase",
            ));
        }
    }
    Ok(phis)
}

fn check_forward_args(params: &Params, channels: &ChannelSpec, config: &ModelConfig) -> Result<()> {
    config.validate()?;
    params.check_shapes(config)?;
    if channels.len() != config.num_channels {
        return Err(Error::InvalidInput(format!(
            "channel spec has {} channels, config expects {}",
            channels.len(),
            config.num_channels
        )));
    }
    Ok(())
}

/// Raw (unnormalized) cosine sums over steps `[lo, hi)`, laid out C × n.
fn cosine_sums(
    phis: &Matrix,
    channels: &ChannelSpec,
    lo: usize,
    hi: usize,
    reduction: Reduction,
) -> Vec<f64> {
    if hi - lo <= REDUCTION_LEAF {
        let n = phis.cols();
        let mut acc = vec![0.0; channels.len() * n];
        for s in lo..hi {
            let phi = phis.row(s);
            for (c, block) in acc.chunks_exact_mut(n).enumerate() {
                let off = channels.offset(c, s + 1);
                for (h, p) in block.iter_mut().zip(phi) {
                    *h += (p - off).cos();
                }
            }
        }
        return acc;
    }
    let mid = lo + (hi - lo) / 2;
    let (mut left, right) = match reduction {
        Reduction::Sequential => (
            cosine_sums(phis, channels, lo, mid, reduction),
            cosine_sums(phis, channels, mid, hi, reduction),
        ),
        Reduction::Parallel => rayon::join(
            || cosine_sums(phis, channels, lo, mid, reduction),
            || cosine_sums(phis, channels, mid, hi, reduction),
        ),
    };
    for (l, r) in left.iter_mut().zip(&right) {
        *l += r;
    }
    left
}

pub fn forward(
    params: &Params,
    channels: &ChannelSpec,
    sequence: &Matrix,
    config: &ModelConfig,
) -> Result<(Vec<f64>, ForwardCache)> {
    forward_with(params, channels, sequence, config, Reduction::Sequential)
}

pub fn forward_with(
    params: &Params,
    channels: &ChannelSpec,
    sequence: &Matrix,
    config: &ModelConfig,
    reduction: Reduction,
) -> Result<(Vec<f64>, ForwardCache)> {
    check_forward_args(params, channels, config)?;
    check_sequence(sequence, config)?;
    let inputs = effective_inputs(sequence, config)?;
    let phis = compute_phases(params, &inputs)?;

    let n = config.hidden_dim;
    let mut h_cat = cosine_sums(&phis, channels, 0, phis.rows(), reduction);
    for (c, block) in h_cat.chunks_exact_mut(n).enumerate() {
        let scale = config.channel_scale(c);
        block.iter_mut().for_each(|h| *h *= scale);
    }
    let h_final = Matrix::from_vec(config.num_channels, n, h_cat.clone())?;

    let logits = readout(params, &h_cat);
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::numeric("readout", "non-finite logits"));
    }
    Ok((
        logits,
        ForwardCache {
            phis,
            h_final,
            h_cat,
            inputs,
        },
    ))
}

pub fn readout(params: &Params, h_cat: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; params.w_y.rows()];
    params.w_y.matvec_add(h_cat, &params.b_y, &mut y);
    y
}

/// Hidden states through the explicit sine/cosine projections. Equivalence oracle
/// for [`forward`]; never used for training.
pub fn forward_dft_form(
    params: &Params,
    channels: &ChannelSpec,
    sequence: &Matrix,
    config: &ModelConfig,
) -> Result<Matrix> {
    check_forward_args(params, channels, config)?;
    check_sequence(sequence, config)?;
    let inputs = effective_inputs(sequence, config)?;
    let phis = compute_phases(params, &inputs)?;
    let n = config.hidden_dim;
    let steps = phis.rows();
    let mut h = Matrix::zeros(config.num_channels, n);
    for s in 0..steps {
        let t = (s + 1) as f64;
        for j in 0..n {
            let (sp, cp) = phis.get(s, j).sin_cos();
            let dc = h.get(0, j) + sp + cp;
            h.set(0, j, dc);
            for c in 1..config.num_channels {
                let (sw, cw) = (channels.omegas[c] * t).sin_cos();
                let v = h.get(c, j) + sp * sw + cp * cw;
                h.set(c, j, v);
            }
        }
    }
    let inv = 1.0 / steps as f64;
    h.as_mut_slice().iter_mut().for_each(|v| *v *= inv);
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    ReLU,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::ReLU => x.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }
}

/// Transform of a conventional activation onto the same channel frequencies:
/// `h_i = (√2/N) Σ_t f(φ⟨t⟩) cos(ω_i t − π/4)`. Cost baseline only.
pub fn baseline_dft_activation(
    activation: Activation,
    params: &Params,
    channels: &ChannelSpec,
    sequence: &Matrix,
    config: &ModelConfig,
) -> Result<Matrix> {
    baseline_impl(activation, params, channels, sequence, config, |a, w| {
        a * (w - FRAC_PI_4).cos()
    })
    .map(|mut h| {
        h.as_mut_slice().iter_mut().for_each(|v| *v *= SQRT_2);
        h
    })
}

/// Same transform in split form: `(1/N) Σ_t f(φ⟨t⟩) [sin(ω_i t) + cos(ω_i t)]`.
pub fn baseline_dft_activation_split(
    activation: Activation,
    params: &Params,
    channels: &ChannelSpec,
    sequence: &Matrix,
    config: &ModelConfig,
) -> Result<Matrix> {
    baseline_impl(activation, params, channels, sequence, config, |a, w| {
        let (s, c) = w.sin_cos();
        a * s + a * c
    })
}

fn baseline_impl(
    activation: Activation,
    params: &Params,
    channels: &ChannelSpec,
    sequence: &Matrix,
    config: &ModelConfig,
    term: impl Fn(f64, f64) -> f64,
) -> Result<Matrix> {
    check_forward_args(params, channels, config)?;
    check_sequence(sequence, config)?;
    let inputs = effective_inputs(sequence, config)?;
    let phis = compute_phases(params, &inputs)?;
    let n = config.hidden_dim;
    let mut h = Matrix::zeros(config.num_channels, n);
    for s in 0..phis.rows() {
        let t = (s + 1) as f64;
        for j in 0..n {
            let a = activation.apply(phis.get(s, j));
            for c in 0..config.num_channels {
                let v = h.get(c, j) + term(a, channels.omegas[c] * t);
                h.set(c, j, v);
            }
        }
    }
    let inv = 1.0 / phis.rows() as f64;
    h.as_mut_slice().iter_mut().for_each(|v| *v *= inv);
    Ok(h)
}

/// Configuration, channel frequencies, and trainable parameters bundled together.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub channels: ChannelSpec,
    pub params: Params,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        let channels = make_channels(&config)?;
        let params = Params::init(&config, seed);
        Ok(Model {
            config,
            channels,
            params,
        })
    }

    pub fn from_params(config: ModelConfig, params: Params) -> Result<Self> {
        let channels = make_channels(&config)?;
        params.check_shapes(&config)?;
        Ok(Model {
            config,
            channels,
            params,
        })
    }

    pub fn forward(&self, sequence: &Matrix) -> Result<(Vec<f64>, ForwardCache)> {
        forward(&self.params, &self.channels, sequence, &self.config)
    }

    pub fn logits(&self, sequence: &Matrix) -> Result<Vec<f64>> {
        self.forward(sequence).map(|(y, _)| y)
    }
}
