//! Exact arithmetic counts for one forward pass, by phase.
//!
//! Two routes produce the same numbers: closed-form formulas and an instrumented
//! execution that routes every operation of a real forward pass through a [`Tally`].
//!
//! Counting conventions:
//! * a matrix-vector product with bias costs `rows·cols` multiplies and `rows·cols` adds;
//! * one time-varying cosine `cos(φ − offset)` is a single trig evaluation, with the
//!   per-step rotation offsets read from a table built once per configuration;
//! * the baseline's basis values `cos(ω_i t − π/4)` come from the same kind of table,
//!   and its activation `f(φ)` is evaluated outside the counted arithmetic;
//! * the `√2/N` and `1/N` normalizations happen once after accumulation and are
//!   counted under [`Phase::Readout`].

use std::f64::consts::{FRAC_PI_4, SQRT_2};

use crate::error::Result;
use crate::model::{effective_inputs, make_channels, Activation, ModelConfig, Params};
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    InputLayer,
    HiddenAccumulation,
    Readout,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::InputLayer, Phase::HiddenAccumulation, Phase::Readout];

    pub fn name(self) -> &'static str {
        match self {
            Phase::InputLayer => "input_layer",
            Phase::HiddenAccumulation => "hidden_accumulation",
            Phase::Readout => "readout",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpCount {
    pub phase: Phase,
    pub multiplies: u64,
    pub adds: u64,
    pub trig_evals: u64,
}

impl OpCount {
    fn new(phase: Phase, multiplies: u64, adds: u64, trig_evals: u64) -> Self {
        OpCount {
            phase,
            multiplies,
            adds,
            trig_evals,
        }
    }
}

/// Counts per phase, in [`Phase::ALL`] order.
pub type PhaseCounts = [OpCount; 3];

pub fn hidden(counts: &PhaseCounts) -> OpCount {
    counts[1]
}

/// Counting arithmetic. Every call performs the operation and bumps the counter of
/// the active phase.
#[derive(Debug)]
pub struct Tally {
    phase: usize,
    counts: PhaseCounts,
}

impl Default for Tally {
    fn default() -> Self {
        Tally {
            phase: 0,
            counts: Phase::ALL.map(|p| OpCount::new(p, 0, 0, 0)),
        }
    }
}

impl Tally {
    pub fn enter(&mut self, phase: Phase) {
        self.phase = Phase::ALL.iter().position(|&p| p == phase).unwrap();
    }

    #[inline]
    pub fn mul(&mut self, a: f64, b: f64) -> f64 {
        self.counts[self.phase].multiplies += 1;
        a * b
    }

    #[inline]
    pub fn add(&mut self, a: f64, b: f64) -> f64 {
        self.counts[self.phase].adds += 1;
        a + b
    }

    /// Time-varying cosine unit `cos(phi − offset)`.
    #[inline]
    pub fn tv_cos(&mut self, phi: f64, offset: f64) -> f64 {
        self.counts[self.phase].trig_evals += 1;
        (phi - offset).cos()
    }

    pub fn counts(&self) -> PhaseCounts {
        self.counts
    }

    fn matvec_add(&mut self, w: &Matrix, x: &[f64], bias: &[f64]) -> Vec<f64> {
        (0..w.rows())
            .map(|r| {
                let row = w.row(r);
                let mut acc = self.mul(row[0], x[0]);
                for k in 1..row.len() {
                    let p = self.mul(row[k], x[k]);
                    acc = self.add(acc, p);
                }
                self.add(acc, bias[r])
            })
            .collect()
    }
}

fn u(v: usize) -> u64 {
    v as u64
}

fn input_and_readout(config: &ModelConfig) -> (OpCount, OpCount) {
    let (n, c, d) = (
        u(config.hidden_dim),
        u(config.num_channels),
        u(config.output_dim),
    );
    let per_input = n * u(config.effective_input_dim()) * u(config.num_steps());
    (
        OpCount::new(Phase::InputLayer, per_input, per_input, 0),
        OpCount::new(Phase::Readout, c * n + d * c * n, d * c * n, 0),
    )
}

/// Closed-form counts for the time-varying cosine model.
pub fn count_forward_ops(config: &ModelConfig) -> Result<PhaseCounts> {
    config.validate()?;
    let (input, readout) = input_and_readout(config);
    let cells = u(config.num_channels) * u(config.hidden_dim) * u(config.num_steps());
    Ok([
        input,
        OpCount::new(Phase::HiddenAccumulation, 0, cells, cells),
        readout,
    ])
}

/// Closed-form counts for the transform of a conventional activation.
pub fn count_baseline_ops(config: &ModelConfig) -> Result<PhaseCounts> {
    config.validate()?;
    let (input, readout) = input_and_readout(config);
    let cells = u(config.num_channels) * u(config.hidden_dim) * u(config.num_steps());
    Ok([
        input,
        OpCount::new(Phase::HiddenAccumulation, cells, cells, 0),
        readout,
    ])
}

fn probe_inputs(config: &ModelConfig) -> Result<(Params, Matrix)> {
    let params = Params::init(config, 1);
    let seq = Matrix::from_fn(config.seq_len, config.input_dim, |r, c| {
        ((r * 31 + c * 7) % 17) as f64 / 17.0
    });
    Ok((params, seq))
}

fn readout_counted(
    tally: &mut Tally,
    config: &ModelConfig,
    params: &Params,
    sums: &mut [f64],
    dc_scale: f64,
    ac_scale: f64,
) -> Vec<f64> {
    tally.enter(Phase::Readout);
    let n = config.hidden_dim;
    for (i, v) in sums.iter_mut().enumerate() {
        let s = if i < n { dc_scale } else { ac_scale };
        *v = tally.mul(*v, s);
    }
    tally.matvec_add(&params.w_y, sums, &params.b_y)
}

/// Runs the model's forward pass through a [`Tally`]. Returns the counts and the
/// normalized hidden states (C × n) the counted run produced.
pub fn instrumented_forward(config: &ModelConfig) -> Result<(PhaseCounts, Matrix)> {
    let channels = make_channels(config)?;
    let (params, seq) = probe_inputs(config)?;
    let inputs = effective_inputs(&seq, config)?;
    let steps = inputs.rows();
    let (n, c) = (config.hidden_dim, config.num_channels);
    let offsets: Vec<Vec<f64>> = (0..c)
        .map(|i| (1..=steps).map(|t| channels.offset(i, t)).collect())
        .collect();

    let mut tally = Tally::default();
    let mut sums = vec![0.0; c * n];
    for s in 0..steps {
        tally.enter(Phase::InputLayer);
        let phi = tally.matvec_add(&params.w_x, inputs.row(s), &params.b_x);
        tally.enter(Phase::HiddenAccumulation);
        for i in 0..c {
            for j in 0..n {
                let v = tally.tv_cos(phi[j], offsets[i][s]);
                sums[i * n + j] = tally.add(sums[i * n + j], v);
            }
        }
    }
    let steps_f = steps as f64;
    let mut hidden = sums.clone();
    let _ = readout_counted(
        &mut tally,
        config,
        &params,
        &mut hidden,
        SQRT_2 / steps_f,
        1.0 / steps_f,
    );
    Ok((tally.counts(), Matrix::from_vec(c, n, hidden)?))
}

/// Counted execution of the activation-transform baseline.
pub fn instrumented_baseline(
    config: &ModelConfig,
    activation: Activation,
) -> Result<(PhaseCounts, Matrix)> {
    let channels = make_channels(config)?;
    let (params, seq) = probe_inputs(config)?;
    let inputs = effective_inputs(&seq, config)?;
    let steps = inputs.rows();
    let (n, c) = (config.hidden_dim, config.num_channels);
    let basis: Vec<Vec<f64>> = (0..c)
        .map(|i| {
            (1..=steps)
                .map(|t| (channels.omegas[i] * t as f64 - FRAC_PI_4).cos())
                .collect()
        })
        .collect();

    let mut tally = Tally::default();
    let mut sums = vec![0.0; c * n];
    for s in 0..steps {
        tally.enter(Phase::InputLayer);
        let phi = tally.matvec_add(&params.w_x, inputs.row(s), &params.b_x);
        let act: Vec<f64> = phi.iter().map(|&p| activation.apply(p)).collect();
        tally.enter(Phase::HiddenAccumulation);
        for i in 0..c {
            for j in 0..n {
                let v = tally.mul(act[j], basis[i][s]);
                sums[i * n + j] = tally.add(sums[i * n + j], v);
            }
        }
    }
    let scale = SQRT_2 / steps as f64;
    let mut hidden = sums.clone();
    let _ = readout_counted(&mut tally, config, &params, &mut hidden, scale, scale);
    Ok((tally.counts(), Matrix::from_vec(c, n, hidden)?))
}
