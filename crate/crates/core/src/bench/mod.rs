//! Operation counts and timing for the forward pass.

mod counts;
mod timing;

pub use counts::{
    count_baseline_ops, count_forward_ops, hidden, instrumented_baseline, instrumented_forward,
    OpCount, Phase, PhaseCounts, Tally,
};
pub use timing::{time_forward, TimingReport};

/// `baseline / ofnn` multiply ratio in the accumulation phase, or `None` when the
/// O-FNN side performs no multiplies at all.
pub fn hidden_multiply_ratio(ofnn: &PhaseCounts, baseline: &PhaseCounts) -> Option<f64> {
    let o = hidden(ofnn).multiplies;
    (o != 0).then(|| hidden(baseline).multiplies as f64 / o as f64)
}
