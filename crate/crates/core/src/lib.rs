//! Oscillatory Fourier neural networks: time-varying cosine recurrent units whose
//! hidden state is a running, multiplication-free Fourier projection of the input,
//! trained without back-propagation through time.

pub mod bench;
pub mod cli;
pub mod data;
pub mod error;
pub mod model;
pub mod tensor;
pub mod training;

pub use error::{DataError, Error, Result};
pub use model::{InputMode, Model, ModelConfig, Params};
pub use tensor::Matrix;
