//! Parameter blob: a versioned little-endian dump of all model weights.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "OFNN"
//! 4       4     version (u32) = 1
//! 8       4     n      hidden units (u32)
//! 12      4     m_eff  input width after convolution unfolding (u32)
//! 16      4     C      channels (u32)
//! 20      4     d      outputs (u32)
//! 24      ...   f64 values: W_x (n·m_eff, row-major), b_x (n),
//!               W_y (d·C·n, row-major), b_y (d)
//! ```

use crate::error::{DataError, Error, Result};
use crate::model::{ModelConfig, Params};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"OFNN";
pub const VERSION: u32 = 1;
const HEADER: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlobShape {
    pub hidden_dim: usize,
    pub input_width: usize,
    pub num_channels: usize,
    pub output_dim: usize,
}

impl BlobShape {
    pub fn of(config: &ModelConfig) -> Self {
        BlobShape {
            hidden_dim: config.hidden_dim,
            input_width: config.effective_input_dim(),
            num_channels: config.num_channels,
            output_dim: config.output_dim,
        }
    }

    fn scalars(&self) -> Option<usize> {
        let (n, m, c, d) = (
            self.hidden_dim,
            self.input_width,
            self.num_channels,
            self.output_dim,
        );
        let wx = n.checked_mul(m)?;
        let wy = d.checked_mul(c)?.checked_mul(n)?;
        wx.checked_add(n)?.checked_add(wy)?.checked_add(d)
    }
}

pub fn encode_params(params: &Params, num_channels: usize) -> Vec<u8> {
    let n = params.b_x.len();
    let shape = [n, params.w_x.cols(), num_channels, params.b_y.len()];
    let mut out = Vec::with_capacity(HEADER + 8 * params.num_scalars());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for v in shape {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in params.scalars() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> std::result::Result<u32, DataError> {
    let chunk = bytes.get(at..at + 4).ok_or(DataError::Truncated {
        needed: at + 4,
        available: bytes.len(),
    })?;
    Ok(u32::from_le_bytes(chunk.try_into().unwrap()))
}

pub fn decode_params(bytes: &[u8]) -> std::result::Result<(BlobShape, Params), DataError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        let mut found = [0u8; 4];
        let k = bytes.len().min(4);
        found[..k].copy_from_slice(&bytes[..k]);
        return Err(DataError::BadMagic {
            expected: u32::from_be_bytes(*MAGIC),
            found: u32::from_be_bytes(found),
        });
    }
    let version = u32_at(bytes, 4)?;
    if version != VERSION {
        return Err(DataError::Malformed {
            line: 0,
            detail: format!("unsupported blob version {version}"),
        });
    }
    let shape = BlobShape {
        hidden_dim: u32_at(bytes, 8)? as usize,
        input_width: u32_at(bytes, 12)? as usize,
        num_channels: u32_at(bytes, 16)? as usize,
        output_dim: u32_at(bytes, 20)? as usize,
    };
    let count = shape.scalars().ok_or(DataError::Malformed {
        line: 0,
        detail: "declared shape overflows".into(),
    })?;
    let needed = count
        .checked_mul(8)
        .and_then(|b| b.checked_add(HEADER))
        .ok_or(DataError::Malformed {
            line: 0,
            detail: "declared shape overflows".into(),
        })?;
    if bytes.len() != needed {
        return Err(DataError::Truncated {
            needed,
            available: bytes.len(),
        });
    }
    let mut values = bytes[HEADER..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let mut take = |k: usize| -> Vec<f64> { values.by_ref().take(k).collect() };
    let (n, m, c, d) = (
        shape.hidden_dim,
        shape.input_width,
        shape.num_channels,
        shape.output_dim,
    );
    let w_x = Matrix::from_vec(n, m, take(n * m)).expect("length checked");
    let b_x = take(n);
    let w_y = Matrix::from_vec(d, c * n, take(d * c * n)).expect("length checked");
    let b_y = take(d);
    Ok((shape, Params { w_x, b_x, w_y, b_y }))
}

/// Decodes a blob and checks it against the model it is meant for.
pub fn params_for(bytes: &[u8], config: &ModelConfig) -> Result<Params> {
    let (shape, params) = decode_params(bytes)?;
    let want = BlobShape::of(config);
    if shape != want {
        return Err(Error::InvalidConfig(format!(
            "parameter blob has shape {shape:?}, config expects {want:?}"
        )));
    }
    Ok(params)
}
