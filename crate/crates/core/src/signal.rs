//! Time-domain sequences: sampled signals and impulse-response coefficients.

use nalgebra::{DMatrix, DVector, DVectorView};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Multichannel sampled signal. Column `k` holds the sample at time step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSequence<T: Real> {
    data: DMatrix<T>,
    ts: T,
}

impl<T: Real> SignalSequence<T> {
    /// `data` is channels × time steps.
    pub fn new(data: DMatrix<T>, ts: T) -> Result<Self> {
        if data.ncols() == 0 {
            return Err(Error::Dimension("signal must contain at least one sample".into()));
        }
        if data.nrows() == 0 {
            return Err(Error::Dimension("signal must contain at least one channel".into()));
        }
        Ok(Self { data, ts })
    }

    /// Builds a signal from one vector per time step.
    pub fn from_samples(samples: &[Vec<T>], ts: T) -> Result<Self> {
        let k = samples.len();
        let ch = samples.first().map(Vec::len).unwrap_or(0);
        if let Some((i, s)) = samples.iter().enumerate().find(|(_, s)| s.len() != ch) {
            return Err(Error::Dimension(format!(
                "sample {i} has {} channels, expected {ch}",
                s.len()
            )));
        }
        Self::new(DMatrix::from_fn(ch, k, |c, t| samples[t][c]), ts)
    }

    /// Single-channel signal.
    pub fn from_scalar(values: &[T], ts: T) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(1, values.len(), values), ts)
    }

    /// All-zero signal.
    pub fn zeros(channels: usize, len: usize, ts: T) -> Result<Self> {
        Self::new(DMatrix::zeros(channels, len), ts)
    }

    /// Unit impulse on `channel` at k = 0.
    pub fn impulse(channels: usize, channel: usize, len: usize, ts: T) -> Result<Self> {
        let mut s = Self::zeros(channels, len, ts)?;
        if channel >= channels {
            return Err(Error::OutOfRange(format!("channel {channel} of {channels}")));
        }
        s.data[(channel, 0)] = T::one();
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn channels(&self) -> usize {
        self.data.nrows()
    }

    pub fn ts(&self) -> T {
        self.ts
    }

    pub fn data(&self) -> &DMatrix<T> {
        &self.data
    }

    pub fn sample(&self, k: usize) -> DVectorView<'_, T> {
        self.data.column(k)
    }

    /// Values of one channel over time.
    pub fn channel(&self, c: usize) -> DVector<T> {
        self.data.row(c).transpose()
    }

    pub fn into_data(self) -> DMatrix<T> {
        self.data
    }
}

/// Impulse-response coefficients h_0 .. h_{N-1}, each an n_y × n_u block.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovSequence<T: Real> {
    blocks: Vec<DMatrix<T>>,
    ts: T,
}

impl<T: Real> MarkovSequence<T> {
    pub fn new(blocks: Vec<DMatrix<T>>, ts: T) -> Result<Self> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::Dimension("Markov sequence needs at least one block".into()))?;
        let shape = first.shape();
        if shape.0 == 0 || shape.1 == 0 {
            return Err(Error::Dimension("Markov blocks must be non-empty".into()));
        }
        if let Some(k) = blocks.iter().position(|b| b.shape() != shape) {
            return Err(Error::Dimension(format!(
                "block {k} has shape {:?}, expected {shape:?}",
                blocks[k].shape()
            )));
        }
        Ok(Self { blocks, ts })
    }

    /// SISO sequence from scalar coefficients.
    pub fn from_scalar(values: &[T], ts: T) -> Result<Self> {
        Self::new(
            values.iter().map(|&v| DMatrix::from_element(1, 1, v)).collect(),
            ts,
        )
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn ny(&self) -> usize {
        self.blocks[0].nrows()
    }

    pub fn nu(&self) -> usize {
        self.blocks[0].ncols()
    }

    pub fn ts(&self) -> T {
        self.ts
    }

    pub fn blocks(&self) -> &[DMatrix<T>] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &DMatrix<T> {
        &self.blocks[k]
    }

    /// First `n` blocks.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::OutOfRange(format!(
                "cannot truncate {} blocks to {n}",
                self.len()
            )));
        }
        Self::new(self.blocks[..n].to_vec(), self.ts)
    }

    /// Scalar coefficients of a SISO sequence; entry (0, 0) of each block otherwise.
    pub fn scalar_values(&self) -> Vec<T> {
        self.blocks.iter().map(|b| b[(0, 0)]).collect()
    }

    /// Sum of squared entries over every block.
    pub fn energy(&self) -> T {
        self.blocks
            .iter()
            .fold(T::zero(), |acc, b| acc + b.norm_squared())
    }
}
