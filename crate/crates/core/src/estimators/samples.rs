use crate::error::{Error, Result};
use std::sync::Arc;

/// A sequence of fixed-width real vectors stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    width: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(width: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 {
            return Err(Error::InvalidArgument("point width must be at least 1".into()));
        }
        if !data.len().is_multiple_of(width) {
            return Err(Error::InvalidArgument(format!(
                "{} values cannot be split into points of width {width}",
                data.len()
            )));
        }
        Ok(PointSet { width, data })
    }

    /// One-dimensional points.
    pub fn scalars(values: Vec<f64>) -> Self {
        PointSet { width: 1, data: values }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let width = rows.first().map(|r| r.len()).unwrap_or(1);
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::InvalidArgument("rows have different widths".into()));
        }
        Self::new(width, rows.concat())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.width
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> &[f64] {
        &self.data[i * self.width..(i + 1) * self.width]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.width)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Independent per-block samples `X_k^1, ..., X_k^{N_k}` for `k = 1..K`.
///
/// Cloning is cheap; the blocks are shared and never mutated.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalSamples {
    blocks: Arc<Vec<PointSet>>,
}

impl MarginalSamples {
    pub fn new(blocks: Vec<PointSet>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("at least one block is required".into()));
        }
        if let Some(k) = blocks.iter().position(|b| b.is_empty()) {
            return Err(Error::InvalidArgument(format!("block {k} has no samples")));
        }
        Ok(MarginalSamples { blocks: Arc::new(blocks) })
    }

    /// Scalar blocks given as one vector per block.
    pub fn from_scalars(blocks: Vec<Vec<f64>>) -> Result<Self> {
        Self::new(blocks.into_iter().map(PointSet::scalars).collect())
    }

    /// Number of blocks `K`.
    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn n(&self, k: usize) -> usize {
        self.blocks[k].len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(PointSet::len).collect()
    }

    pub fn block(&self, k: usize) -> &PointSet {
        &self.blocks[k]
    }

    pub fn blocks(&self) -> &[PointSet] {
        &self.blocks
    }

    #[inline]
    pub fn point(&self, k: usize, n: usize) -> &[f64] {
        self.blocks[k].get(n)
    }

    /// Common sample count when all blocks have the same length.
    pub fn aligned_len(&self) -> Option<usize> {
        let n = self.n(0);
        self.blocks.iter().all(|b| b.len() == n).then_some(n)
    }
}
