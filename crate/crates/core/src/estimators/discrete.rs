use super::samples::{MarginalSamples, PointSet};
use crate::distributions::SimRng;
use crate::error::{Error, Result};
use std::fmt;

/// A subset of the blocks `{0, ..., K-1}`, as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BlockSet(pub u64);

impl BlockSet {
    pub const EMPTY: BlockSet = BlockSet(0);

    pub fn full(k: usize) -> Self {
        assert!(k <= 64, "at most 64 blocks");
        if k == 64 {
            BlockSet(u64::MAX)
        } else {
            BlockSet((1u64 << k) - 1)
        }
    }

    pub fn from_blocks(blocks: &[usize]) -> Self {
        BlockSet(blocks.iter().fold(0, |m, &b| m | (1u64 << b)))
    }

    pub fn contains(self, b: usize) -> bool {
        self.0 >> b & 1 == 1
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: BlockSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn without(self, b: usize) -> Self {
        BlockSet(self.0 & !(1u64 << b))
    }

    pub fn with(self, b: usize) -> Self {
        BlockSet(self.0 | (1u64 << b))
    }

    pub fn blocks(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&b| self.contains(b))
    }

    /// All subsets of `self`, including the empty set and `self`.
    pub fn subsets(self) -> impl Iterator<Item = BlockSet> {
        let full = self.0;
        let mut next = Some(0u64);
        std::iter::from_fn(move || {
            let cur = next?;
            next = if cur == full { None } else { Some((cur.wrapping_sub(full)) & full) };
            Some(BlockSet(cur))
        })
    }
}

impl fmt::Debug for BlockSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.blocks()).finish()
    }
}

/// Finite support with strictly positive probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBlock {
    points: PointSet,
    probs: Vec<f64>,
}

impl DiscreteBlock {
    pub fn new(points: PointSet, probs: Vec<f64>) -> Result<Self> {
        if points.len() != probs.len() || points.is_empty() {
            return Err(Error::InvalidParameters(format!(
                "{} support points for {} probabilities",
                points.len(),
                probs.len()
            )));
        }
        if let Some(i) = probs.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidParameters(format!(
                "support point {i} has probability {}; probabilities must be positive",
                probs[i]
            )));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameters(format!("probabilities sum to {total}")));
        }
        Ok(DiscreteBlock { points, probs })
    }

    pub fn scalar(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        Self::new(PointSet::scalars(values), probs)
    }

    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        let p = 1.0 / values.len().max(1) as f64;
        let n = values.len();
        Self::scalar(values, vec![p; n])
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        self.points.get(i)
    }

    pub fn points(&self) -> &PointSet {
        &self.points
    }

    pub fn prob(&self, i: usize) -> f64 {
        self.probs[i]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample_index(&self, rng: &mut SimRng) -> usize {
        let u = rng.uniform_open();
        let mut acc = 0.0;
        for (i, p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }
}

/// Product of independent finite-support distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProductTarget {
    blocks: Vec<DiscreteBlock>,
}

impl DiscreteProductTarget {
    pub fn new(blocks: Vec<DiscreteBlock>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidArgument("at least one block is required".into()));
        }
        Ok(DiscreteProductTarget { blocks })
    }

    /// `K` copies of the same block.
    pub fn iid(block: DiscreteBlock, k: usize) -> Result<Self> {
        Self::new(vec![block; k])
    }

    pub fn k(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, k: usize) -> &DiscreteBlock {
        &self.blocks[k]
    }

    pub fn blocks(&self) -> &[DiscreteBlock] {
        &self.blocks
    }

    pub fn support_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(DiscreteBlock::len).collect()
    }

    /// Independent samples, `n_per_block[k]` from block `k`, each block on
    /// its own child stream of `rng`.
    pub fn sample(&self, rng: &SimRng, n_per_block: &[usize]) -> Result<MarginalSamples> {
        if n_per_block.len() != self.k() {
            return Err(Error::InvalidArgument("one sample size per block is required".into()));
        }
        let mut blocks = Vec::with_capacity(self.k());
        for (k, (b, &n)) in self.blocks.iter().zip(n_per_block).enumerate() {
            let mut r = rng.split(k as u64);
            let width = b.points.width();
            let mut data = Vec::with_capacity(n * width);
            for _ in 0..n {
                data.extend_from_slice(b.point(b.sample_index(&mut r)));
            }
            blocks.push(PointSet::new(width, data)?);
        }
        MarginalSamples::new(blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subsets_enumerates_all() {
        let s = BlockSet::from_blocks(&[0, 2, 3]);
        let subs: Vec<BlockSet> = s.subsets().collect();
        assert_eq!(subs.len(), 8);
        assert!(subs.iter().all(|b| b.is_subset_of(s)));
        assert_eq!(BlockSet::EMPTY.subsets().count(), 1);
    }

    #[test]
    fn zero_probability_rejected() {
        assert!(DiscreteBlock::scalar(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(DiscreteBlock::scalar(vec![0.0, 1.0], vec![0.5, 0.5 + 1e-9]).is_err());
        assert!(DiscreteBlock::scalar(vec![0.0, 1.0], vec![0.25, 0.75]).is_ok());
    }
}
