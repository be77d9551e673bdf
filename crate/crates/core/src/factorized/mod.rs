//! Fast evaluation of product-form averages for structured test functions.
//!
//! A sum-of-products function `sum_j c_j prod_k f_jk(x_k)` only needs the
//! per-block averages of each factor, so its product-form estimate costs
//! `J * sum_k N_k` factor evaluations instead of `J * prod_k N_k`. Functions
//! that are products of factors over overlapping scopes are handled by
//! variable elimination over sample-indexed tables.

mod elimination;
pub mod taylor;

pub use elimination::{
    eliminate_to_table, eval_eliminated, eval_eliminated_with, plan_elimination, EliminationPlan, Heuristic, Table,
    DEFAULT_TABLE_CAP,
};

use crate::error::{Error, Result};
use crate::estimators::{Estimate, EvalKind, MarginalSamples};
use crate::numeric::CompensatedSum;
use std::fmt;
use std::sync::Arc;

/// Evaluator over one block's point.
pub type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Evaluator over several block points at once.
pub type JointFn = Arc<dyn Fn(&[&[f64]]) -> f64 + Send + Sync>;

/// One entry `f_jk` of a sum-of-products grid.
#[derive(Clone)]
pub enum Factor {
    One,
    /// `x -> x[0]`
    Identity,
    /// `x -> x[0]^p`
    Power(u32),
    Custom(PointFn),
}

impl Factor {
    pub fn custom(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Factor::Custom(Arc::new(f))
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Factor::One => 1.0,
            Factor::Identity => x[0],
            Factor::Power(p) => x[0].powi(*p as i32),
            Factor::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::One => write!(f, "One"),
            Factor::Identity => write!(f, "Identity"),
            Factor::Power(p) => write!(f, "Power({p})"),
            Factor::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// `phi(x) = sum_j c_j prod_k f_jk(x_k)`.
#[derive(Debug, Clone)]
pub struct SopFunction {
    k: usize,
    coeffs: Vec<f64>,
    factors: Vec<Vec<Factor>>,
}

impl SopFunction {
    /// `factors[j][k]` is the factor of term `j` on block `k`.
    pub fn new(factors: Vec<Vec<Factor>>, coeffs: Vec<f64>) -> Result<Self> {
        let k = factors.first().map(Vec::len).unwrap_or(0);
        if k == 0 {
            return Err(Error::InvalidArgument("a sum of products needs at least one term and one block".into()));
        }
        if factors.iter().any(|row| row.len() != k) {
            return Err(Error::InvalidArgument("factor grid is not rectangular".into()));
        }
        if coeffs.len() != factors.len() {
            return Err(Error::InvalidArgument(format!("{} coefficients for {} terms", coeffs.len(), factors.len())));
        }
        if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite coefficient {c}")));
        }
        Ok(SopFunction { k, coeffs, factors })
    }

    pub fn with_unit_coeffs(factors: Vec<Vec<Factor>>) -> Result<Self> {
        let j = factors.len();
        Self::new(factors, vec![1.0; j])
    }

    /// `prod_k x_k` over `k` scalar blocks.
    pub fn product_of_coordinates(k: usize) -> Self {
        SopFunction { k, coeffs: vec![1.0], factors: vec![vec![Factor::Identity; k]] }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn factor(&self, j: usize, k: usize) -> &Factor {
        &self.factors[j][k]
    }

    pub fn eval(&self, x: &[&[f64]]) -> f64 {
        let mut acc = CompensatedSum::new();
        for (row, c) in self.factors.iter().zip(&self.coeffs) {
            let mut prod = *c;
            for (f, xk) in row.iter().zip(x) {
                prod *= f.eval(xk);
            }
            acc.add(prod);
        }
        acc.value()
    }
}

/// A factor of a [`FactorGraphFunction`]: an evaluator over the points of
/// the blocks in `scope` (sorted, distinct).
#[derive(Clone)]
pub struct GraphFactor {
    scope: Vec<usize>,
    eval: JointFn,
}

impl GraphFactor {
    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn eval(&self, x: &[&[f64]]) -> f64 {
        (self.eval)(x)
    }
}

impl fmt::Debug for GraphFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GraphFactor").field("scope", &self.scope).finish()
    }
}

/// `phi(x) = prod_i phi_i(x_{A_i})`. Blocks outside every scope are ignored.
#[derive(Debug, Clone)]
pub struct FactorGraphFunction {
    k: usize,
    factors: Vec<GraphFactor>,
}

impl FactorGraphFunction {
    pub fn new(k: usize) -> Self {
        FactorGraphFunction { k, factors: Vec::new() }
    }

    /// Adds a factor. Its evaluator receives the scoped points in the order
    /// the scope is given here.
    pub fn with_factor(
        mut self,
        scope: &[usize],
        f: impl Fn(&[&[f64]]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if scope.is_empty() {
            return Err(Error::InvalidArgument("factor scopes must be nonempty".into()));
        }
        if let Some(b) = scope.iter().find(|&&b| b >= self.k) {
            return Err(Error::InvalidArgument(format!("scope block {b} outside 0..{}", self.k)));
        }
        let mut sorted = scope.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != scope.len() {
            return Err(Error::InvalidArgument("scope contains a repeated block".into()));
        }
        // evaluators see points in the caller's order; reorder from sorted
        let perm: Vec<usize> = scope.iter().map(|b| sorted.binary_search(b).expect("present")).collect();
        let eval: JointFn = if perm.iter().enumerate().all(|(i, &p)| i == p) {
            Arc::new(f)
        } else {
            Arc::new(move |x: &[&[f64]]| {
                let reordered: Vec<&[f64]> = perm.iter().map(|&p| x[p]).collect();
                f(&reordered)
            })
        };
        self.factors.push(GraphFactor { scope: sorted, eval });
        Ok(self)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn factors(&self) -> &[GraphFactor] {
        &self.factors
    }

    pub fn eval(&self, x: &[&[f64]]) -> f64 {
        let mut scoped: Vec<&[f64]> = Vec::new();
        let mut prod = 1.0;
        for f in &self.factors {
            scoped.clear();
            scoped.extend(f.scope.iter().map(|&b| x[b]));
            prod *= f.eval(&scoped);
        }
        prod
    }
}

/// `moments[k][p]`: the block-`k` average of `x^p` for every power used in
/// column `k`, built from running products in one pass. `Err(n)` marks the
/// first sample whose power is not finite.
fn power_moments(marginals: &MarginalSamples, f: &SopFunction) -> Vec<Vec<std::result::Result<f64, usize>>> {
    (0..f.k)
        .map(|k| {
            let top = f
                .factors
                .iter()
                .map(|row| match row[k] {
                    Factor::Identity => 1,
                    Factor::Power(p) => p as usize,
                    _ => 0,
                })
                .max()
                .unwrap_or(0);
            let block = marginals.block(k);
            let mut acc = vec![CompensatedSum::new(); top + 1];
            let mut bad: Vec<Option<usize>> = vec![None; top + 1];
            for (n, x) in block.iter().enumerate() {
                let mut v = 1.0;
                for p in 1..=top {
                    v *= x[0];
                    if !v.is_finite() && bad[p].is_none() {
                        bad[p] = Some(n);
                    }
                    acc[p].add(v);
                }
            }
            let len = block.len() as f64;
            acc.iter()
                .zip(bad)
                .map(|(a, b)| match b {
                    Some(n) => Err(n),
                    None => Ok(a.value() / len),
                })
                .collect()
        })
        .collect()
}

/// Product-form estimate of a sum-of-products function from per-block
/// factor averages.
pub fn eval_sop(marginals: &MarginalSamples, f: &SopFunction) -> Result<Estimate> {
    if f.k() != marginals.k() {
        return Err(Error::InvalidArgument(format!("function has {} blocks, samples have {}", f.k(), marginals.k())));
    }
    let moments = power_moments(marginals, f);
    let mut total = CompensatedSum::new();
    for (j, (row, c)) in f.factors.iter().zip(&f.coeffs).enumerate() {
        let mut prod = *c;
        for (k, factor) in row.iter().enumerate() {
            let block = marginals.block(k);
            let mean = match factor {
                Factor::One | Factor::Power(0) => 1.0,
                Factor::Identity | Factor::Power(_) => {
                    let p = if let Factor::Power(p) = factor { *p as usize } else { 1 };
                    match moments[k][p] {
                        Ok(m) => m,
                        Err(n) => {
                            return Err(Error::NonFinite { location: format!("term {j}, block {k}, sample {n}") })
                        }
                    }
                }
                Factor::Custom(_) => {
                    let mut acc = CompensatedSum::new();
                    for (n, x) in block.iter().enumerate() {
                        let v = factor.eval(x);
                        if !v.is_finite() {
                            return Err(Error::NonFinite { location: format!("term {j}, block {k}, sample {n}") });
                        }
                        acc.add(v);
                    }
                    acc.value() / block.len() as f64
                }
            };
            prod *= mean;
        }
        total.add(prod);
    }
    let sizes = marginals.sizes();
    let n_evals = f.n_terms() as u64 * sizes.iter().map(|&n| n as u64).sum::<u64>();
    Ok(Estimate { value: total.value(), n_phi_evals: n_evals, n_samples_used: sizes, kind: EvalKind::SopFastPath })
}
