//! Standard and product-form estimators, exact variance formulas and the
//! Hoeffding decomposition.

mod discrete;
mod replicate;
mod samples;
mod test_function;
mod variance;

pub use discrete::{BlockSet, DiscreteBlock, DiscreteProductTarget};
pub use replicate::{replicate_values, replicate_variance, ReplicateSummary};
pub use samples::{MarginalSamples, PointSet};
pub use test_function::TestFunction;
pub use variance::{
    asymptotic_variances, exact_variance, hoeffding_projection, HoeffdingProjection, VarianceReport,
    DEFAULT_MAX_BLOCKS, DEFAULT_SUPPORT_CAP,
};

use crate::error::{Error, Result};
use crate::factorized::{eval_eliminated_with, eval_sop, EliminationPlan};
use crate::numeric::{for_each_tuple, product_u128, CompensatedSum};
use rayon::prelude::*;

/// How an estimate was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalKind {
    Standard,
    BruteForce,
    SopFastPath,
    Eliminate,
}

/// Evaluation strategy for [`product_form_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Strategy {
    /// Sum `phi` over every index tuple.
    BruteForce,
    /// Per-block factor averages; needs a sum-of-products function.
    SopFastPath,
    /// Variable elimination in the given order; needs a factor-graph function.
    Eliminate(EliminationPlan),
}

impl Strategy {
    fn name(&self) -> &'static str {
        match self {
            Strategy::BruteForce => "brute-force",
            Strategy::SopFastPath => "sop-fast-path",
            Strategy::Eliminate(_) => "eliminate",
        }
    }
}

/// A point estimate with cost counters.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub value: f64,
    /// Evaluations of `phi` (brute force) or of its factors (structured paths).
    pub n_phi_evals: u64,
    pub n_samples_used: Vec<usize>,
    pub kind: EvalKind,
}

/// Resource limits for [`product_form_estimate_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalLimits {
    /// Largest number of index tuples brute force will visit.
    pub brute_force_cap: u128,
    /// Largest intermediate table variable elimination will allocate.
    pub table_cap: u128,
}

impl Default for EvalLimits {
    fn default() -> Self {
        EvalLimits { brute_force_cap: 100_000_000, table_cap: crate::factorized::DEFAULT_TABLE_CAP }
    }
}

/// `N^-1 sum_n phi(X^n)` over aligned tuples `X^n = (X_1^n, ..., X_K^n)`.
pub fn standard_estimate(samples: &MarginalSamples, phi: &TestFunction) -> Result<Estimate> {
    let n = samples.aligned_len().ok_or_else(|| {
        Error::InvalidArgument(format!("the standard estimator needs equal block sizes, got {:?}", samples.sizes()))
    })?;
    let k = samples.k();
    let mut acc = CompensatedSum::new();
    let mut pts: Vec<&[f64]> = Vec::with_capacity(k);
    for i in 0..n {
        pts.clear();
        pts.extend((0..k).map(|b| samples.point(b, i)));
        let v = phi.eval(&pts);
        if !v.is_finite() {
            return Err(Error::NonFinite { location: format!("sample {i}") });
        }
        acc.add(v);
    }
    Ok(Estimate {
        value: acc.value() / n as f64,
        n_phi_evals: n as u64,
        n_samples_used: vec![n; k],
        kind: EvalKind::Standard,
    })
}

/// `(prod_k N_k)^-1` times the sum of `phi` over every index tuple.
pub fn product_form_estimate(marginals: &MarginalSamples, phi: &TestFunction, strategy: &Strategy) -> Result<Estimate> {
    product_form_estimate_with(marginals, phi, strategy, &EvalLimits::default())
}

pub fn product_form_estimate_with(
    marginals: &MarginalSamples,
    phi: &TestFunction,
    strategy: &Strategy,
    limits: &EvalLimits,
) -> Result<Estimate> {
    match (strategy, phi) {
        (Strategy::BruteForce, _) => brute_force(marginals, phi, limits.brute_force_cap),
        (Strategy::SopFastPath, TestFunction::Sop(f)) => eval_sop(marginals, f),
        (Strategy::Eliminate(plan), TestFunction::FactorGraph(f)) => {
            eval_eliminated_with(marginals, f, plan, limits.table_cap)
        }
        _ => Err(Error::StrategyMismatch { strategy: strategy.name(), representation: phi.representation() }),
    }
}

fn brute_force(marginals: &MarginalSamples, phi: &TestFunction, cap: u128) -> Result<Estimate> {
    if let TestFunction::Sop(f) = phi {
        if f.k() != marginals.k() {
            return Err(Error::InvalidArgument("block count mismatch".into()));
        }
    }
    let sizes = marginals.sizes();
    let total = product_u128(sizes.iter().copied());
    let sum = tuple_sum(marginals, cap, |pts, idx| {
        let v = phi.eval(pts);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite { location: format!("sample indices {idx:?}") })
        }
    })?;
    Ok(Estimate {
        value: sum / total as f64,
        n_phi_evals: total as u64,
        n_samples_used: sizes,
        kind: EvalKind::BruteForce,
    })
}

/// Compensated sum of `f` over every index tuple, split over the first
/// block's index and merged in index order so the result does not depend on
/// thread scheduling. The first error in index order is returned.
pub(crate) fn tuple_sum<F>(marginals: &MarginalSamples, cap: u128, f: F) -> Result<f64>
where
    F: Fn(&[&[f64]], &[usize]) -> Result<f64> + Sync,
{
    let sizes = marginals.sizes();
    let total = product_u128(sizes.iter().copied());
    if total > cap {
        return Err(Error::CapExceeded { what: "brute-force product-form sum", required: total, cap });
    }
    let k = marginals.k();
    let inner_dims = &sizes[1..];
    let partials: Vec<Result<CompensatedSum>> = (0..sizes[0])
        .into_par_iter()
        .map(|n0| {
            let mut acc = CompensatedSum::new();
            let mut pts: Vec<&[f64]> = Vec::with_capacity(k);
            let mut idx: Vec<usize> = Vec::with_capacity(k);
            let mut err = None;
            for_each_tuple(inner_dims, |t| {
                if err.is_some() {
                    return;
                }
                pts.clear();
                pts.push(marginals.point(0, n0));
                pts.extend(t.iter().enumerate().map(|(i, &n)| marginals.point(i + 1, n)));
                idx.clear();
                idx.push(n0);
                idx.extend_from_slice(t);
                match f(&pts, &idx) {
                    Ok(v) => acc.add(v),
                    Err(e) => err = Some(e),
                }
            });
            match err {
                Some(e) => Err(e),
                None => Ok(acc),
            }
        })
        .collect();
    let mut acc = CompensatedSum::new();
    for p in partials {
        acc.merge(&p?);
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorized::{plan_elimination, FactorGraphFunction, Heuristic, SopFunction};

    fn pair() -> MarginalSamples {
        MarginalSamples::from_scalars(vec![vec![0.0, 1.0], vec![0.0, 2.0]]).unwrap()
    }

    #[test]
    fn standard_estimate_constant_and_pairs() {
        let m = pair();
        let e = standard_estimate(&m, &TestFunction::constant(3.5)).unwrap();
        assert_eq!(e.value, 3.5);
        let e = standard_estimate(&m, &SopFunction::product_of_coordinates(2).into()).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.n_phi_evals, 2);
    }

    #[test]
    fn brute_force_hand_enumeration() {
        let e = product_form_estimate(&pair(), &SopFunction::product_of_coordinates(2).into(), &Strategy::BruteForce)
            .unwrap();
        assert_eq!(e.value, 0.5);
        assert_eq!(e.n_phi_evals, 4);
        assert_eq!(e.kind, EvalKind::BruteForce);
    }

    #[test]
    fn single_block_matches_standard() {
        let m = MarginalSamples::from_scalars(vec![vec![0.3, -1.0, 2.5, 4.0]]).unwrap();
        let phi = TestFunction::black_box(|x| x[0][0].sin() + x[0][0] * x[0][0]);
        let a = standard_estimate(&m, &phi).unwrap().value;
        let b = product_form_estimate(&m, &phi, &Strategy::BruteForce).unwrap().value;
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn unequal_sizes_supported() {
        let m = MarginalSamples::from_scalars(vec![vec![1.0, 2.0, 3.0], vec![10.0]]).unwrap();
        let phi: TestFunction = SopFunction::product_of_coordinates(2).into();
        let e = product_form_estimate(&m, &phi, &Strategy::BruteForce).unwrap();
        assert!((e.value - 20.0).abs() < 1e-12);
        assert!(standard_estimate(&m, &phi).is_err());
    }

    #[test]
    fn mismatched_strategy_rejected() {
        let phi = TestFunction::constant(1.0);
        let r = product_form_estimate(&pair(), &phi, &Strategy::SopFastPath);
        assert!(matches!(r, Err(Error::StrategyMismatch { .. })));
        let g = FactorGraphFunction::new(2).with_factor(&[0], |x| x[0][0]).unwrap();
        let plan = plan_elimination(&g, Heuristic::MinDegree, &[], &[2, 2]);
        let r = product_form_estimate(&pair(), &phi, &Strategy::Eliminate(plan));
        assert!(matches!(r, Err(Error::StrategyMismatch { .. })));
    }

    #[test]
    fn brute_force_cap_enforced() {
        let limits = EvalLimits { brute_force_cap: 3, ..EvalLimits::default() };
        let r = product_form_estimate_with(&pair(), &TestFunction::constant(1.0), &Strategy::BruteForce, &limits);
        assert!(matches!(r, Err(Error::CapExceeded { required: 4, .. })));
    }

    #[test]
    fn non_finite_value_names_tuple() {
        let phi = TestFunction::black_box(|x| 1.0 / (x[0][0] * x[1][0] - 2.0));
        match product_form_estimate(&pair(), &phi, &Strategy::BruteForce) {
            Err(Error::NonFinite { location }) => assert!(location.contains("[1, 1]")),
            other => panic!("unexpected {other:?}"),
        }
        match standard_estimate(&pair(), &phi) {
            Err(Error::NonFinite { location }) => assert_eq!(location, "sample 1"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
