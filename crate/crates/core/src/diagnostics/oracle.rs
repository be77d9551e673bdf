use crate::error::{Error, Result};
use crate::estimators::{
    product_form_estimate, standard_estimate, DiscreteProductTarget, MarginalSamples, PointSet, Strategy, TestFunction,
};
use crate::mixtures::{MixtureOfProducts, MixtureTestFunction};
use crate::numeric::{for_each_tuple, product_u128, CompensatedSum};
use rayon::prelude::*;

pub const DEFAULT_ORACLE_CAP: u128 = 10_000_000;

/// Exact moments of an estimator over every sample realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleReport {
    pub exact_mean: f64,
    pub exact_variance: f64,
    pub realizations: u128,
}

/// Enumerates every outcome of a sequence of independent discrete stages.
///
/// `stages[s]` holds the outcome probabilities of stage `s`; `estimator` maps an
/// outcome index per stage to the estimate. Mean and variance are accumulated
/// in two passes with compensated sums, so the result is independent of the
/// thread schedule.
pub fn brute_force_oracle<F>(stages: &[Vec<f64>], cap: u128, estimator: F) -> Result<OracleReport>
where
    F: Fn(&[usize]) -> Result<f64> + Sync,
{
    let dims: Vec<usize> = stages.iter().map(Vec::len).collect();
    let total = product_u128(dims.iter().copied());
    if total > cap {
        return Err(Error::CapExceeded { what: "oracle enumeration", required: total, cap });
    }
    if dims.contains(&0) {
        return Err(Error::InvalidArgument("every stage needs at least one outcome".into()));
    }
    let pass = |center: f64, power: i32| -> Result<f64> {
        let head = dims.first().copied().unwrap_or(1);
        let partials: Vec<Result<CompensatedSum>> = (0..head)
            .into_par_iter()
            .map(|i0| {
                let mut acc = CompensatedSum::new();
                let mut err = None;
                let mut idx = vec![0usize; dims.len()];
                let rest = if dims.is_empty() { &[][..] } else { &dims[1..] };
                for_each_tuple(rest, |t| {
                    if err.is_some() {
                        return;
                    }
                    let mut p = 1.0;
                    if !dims.is_empty() {
                        idx[0] = i0;
                        p *= stages[0][i0];
                    }
                    for (s, &j) in t.iter().enumerate() {
                        idx[s + 1] = j;
                        p *= stages[s + 1][j];
                    }
                    match estimator(&idx) {
                        Ok(v) if v.is_finite() => acc.add(p * (v - center).powi(power)),
                        Ok(_) => err = Some(Error::NonFinite { location: format!("realization {idx:?}") }),
                        Err(e) => err = Some(e),
                    }
                });
                err.map_or(Ok(acc), Err)
            })
            .collect();
        let mut total = CompensatedSum::new();
        for p in partials {
            total.merge(&p?);
        }
        Ok(total.value())
    };
    let mean = pass(0.0, 1)?;
    let var = pass(mean, 2)?.max(0.0);
    Ok(OracleReport { exact_mean: mean, exact_variance: var, realizations: total })
}

/// Estimator applied by the oracle helpers.
#[derive(Debug, Clone)]
pub enum OracleEstimator {
    /// Requires equal sample sizes; sample `n` pairs the `n`-th draw of each block.
    Standard,
    ProductForm(Strategy),
}

/// Stages for `N_k` i.i.d. draws of each block, block-major.
fn product_stages(target: &DiscreteProductTarget, n_per_block: &[usize]) -> Vec<Vec<f64>> {
    let mut stages = Vec::new();
    for (k, &n) in n_per_block.iter().enumerate() {
        for _ in 0..n {
            stages.push(target.block(k).probs().to_vec());
        }
    }
    stages
}

fn samples_from_indices(
    target: &DiscreteProductTarget,
    n_per_block: &[usize],
    idx: &[usize],
) -> Result<MarginalSamples> {
    let mut offset = 0;
    let mut blocks = Vec::with_capacity(n_per_block.len());
    for (k, &n) in n_per_block.iter().enumerate() {
        let b = target.block(k);
        let data: Vec<f64> = idx[offset..offset + n].iter().flat_map(|&j| b.point(j).iter().copied()).collect();
        blocks.push(PointSet::new(b.points().width(), data)?);
        offset += n;
    }
    MarginalSamples::new(blocks)
}

/// Exact mean and variance of an estimator on a discrete product target.
pub fn oracle_product_target(
    target: &DiscreteProductTarget,
    phi: &TestFunction,
    n_per_block: &[usize],
    estimator: &OracleEstimator,
    cap: u128,
) -> Result<OracleReport> {
    if n_per_block.len() != target.k() {
        return Err(Error::InvalidArgument("one sample size per block is required".into()));
    }
    if let OracleEstimator::Standard = estimator {
        if n_per_block.windows(2).any(|w| w[0] != w[1]) {
            return Err(Error::InvalidArgument("the standard estimator needs equal sample sizes".into()));
        }
    }
    let stages = product_stages(target, n_per_block);
    brute_force_oracle(&stages, cap, |idx| {
        let s = samples_from_indices(target, n_per_block, idx)?;
        let e = match estimator {
            OracleEstimator::Standard => standard_estimate(&s, phi)?,
            OracleEstimator::ProductForm(strategy) => product_form_estimate(&s, phi, strategy)?,
        };
        Ok(e.value)
    })
}

/// Estimators on a mixture of products.
#[derive(Debug, Clone)]
pub enum MixtureOracleEstimator {
    Stratified,
    StratifiedPf(Strategy),
}

/// Exact mean and variance of a stratified estimator on a discrete mixture.
pub fn oracle_mixture(
    mix: &MixtureOfProducts,
    phi: &MixtureTestFunction,
    allocation: &[usize],
    estimator: &MixtureOracleEstimator,
    cap: u128,
) -> Result<OracleReport> {
    if allocation.len() != mix.components().len() || allocation.contains(&0) {
        return Err(Error::InvalidArgument("one positive allocation per component is required".into()));
    }
    let targets = mix
        .components()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.discrete_target().ok_or_else(|| Error::Unsupported(format!("component {i} is not finite-support")))
        })
        .collect::<Result<Vec<_>>>()?;
    let sizes: Vec<Vec<usize>> = targets.iter().zip(allocation).map(|(t, &n)| vec![n; t.k()]).collect();
    let mut stages = Vec::new();
    for (t, s) in targets.iter().zip(&sizes) {
        stages.extend(product_stages(t, s));
    }
    let fns: Vec<TestFunction> = (0..targets.len()).map(|i| phi.for_component(mix, i)).collect();
    brute_force_oracle(&stages, cap, |idx| {
        let mut offset = 0;
        let mut acc = CompensatedSum::new();
        for (i, (t, s)) in targets.iter().zip(&sizes).enumerate() {
            let len: usize = s.iter().sum();
            let samples = samples_from_indices(t, s, &idx[offset..offset + len])?;
            offset += len;
            let v = match estimator {
                // joint draw n takes the n-th point of every block
                MixtureOracleEstimator::Stratified => standard_estimate(&samples, &fns[i])?.value,
                MixtureOracleEstimator::StratifiedPf(strategy) => {
                    product_form_estimate(&samples, &fns[i], strategy)?.value
                }
            };
            acc.add(mix.weights()[i] * v);
        }
        Ok(acc.value())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::DiscreteBlock;

    fn bernoulli_pair() -> DiscreteProductTarget {
        DiscreteProductTarget::iid(DiscreteBlock::uniform(vec![0.0, 1.0]).unwrap(), 2).unwrap()
    }

    fn product() -> TestFunction {
        TestFunction::black_box(|x| x[0][0] * x[1][0])
    }

    #[test]
    fn constant_estimator_has_zero_variance() {
        let r = brute_force_oracle(&[vec![0.5, 0.5], vec![0.2, 0.8]], 100, |_| Ok(3.0)).unwrap();
        assert!(r.exact_variance < 1e-28);
        assert!((r.exact_mean - 3.0).abs() < 1e-15);
        assert_eq!(r.realizations, 4);
    }

    #[test]
    fn bernoulli_product_single_sample() {
        let r = oracle_product_target(
            &bernoulli_pair(),
            &product(),
            &[1, 1],
            &OracleEstimator::ProductForm(Strategy::BruteForce),
            DEFAULT_ORACLE_CAP,
        )
        .unwrap();
        assert!((r.exact_mean - 0.25).abs() < 1e-15);
        assert!((r.exact_variance - 3.0 / 16.0).abs() < 1e-15);
    }

    #[test]
    fn product_form_beats_standard_at_two_samples() {
        let pf = oracle_product_target(
            &bernoulli_pair(),
            &product(),
            &[2, 2],
            &OracleEstimator::ProductForm(Strategy::BruteForce),
            DEFAULT_ORACLE_CAP,
        )
        .unwrap();
        let std = oracle_product_target(
            &bernoulli_pair(),
            &product(),
            &[2, 2],
            &OracleEstimator::Standard,
            DEFAULT_ORACLE_CAP,
        )
        .unwrap();
        assert_eq!(pf.realizations, 16);
        assert!(pf.exact_variance <= std.exact_variance);
        assert!((std.exact_variance - 3.0 / 32.0).abs() < 1e-15);
    }

    #[test]
    fn cap_is_enforced() {
        let stages = vec![vec![0.5, 0.5]; 10];
        assert!(matches!(brute_force_oracle(&stages, 1000, |_| Ok(0.0)), Err(Error::CapExceeded { .. })));
    }
}
