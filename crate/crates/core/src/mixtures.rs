//! Stratified estimators for mixtures of product-form distributions.

use crate::distributions::SimRng;
use crate::error::{Error, Result};
use crate::estimators::{
    exact_variance, product_form_estimate, DiscreteBlock, DiscreteProductTarget, Estimate, EvalKind, MarginalSamples,
    PointSet, Strategy, TestFunction,
};
use crate::numeric::{for_each_tuple, sum, CompensatedSum};
use std::fmt;
use std::sync::Arc;

pub type BlockSampler = Arc<dyn Fn(&mut SimRng) -> Vec<f64> + Send + Sync>;

/// Distribution of one block of coordinates within a component.
#[derive(Clone)]
pub enum BlockDist {
    Discrete(DiscreteBlock),
    Sampler(BlockSampler),
}

impl fmt::Debug for BlockDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockDist::Discrete(d) => f.debug_tuple("Discrete").field(d).finish(),
            BlockDist::Sampler(_) => write!(f, "Sampler(..)"),
        }
    }
}

impl BlockDist {
    fn sample(&self, rng: &mut SimRng) -> Vec<f64> {
        match self {
            BlockDist::Discrete(d) => d.point(d.sample_index(rng)).to_vec(),
            BlockDist::Sampler(s) => s(rng),
        }
    }
}

/// One mixture component: a product over the groups of `partition`.
#[derive(Debug, Clone)]
pub struct MixtureComponent {
    partition: Vec<Vec<usize>>,
    blocks: Vec<BlockDist>,
}

impl MixtureComponent {
    /// `partition[b]` lists the coordinates drawn jointly by `blocks[b]`.
    pub fn new(partition: Vec<Vec<usize>>, blocks: Vec<BlockDist>) -> Result<Self> {
        if partition.len() != blocks.len() || partition.is_empty() {
            return Err(Error::InvalidArgument("a component needs one distribution per partition block".into()));
        }
        if partition.iter().any(Vec::is_empty) {
            return Err(Error::InvalidArgument("partition blocks must be nonempty".into()));
        }
        Ok(MixtureComponent { partition, blocks })
    }

    pub fn partition(&self) -> &[Vec<usize>] {
        &self.partition
    }

    pub fn n_blocks(&self) -> usize {
        self.partition.len()
    }

    /// The component as a finite-support target over its blocks, when every
    /// block is discrete.
    pub fn discrete_target(&self) -> Option<DiscreteProductTarget> {
        let blocks: Option<Vec<DiscreteBlock>> = self
            .blocks
            .iter()
            .map(|b| match b {
                BlockDist::Discrete(d) => Some(d.clone()),
                BlockDist::Sampler(_) => None,
            })
            .collect();
        DiscreteProductTarget::new(blocks?).ok()
    }

    /// Scatters block points into a full coordinate vector.
    fn assemble(&self, pts: &[&[f64]], out: &mut [f64]) {
        for (group, p) in self.partition.iter().zip(pts) {
            for (&c, v) in group.iter().zip(p.iter()) {
                out[c] = *v;
            }
        }
    }
}

/// `mu = sum_i theta_i mu^i` with each `mu^i` product-form over its own
/// partition of the coordinates.
#[derive(Debug, Clone)]
pub struct MixtureOfProducts {
    dim: usize,
    weights: Vec<f64>,
    components: Vec<MixtureComponent>,
}

impl MixtureOfProducts {
    pub fn new(dim: usize, weights: Vec<f64>, components: Vec<MixtureComponent>) -> Result<Self> {
        if weights.len() != components.len() || weights.is_empty() {
            return Err(Error::InvalidArgument("one weight per component is required".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidParameters("mixture weights must be positive".into()));
        }
        let total = sum(weights.iter().copied());
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameters(format!("mixture weights sum to {total}")));
        }
        for (i, c) in components.iter().enumerate() {
            let mut seen = vec![false; dim];
            for &coord in c.partition.iter().flatten() {
                if coord >= dim || seen[coord] {
                    return Err(Error::InvalidArgument(format!(
                        "component {i}: partition is not a partition of 0..{dim}"
                    )));
                }
                seen[coord] = true;
            }
            if seen.iter().any(|s| !s) {
                return Err(Error::InvalidArgument(format!(
                    "component {i}: partition does not cover every coordinate"
                )));
            }
        }
        Ok(MixtureOfProducts { dim, weights, components })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    /// `n` joint draws from component `i`.
    fn sample_component_joint(&self, i: usize, n: usize, rng: &SimRng) -> Vec<Vec<f64>> {
        let c = &self.components[i];
        let mut streams: Vec<SimRng> = (0..c.n_blocks()).map(|b| rng.split(b as u64)).collect();
        (0..n)
            .map(|_| {
                let mut x = vec![0.0; self.dim];
                for ((group, dist), r) in c.partition.iter().zip(&c.blocks).zip(streams.iter_mut()) {
                    for (&coord, v) in group.iter().zip(dist.sample(r)) {
                        x[coord] = v;
                    }
                }
                x
            })
            .collect()
    }

    /// `n` independent draws per block of component `i`.
    pub fn sample_component_blocks(&self, i: usize, n: usize, rng: &SimRng) -> Result<MarginalSamples> {
        let c = &self.components[i];
        let blocks = c
            .partition
            .iter()
            .zip(&c.blocks)
            .enumerate()
            .map(|(b, (group, dist))| {
                let mut r = rng.split(b as u64);
                let data: Vec<f64> = (0..n).flat_map(|_| dist.sample(&mut r)).collect();
                PointSet::new(group.len(), data)
            })
            .collect::<Result<Vec<_>>>()?;
        MarginalSamples::new(blocks)
    }
}

/// Test function over the full coordinate vector, optionally with
/// per-component structured forms over the component's blocks.
#[derive(Clone)]
pub enum MixtureTestFunction {
    Flat(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
    /// `per_component[i]` evaluates `phi` on component `i`'s blocks.
    PerComponent {
        flat: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
        per_component: Vec<TestFunction>,
    },
}

impl fmt::Debug for MixtureTestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MixtureTestFunction::Flat(_) => write!(f, "Flat(..)"),
            MixtureTestFunction::PerComponent { per_component, .. } => {
                write!(f, "PerComponent({} components)", per_component.len())
            }
        }
    }
}

impl MixtureTestFunction {
    pub fn flat(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        MixtureTestFunction::Flat(Arc::new(f))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MixtureTestFunction::Flat(f) | MixtureTestFunction::PerComponent { flat: f, .. } => f(x),
        }
    }

    /// `phi` as a function of component `i`'s block points.
    pub fn for_component(&self, mix: &MixtureOfProducts, i: usize) -> TestFunction {
        match self {
            MixtureTestFunction::PerComponent { per_component, .. } => per_component[i].clone(),
            MixtureTestFunction::Flat(f) => {
                let f = f.clone();
                let comp = mix.components[i].clone();
                let dim = mix.dim;
                TestFunction::black_box(move |pts| {
                    let mut x = vec![0.0; dim];
                    comp.assemble(pts, &mut x);
                    f(&x)
                })
            }
        }
    }
}

fn check_allocation(mix: &MixtureOfProducts, allocation: &[usize]) -> Result<()> {
    if allocation.len() != mix.components.len() {
        return Err(Error::InvalidArgument(format!(
            "{} allocations for {} components",
            allocation.len(),
            mix.components.len()
        )));
    }
    if let Some(i) = allocation.iter().position(|&n| n == 0) {
        return Err(Error::InvalidArgument(format!("component {i} has a zero allocation")));
    }
    Ok(())
}

/// `sum_i theta_i N_i^-1 sum_n phi(X^{i,n})` with joint draws per component.
pub fn stratified_estimate(
    mix: &MixtureOfProducts,
    phi: &MixtureTestFunction,
    allocation: &[usize],
    rng: &SimRng,
) -> Result<Estimate> {
    check_allocation(mix, allocation)?;
    let mut total = CompensatedSum::new();
    for (i, (&n, &w)) in allocation.iter().zip(&mix.weights).enumerate() {
        let draws = mix.sample_component_joint(i, n, &rng.split(i as u64));
        let mut acc = CompensatedSum::new();
        for (j, x) in draws.iter().enumerate() {
            let v = phi.eval(x);
            if !v.is_finite() {
                return Err(Error::NonFinite { location: format!("component {i}, sample {j}") });
            }
            acc.add(v);
        }
        total.add(w * acc.value() / n as f64);
    }
    Ok(Estimate {
        value: total.value(),
        n_phi_evals: allocation.iter().map(|&n| n as u64).sum(),
        n_samples_used: allocation.to_vec(),
        kind: EvalKind::Standard,
    })
}

/// `sum_i theta_i mu_x^{i,N_i}(phi)`, each inner estimate product-form over the
/// component's own blocks.
pub fn stratified_pf_estimate(
    mix: &MixtureOfProducts,
    phi: &MixtureTestFunction,
    allocation: &[usize],
    strategy: &Strategy,
    rng: &SimRng,
) -> Result<Estimate> {
    check_allocation(mix, allocation)?;
    let mut total = CompensatedSum::new();
    let mut evals = 0;
    for (i, (&n, &w)) in allocation.iter().zip(&mix.weights).enumerate() {
        let samples = mix.sample_component_blocks(i, n, &rng.split(i as u64))?;
        let e = product_form_estimate(&samples, &phi.for_component(mix, i), strategy)?;
        evals += e.n_phi_evals;
        total.add(w * e.value);
    }
    Ok(Estimate {
        value: total.value(),
        n_phi_evals: evals,
        n_samples_used: allocation.to_vec(),
        kind: match strategy {
            Strategy::BruteForce => EvalKind::BruteForce,
            Strategy::SopFastPath => EvalKind::SopFastPath,
            Strategy::Eliminate(_) => EvalKind::Eliminate,
        },
    })
}

/// Largest-remainder rounding of `shares * n` (shares summing to 1) with a
/// one-sample floor per entry.
fn round_allocation(shares: &[f64], n: usize) -> Result<Vec<usize>> {
    let i = shares.len();
    if n < i {
        return Err(Error::InvalidArgument(format!("{n} samples cannot cover {i} components")));
    }
    let mut alloc = vec![1usize; i];
    // entries whose share is below the floor keep exactly one sample
    let mut free: Vec<usize> = (0..i).collect();
    loop {
        let remaining = n - alloc.iter().enumerate().filter(|(j, _)| !free.contains(j)).map(|(_, a)| a).sum::<usize>();
        let mass: f64 = free.iter().map(|&j| shares[j]).sum();
        let floored: Vec<usize> =
            free.iter().copied().filter(|&j| mass <= 0.0 || shares[j] / mass * remaining as f64 <= 1.0).collect();
        if floored.is_empty() || floored.len() == free.len() {
            if floored.len() == free.len() {
                // everything at the floor: spread leftovers by share
                let ideal: Vec<f64> = free
                    .iter()
                    .map(|&j| {
                        if mass > 0.0 {
                            shares[j] / mass * remaining as f64
                        } else {
                            remaining as f64 / free.len() as f64
                        }
                    })
                    .collect();
                largest_remainder(&free, &ideal, remaining, &mut alloc);
            } else {
                let ideal: Vec<f64> = free.iter().map(|&j| shares[j] / mass * remaining as f64).collect();
                largest_remainder(&free, &ideal, remaining, &mut alloc);
            }
            return Ok(alloc);
        }
        free.retain(|j| !floored.contains(j));
    }
}

fn largest_remainder(idx: &[usize], ideal: &[f64], total: usize, alloc: &mut [usize]) {
    let mut base: Vec<usize> = ideal.iter().map(|x| (x.floor() as usize).max(1)).collect();
    let mut assigned: usize = base.iter().sum();
    // when floors overshoot, trim from the smallest remainders
    while assigned > total {
        let j = (0..base.len())
            .filter(|&j| base[j] > 1)
            .min_by(|&a, &b| (ideal[a] - base[a] as f64).total_cmp(&(ideal[b] - base[b] as f64)))
            .expect("total covers one sample per entry");
        base[j] -= 1;
        assigned -= 1;
    }
    let mut order: Vec<usize> = (0..base.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = ideal[a] - base[a] as f64;
        let rb = ideal[b] - base[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &j in order.iter().cycle().take(total - assigned) {
        base[j] += 1;
    }
    for (&j, b) in idx.iter().zip(base) {
        alloc[j] = b;
    }
}

/// `N_i ∝ theta_i N`.
pub fn proportional_allocation(weights: &[f64], n: usize) -> Result<Vec<usize>> {
    round_allocation(weights, n)
}

/// `N_i ∝ theta_i sigma_i`, the allocation minimizing the asymptotic variance
/// `sum_i (theta_i sigma_i)^2 / (N_i / N)`.
pub fn optimal_allocation(weights: &[f64], sigmas: &[f64], n: usize) -> Result<Vec<usize>> {
    if weights.len() != sigmas.len() {
        return Err(Error::InvalidArgument("one sigma per component is required".into()));
    }
    if sigmas.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
        return Err(Error::InvalidArgument("sigmas must be nonnegative".into()));
    }
    let prod: Vec<f64> = weights.iter().zip(sigmas).map(|(w, s)| w * s).collect();
    let total = sum(prod.iter().copied());
    if total <= 0.0 {
        return Err(Error::InvalidArgument("at least one sigma must be positive".into()));
    }
    round_allocation(&prod.iter().map(|p| p / total).collect::<Vec<_>>(), n)
}

/// `sum_i theta_i^2 sigma_i^2 / N_i`.
pub fn allocation_variance(weights: &[f64], sigmas: &[f64], allocation: &[usize]) -> f64 {
    sum(weights.iter().zip(sigmas).zip(allocation).map(|((w, s), &n)| w * w * s * s / n as f64))
}

/// Exact variances of the three estimators on a fully discrete mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureVariances {
    pub mean: f64,
    /// `Var(phi) / N` for `N = sum_i N_i` i.i.d. draws from the mixture.
    pub plain: f64,
    pub stratified: f64,
    pub stratified_pf: f64,
}

pub fn exact_mixture_variances(
    mix: &MixtureOfProducts,
    phi: &MixtureTestFunction,
    allocation: &[usize],
) -> Result<MixtureVariances> {
    check_allocation(mix, allocation)?;
    let mut means = Vec::new();
    let mut second = Vec::new();
    let mut strat = CompensatedSum::new();
    let mut strat_pf = CompensatedSum::new();
    for (i, c) in mix.components.iter().enumerate() {
        let target =
            c.discrete_target().ok_or_else(|| Error::Unsupported(format!("component {i} is not finite-support")))?;
        let f = phi.for_component(mix, i);
        let ni = allocation[i];
        let report = exact_variance(&target, &f, &vec![ni; target.k()])?;
        // second moment by enumeration for the plain estimator
        let mut m2 = CompensatedSum::new();
        let mut pts: Vec<&[f64]> = Vec::with_capacity(target.k());
        for_each_tuple(&target.support_sizes(), |t| {
            pts.clear();
            let mut p = 1.0;
            for (b, &j) in t.iter().enumerate() {
                pts.push(target.block(b).point(j));
                p *= target.block(b).prob(j);
            }
            let v = f.eval(&pts);
            m2.add(p * v * v);
        });
        let w = mix.weights[i];
        means.push(report.mean);
        second.push(m2.value());
        strat.add(w * w * report.asymptotic_std / ni as f64);
        strat_pf.add(w * w * report.finite_sample);
    }
    let mean = sum(mix.weights.iter().zip(&means).map(|(w, m)| w * m));
    let m2 = sum(mix.weights.iter().zip(&second).map(|(w, m)| w * m));
    let n_total: usize = allocation.iter().sum();
    Ok(MixtureVariances {
        mean,
        plain: (m2 - mean * mean) / n_total as f64,
        stratified: strat.value(),
        stratified_pf: strat_pf.value(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirac_mix() -> MixtureOfProducts {
        let point = |v: f64| BlockDist::Discrete(DiscreteBlock::scalar(vec![v], vec![1.0]).unwrap());
        MixtureOfProducts::new(
            1,
            vec![0.3, 0.7],
            vec![
                MixtureComponent::new(vec![vec![0]], vec![point(2.0)]).unwrap(),
                MixtureComponent::new(vec![vec![0]], vec![point(-1.0)]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn dirac_components_give_exact_mean() {
        let phi = MixtureTestFunction::flat(|x| x[0]);
        let e = stratified_estimate(&dirac_mix(), &phi, &[3, 5], &SimRng::from_seed_u64(0)).unwrap();
        assert!((e.value - (0.3 * 2.0 - 0.7)).abs() < 1e-15);
        let e = stratified_pf_estimate(&dirac_mix(), &phi, &[3, 5], &Strategy::BruteForce, &SimRng::from_seed_u64(0))
            .unwrap();
        assert!((e.value - (0.3 * 2.0 - 0.7)).abs() < 1e-15);
    }

    #[test]
    fn zero_allocation_rejected() {
        let phi = MixtureTestFunction::flat(|x| x[0]);
        assert!(stratified_estimate(&dirac_mix(), &phi, &[0, 5], &SimRng::from_seed_u64(0)).is_err());
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(optimal_allocation(&[0.5, 0.5], &[1.0, 3.0], 8).unwrap(), vec![2, 6]);
        assert_eq!(optimal_allocation(&[0.5, 0.5], &[2.0, 2.0], 10).unwrap(), vec![5, 5]);
        assert_eq!(optimal_allocation(&[0.5, 0.5], &[0.0, 2.0], 10).unwrap(), vec![1, 9]);
        assert!(optimal_allocation(&[0.5, 0.5], &[1.0, 1.0], 1).is_err());
        assert!(optimal_allocation(&[0.5, 0.5], &[0.0, 0.0], 4).is_err());
        assert_eq!(proportional_allocation(&[0.3, 0.7], 10).unwrap(), vec![3, 7]);
    }

    #[test]
    fn allocations_sum_to_budget() {
        let w = [0.05, 0.15, 0.3, 0.5];
        let s = [0.0, 10.0, 0.01, 3.0];
        for n in 4..60 {
            let a = optimal_allocation(&w, &s, n).unwrap();
            assert_eq!(a.iter().sum::<usize>(), n, "{a:?}");
            assert!(a.iter().all(|&x| x >= 1));
            let p = proportional_allocation(&w, n).unwrap();
            assert_eq!(p.iter().sum::<usize>(), n, "{p:?}");
        }
    }

    #[test]
    fn partition_must_cover() {
        let d = BlockDist::Discrete(DiscreteBlock::uniform(vec![0.0, 1.0]).unwrap());
        let c = MixtureComponent::new(vec![vec![0]], vec![d]).unwrap();
        assert!(MixtureOfProducts::new(2, vec![1.0], vec![c]).is_err());
    }
}
