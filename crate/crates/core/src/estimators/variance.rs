use super::discrete::{BlockSet, DiscreteProductTarget};
use super::test_function::TestFunction;
use crate::error::{Error, Result};
use crate::numeric::{for_each_tuple, product_u128, CompensatedSum};
use std::collections::{BTreeMap, HashMap};

/// Largest `K` accepted by the exact variance routines.
pub const DEFAULT_MAX_BLOCKS: usize = 12;

/// Cap on `prod_k (1 + |S_k|)`, the total size of all conditional-mean tables.
pub const DEFAULT_SUPPORT_CAP: u128 = 1 << 25;

/// Exact variances of the product-form estimator on a finite-support target.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceReport {
    /// `mu(phi)`.
    pub mean: f64,
    /// `Var(mu_x^N(phi))` at the requested per-block sample sizes.
    pub finite_sample: f64,
    /// `sigma_x^2(phi) = sum_k sigma_k^2(phi)`.
    pub asymptotic_pf: f64,
    /// `sigma^2(phi)`, the standard estimator's asymptotic variance.
    pub asymptotic_std: f64,
    /// `sigma^2_{A,B}(mu_{A^c}(phi))` for every `B ⊆ A ⊆ [K]`, `A` nonempty.
    pub terms: BTreeMap<(BlockSet, BlockSet), f64>,
}

impl VarianceReport {
    /// Exact variance of the standard estimator with `n` aligned samples.
    pub fn standard_variance(&self, n: usize) -> f64 {
        self.asymptotic_std / n as f64
    }
}

/// Conditional means `g_B(x_B) = E[phi | X_B = x_B]` for every `B`, stored as
/// dense tables over the support indices of the blocks in `B` (ascending).
struct ConditionalMeans {
    mean: f64,
    tables: HashMap<BlockSet, Vec<f64>>,
}

fn check_size(target: &DiscreteProductTarget) -> Result<()> {
    if target.k() > DEFAULT_MAX_BLOCKS {
        return Err(Error::CapExceeded {
            what: "exact variance subset sum (blocks)",
            required: target.k() as u128,
            cap: DEFAULT_MAX_BLOCKS as u128,
        });
    }
    let required = product_u128(target.support_sizes().iter().map(|s| s + 1));
    if required > DEFAULT_SUPPORT_CAP {
        return Err(Error::CapExceeded {
            what: "exact variance conditional-mean tables",
            required,
            cap: DEFAULT_SUPPORT_CAP,
        });
    }
    Ok(())
}

fn conditional_means(target: &DiscreteProductTarget, phi: &TestFunction) -> Result<ConditionalMeans> {
    check_size(target)?;
    let k = target.k();
    let sizes = target.support_sizes();
    let mut full = Vec::with_capacity(sizes.iter().product());
    let mut pts: Vec<&[f64]> = Vec::with_capacity(k);
    let mut bad = None;
    for_each_tuple(&sizes, |t| {
        pts.clear();
        pts.extend(t.iter().enumerate().map(|(b, &i)| target.block(b).point(i)));
        let v = phi.eval(&pts);
        if !v.is_finite() && bad.is_none() {
            bad = Some(format!("support indices {t:?}"));
        }
        full.push(v);
    });
    if let Some(location) = bad {
        return Err(Error::NonFinite { location });
    }

    let all = BlockSet::full(k);
    let mut tables = HashMap::new();
    tables.insert(all, full);
    // g_B comes from g_{B ∪ {j}} with j the lowest block outside B, which sits at
    // position j of the superset's (ascending) scope
    for mask in (0..all.0).rev() {
        let b = BlockSet(mask);
        let j = (!mask).trailing_zeros() as usize;
        let sup = b.with(j);
        let src = &tables[&sup];
        let dims: Vec<usize> = sup.blocks().map(|x| sizes[x]).collect();
        let outer: usize = dims[..j].iter().product();
        let mid = dims[j];
        let inner: usize = dims[j + 1..].iter().product();
        let probs = target.block(j).probs();
        let mut out = vec![0.0; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let mut acc = CompensatedSum::new();
                for (m, p) in probs.iter().enumerate() {
                    acc.add(p * src[(o * mid + m) * inner + i]);
                }
                out[o * inner + i] = acc.value();
            }
        }
        tables.insert(b, out);
    }
    let mean = tables[&BlockSet::EMPTY][0];
    Ok(ConditionalMeans { mean, tables })
}

impl ConditionalMeans {
    /// `tau_B = Var(g_B(X_B))`.
    fn tau(&self, target: &DiscreteProductTarget, b: BlockSet) -> f64 {
        if b.is_empty() {
            return 0.0;
        }
        let blocks: Vec<usize> = b.blocks().collect();
        let dims: Vec<usize> = blocks.iter().map(|&x| target.block(x).len()).collect();
        let table = &self.tables[&b];
        let mut acc = CompensatedSum::new();
        let mut idx = 0;
        for_each_tuple(&dims, |t| {
            let p: f64 = blocks.iter().zip(t).map(|(&x, &i)| target.block(x).prob(i)).product();
            let d = table[idx] - self.mean;
            acc.add(p * d * d);
            idx += 1;
        });
        acc.value()
    }
}

/// Exact `Var(mu_x^N(phi))` together with both asymptotic variances.
///
/// `n_per_block[k]` is the sample count `N_k` of block `k`; sizes may differ.
pub fn exact_variance(
    target: &DiscreteProductTarget,
    phi: &TestFunction,
    n_per_block: &[usize],
) -> Result<VarianceReport> {
    if n_per_block.len() != target.k() {
        return Err(Error::InvalidArgument(format!("{} sample sizes for {} blocks", n_per_block.len(), target.k())));
    }
    if n_per_block.contains(&0) {
        return Err(Error::InvalidArgument("every block needs at least one sample".into()));
    }
    let cm = conditional_means(target, phi)?;
    let k = target.k();
    let all = BlockSet::full(k);
    let taus: HashMap<BlockSet, f64> = all.subsets().map(|b| (b, cm.tau(target, b))).collect();

    let mut terms = BTreeMap::new();
    let mut total = CompensatedSum::new();
    for a in all.subsets().filter(|a| !a.is_empty()) {
        let mut inner = CompensatedSum::new();
        for b in a.subsets() {
            let t = taus[&b];
            terms.insert((a, b), t);
            let sign = if (a.len() - b.len()) % 2 == 0 { 1.0 } else { -1.0 };
            inner.add(sign * t);
        }
        let n_a: f64 = a.blocks().map(|x| n_per_block[x] as f64).product();
        total.add(inner.value() / n_a);
    }
    let asymptotic_pf = crate::numeric::sum((0..k).map(|x| taus[&BlockSet::EMPTY.with(x)]));
    Ok(VarianceReport { mean: cm.mean, finite_sample: total.value(), asymptotic_pf, asymptotic_std: taus[&all], terms })
}

/// `(sigma_x^2(phi), sigma^2(phi))`.
pub fn asymptotic_variances(target: &DiscreteProductTarget, phi: &TestFunction) -> Result<(f64, f64)> {
    let cm = conditional_means(target, phi)?;
    let k = target.k();
    let pf = crate::numeric::sum((0..k).map(|x| cm.tau(target, BlockSet::EMPTY.with(x))));
    Ok((pf, cm.tau(target, BlockSet::full(k))))
}

/// The Hoeffding component `psi_A` of `phi` under a finite-support target.
#[derive(Debug, Clone)]
pub struct HoeffdingProjection {
    target: DiscreteProductTarget,
    phi: TestFunction,
    a: BlockSet,
}

/// Builds `psi_A(x_A) = sum_{B ⊆ A} (-1)^{|A|-|B|} E[phi | X_B = x_B]`.
pub fn hoeffding_projection(
    target: &DiscreteProductTarget,
    phi: &TestFunction,
    a: BlockSet,
) -> Result<HoeffdingProjection> {
    if a.is_empty() {
        return Err(Error::InvalidArgument("the projection needs a nonempty block set".into()));
    }
    if !a.is_subset_of(BlockSet::full(target.k())) {
        return Err(Error::InvalidArgument(format!("{a:?} is not a subset of the blocks")));
    }
    check_size(target)?;
    Ok(HoeffdingProjection { target: target.clone(), phi: phi.clone(), a })
}

impl HoeffdingProjection {
    pub fn blocks(&self) -> BlockSet {
        self.a
    }

    /// `x_a` holds one point per block of `A`, in ascending block order.
    pub fn eval(&self, x_a: &[&[f64]]) -> Result<f64> {
        let a_blocks: Vec<usize> = self.a.blocks().collect();
        if x_a.len() != a_blocks.len() {
            return Err(Error::InvalidArgument(format!("expected {} points, got {}", a_blocks.len(), x_a.len())));
        }
        let mut acc = CompensatedSum::new();
        for b in self.a.subsets() {
            let sign = if (self.a.len() - b.len()).is_multiple_of(2) { 1.0 } else { -1.0 };
            acc.add(sign * self.conditional_mean(b, &a_blocks, x_a)?);
        }
        Ok(acc.value())
    }

    fn conditional_mean(&self, b: BlockSet, a_blocks: &[usize], x_a: &[&[f64]]) -> Result<f64> {
        let k = self.target.k();
        let free: Vec<usize> = (0..k).filter(|&x| !b.contains(x)).collect();
        let dims: Vec<usize> = free.iter().map(|&x| self.target.block(x).len()).collect();
        let mut pts: Vec<&[f64]> = vec![&[]; k];
        for (pos, &blk) in a_blocks.iter().enumerate() {
            if b.contains(blk) {
                pts[blk] = x_a[pos];
            }
        }
        let mut acc = CompensatedSum::new();
        let mut bad = false;
        for_each_tuple(&dims, |t| {
            let mut p = 1.0;
            for (&blk, &i) in free.iter().zip(t) {
                pts[blk] = self.target.block(blk).point(i);
                p *= self.target.block(blk).prob(i);
            }
            let v = self.phi.eval(&pts);
            bad |= !v.is_finite();
            acc.add(p * v);
        });
        if bad {
            return Err(Error::NonFinite { location: "projection evaluation".into() });
        }
        Ok(acc.value())
    }
}

#[cfg(test)]
mod tests {
    use super::super::discrete::DiscreteBlock;
    use super::*;
    use crate::factorized::SopFunction;

    fn bernoulli_pair() -> DiscreteProductTarget {
        DiscreteProductTarget::iid(DiscreteBlock::uniform(vec![0.0, 1.0]).unwrap(), 2).unwrap()
    }

    #[test]
    fn bernoulli_product_single_sample() {
        let phi: TestFunction = SopFunction::product_of_coordinates(2).into();
        let r = exact_variance(&bernoulli_pair(), &phi, &[1, 1]).unwrap();
        assert!((r.finite_sample - 3.0 / 16.0).abs() < 1e-15);
        assert!((r.asymptotic_std - 3.0 / 16.0).abs() < 1e-15);
        assert!((r.asymptotic_pf - 2.0 / 16.0).abs() < 1e-15);
        assert_eq!(r.terms.len(), 2 + 2 + 4);
    }

    #[test]
    fn constant_has_no_variance() {
        let phi = TestFunction::constant(2.0);
        let r = exact_variance(&bernoulli_pair(), &phi, &[3, 2]).unwrap();
        assert_eq!(r.finite_sample, 0.0);
        assert!(r.terms.values().all(|&v| v == 0.0));
        assert_eq!(asymptotic_variances(&bernoulli_pair(), &phi).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn two_point_unit_blocks() {
        let block = DiscreteBlock::uniform(vec![0.0, 2.0]).unwrap();
        for k in 1..=6 {
            let t = DiscreteProductTarget::iid(block.clone(), k).unwrap();
            let phi: TestFunction = SopFunction::product_of_coordinates(k).into();
            let (pf, std) = asymptotic_variances(&t, &phi).unwrap();
            assert!((pf - k as f64).abs() < 1e-12);
            assert!((std - (2f64.powi(k as i32) - 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn additive_function_has_equal_variances() {
        let block = DiscreteBlock::scalar(vec![0.0, 1.0, 3.0], vec![0.2, 0.5, 0.3]).unwrap();
        let t = DiscreteProductTarget::iid(block, 3).unwrap();
        let phi = TestFunction::black_box(|x| x[0][0] + 2.0 * x[1][0] * x[1][0] - x[2][0]);
        let (pf, std) = asymptotic_variances(&t, &phi).unwrap();
        assert!((pf - std).abs() < 1e-12 * std);
    }

    #[test]
    fn projection_of_bernoulli_product() {
        let phi: TestFunction = SopFunction::product_of_coordinates(2).into();
        let psi = hoeffding_projection(&bernoulli_pair(), &phi, BlockSet::full(2)).unwrap();
        for &x1 in &[0.0, 1.0] {
            for &x2 in &[0.0, 1.0] {
                let expect = x1 * x2 - x1 / 2.0 - x2 / 2.0 + 0.25;
                assert!((psi.eval(&[&[x1], &[x2]]).unwrap() - expect).abs() < 1e-15);
            }
        }
        assert!(hoeffding_projection(&bernoulli_pair(), &phi, BlockSet::EMPTY).is_err());
    }

    #[test]
    fn wrong_sample_size_count_rejected() {
        let phi = TestFunction::constant(1.0);
        assert!(exact_variance(&bernoulli_pair(), &phi, &[1]).is_err());
        assert!(exact_variance(&bernoulli_pair(), &phi, &[1, 0]).is_err());
    }
}
