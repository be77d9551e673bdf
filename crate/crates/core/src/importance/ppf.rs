use crate::error::{Error, Result};
use crate::estimators::{
    exact_variance, product_form_estimate, standard_estimate, DiscreteBlock, DiscreteProductTarget, Estimate, EvalKind,
    MarginalSamples, PointSet, Strategy, TestFunction,
};
use crate::numeric::{sum, CompensatedSum};
use rayon::prelude::*;
use std::sync::Arc;

/// `phi(theta, .)` for each `theta`.
pub type ThetaTestFunction = Arc<dyn Fn(&[f64]) -> TestFunction + Send + Sync>;

/// Draws `theta^m ~ mu_0` and, for each, `N` conditionally independent
/// samples `X^{m,n}` of the product kernel at `theta^m`.
#[derive(Debug, Clone)]
pub struct ConditionalSamples {
    thetas: PointSet,
    x: Vec<MarginalSamples>,
}

impl ConditionalSamples {
    pub fn new(thetas: PointSet, x: Vec<MarginalSamples>) -> Result<Self> {
        if thetas.len() != x.len() || x.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{} theta values for {} conditional sample sets",
                thetas.len(),
                x.len()
            )));
        }
        let k = x[0].k();
        if x.iter().any(|s| s.k() != k) {
            return Err(Error::InvalidArgument("conditional sample sets differ in K".into()));
        }
        Ok(ConditionalSamples { thetas, x })
    }

    pub fn m(&self) -> usize {
        self.x.len()
    }

    pub fn k(&self) -> usize {
        self.x[0].k()
    }

    pub fn theta(&self, m: usize) -> &[f64] {
        self.thetas.get(m)
    }

    pub fn thetas(&self) -> &PointSet {
        &self.thetas
    }

    pub fn x(&self, m: usize) -> &MarginalSamples {
        &self.x[m]
    }

    /// First pair of coinciding theta values, if any.
    pub fn find_duplicate_theta(&self) -> Option<(usize, usize)> {
        let mut order: Vec<usize> = (0..self.m()).collect();
        let cmp = |a: &usize, b: &usize| {
            let (ta, tb) = (self.theta(*a), self.theta(*b));
            ta.iter()
                .zip(tb)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(b))
        };
        order.sort_by(cmp);
        order.windows(2).find(|w| self.theta(w[0]) == self.theta(w[1])).map(|w| (w[0].min(w[1]), w[0].max(w[1])))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PpfOptions {
    /// Accept coinciding theta draws. Off by default: with a discrete `mu_0`
    /// pooling the samples of equal thetas would give a better estimator.
    pub allow_duplicate_theta: bool,
}

/// `M^-1 sum_m mu_x^N(phi(theta^m, .))` with the inner product-form sums
/// evaluated by `strategy`.
pub fn ppf_estimate(cs: &ConditionalSamples, phi: &ThetaTestFunction, strategy: &Strategy) -> Result<Estimate> {
    ppf_estimate_with(cs, phi, strategy, PpfOptions::default())
}

pub fn ppf_estimate_with(
    cs: &ConditionalSamples,
    phi: &ThetaTestFunction,
    strategy: &Strategy,
    options: PpfOptions,
) -> Result<Estimate> {
    if !options.allow_duplicate_theta {
        if let Some((first, second)) = cs.find_duplicate_theta() {
            return Err(Error::DuplicateTheta { value: format!("{:?}", cs.theta(first)), first, second });
        }
    }
    let inner: Vec<Result<Estimate>> =
        (0..cs.m()).into_par_iter().map(|m| product_form_estimate(cs.x(m), &phi(cs.theta(m)), strategy)).collect();
    combine(inner, cs.m())
}

/// The plain two-level average `M^-1 sum_m N^-1 sum_n phi(theta^m, X^{m,n})`.
pub fn ppf_standard_estimate(cs: &ConditionalSamples, phi: &ThetaTestFunction) -> Result<Estimate> {
    let inner: Vec<Result<Estimate>> =
        (0..cs.m()).into_par_iter().map(|m| standard_estimate(cs.x(m), &phi(cs.theta(m)))).collect();
    combine(inner, cs.m())
}

fn combine(inner: Vec<Result<Estimate>>, m: usize) -> Result<Estimate> {
    let mut acc = CompensatedSum::new();
    let mut evals = 0;
    let mut used: Vec<usize> = Vec::new();
    let mut kind = EvalKind::Standard;
    for e in inner {
        let e = e?;
        acc.add(e.value);
        evals += e.n_phi_evals;
        if used.is_empty() {
            used = vec![0; e.n_samples_used.len()];
        }
        for (u, n) in used.iter_mut().zip(&e.n_samples_used) {
            *u += n;
        }
        kind = e.kind;
    }
    Ok(Estimate { value: acc.value() / m as f64, n_phi_evals: evals, n_samples_used: used, kind })
}

/// Exact variances of the partially product-form estimator and of the plain
/// two-level average, for `M` outer and `N` inner samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpfVariance {
    pub product_form: f64,
    pub standard: f64,
}

/// `theta_support` is `mu_0`; `kernels[i]` is the product kernel at its
/// `i`-th support point.
pub fn ppf_exact_variance(
    theta_support: &DiscreteBlock,
    kernels: &[DiscreteProductTarget],
    phi: &ThetaTestFunction,
    m: usize,
    n: usize,
) -> Result<PpfVariance> {
    if kernels.len() != theta_support.len() {
        return Err(Error::InvalidArgument(format!(
            "{} kernels for {} theta support points",
            kernels.len(),
            theta_support.len()
        )));
    }
    if m == 0 || n == 0 {
        return Err(Error::InvalidArgument("M and N must be positive".into()));
    }
    let mut means = Vec::with_capacity(kernels.len());
    let mut pf_inner = Vec::with_capacity(kernels.len());
    let mut std_inner = Vec::with_capacity(kernels.len());
    for (i, kernel) in kernels.iter().enumerate() {
        let f = phi(theta_support.point(i));
        let report = exact_variance(kernel, &f, &vec![n; kernel.k()])?;
        means.push(report.mean);
        pf_inner.push(report.finite_sample);
        std_inner.push(report.asymptotic_std / n as f64);
    }
    let p = theta_support.probs();
    let mu = sum(p.iter().zip(&means).map(|(p, m)| p * m));
    let outer = sum(p.iter().zip(&means).map(|(p, m)| p * (m - mu) * (m - mu)));
    let pf = outer + sum(p.iter().zip(&pf_inner).map(|(p, v)| p * v));
    let st = outer + sum(p.iter().zip(&std_inner).map(|(p, v)| p * v));
    Ok(PpfVariance { product_form: pf / m as f64, standard: st / m as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorized::SopFunction;

    fn grid() -> ConditionalSamples {
        ConditionalSamples::new(
            PointSet::scalars(vec![1.0, 2.0]),
            vec![
                MarginalSamples::from_scalars(vec![vec![0.0, 1.0], vec![0.0, 2.0]]).unwrap(),
                MarginalSamples::from_scalars(vec![vec![1.0, 3.0], vec![2.0, 4.0]]).unwrap(),
            ],
        )
        .unwrap()
    }

    fn theta_times_product() -> ThetaTestFunction {
        Arc::new(|t: &[f64]| {
            let th = t[0];
            TestFunction::black_box(move |x| th * x[0][0] * x[1][0])
        })
    }

    #[test]
    fn hand_grid() {
        // m=1: theta 1, mean of {0,0,0,2} = 0.5; m=2: theta 2, mean of {2,4,6,12} = 6
        let e = ppf_estimate(&grid(), &theta_times_product(), &Strategy::BruteForce).unwrap();
        assert!((e.value - (0.5 + 12.0) / 2.0).abs() < 1e-14);
        // aligned pairs: m=1 {0, 2} -> 1; m=2 {2, 12} -> 7 -> times theta 2 = 14
        let s = ppf_standard_estimate(&grid(), &theta_times_product()).unwrap();
        assert!((s.value - (1.0 + 14.0) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn single_theta_is_product_form() {
        let cs = ConditionalSamples::new(PointSet::scalars(vec![5.0]), vec![grid().x(0).clone()]).unwrap();
        let phi: ThetaTestFunction = Arc::new(|_: &[f64]| SopFunction::product_of_coordinates(2).into());
        let e = ppf_estimate(&cs, &phi, &Strategy::SopFastPath).unwrap();
        assert_eq!(e.value, 0.5);
    }

    #[test]
    fn duplicate_theta_rejected_unless_allowed() {
        let cs = ConditionalSamples::new(PointSet::scalars(vec![1.0, 3.0, 1.0]), vec![grid().x(0).clone(); 3]).unwrap();
        match ppf_estimate(&cs, &theta_times_product(), &Strategy::BruteForce) {
            Err(Error::DuplicateTheta { first: 0, second: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let opts = PpfOptions { allow_duplicate_theta: true };
        assert!(ppf_estimate_with(&cs, &theta_times_product(), &Strategy::BruteForce, opts).is_ok());
    }

    #[test]
    fn theta_only_function_has_outer_variance_only() {
        let mu0 = DiscreteBlock::scalar(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let kern = DiscreteProductTarget::iid(DiscreteBlock::uniform(vec![0.0, 1.0]).unwrap(), 2).unwrap();
        let phi: ThetaTestFunction = Arc::new(|t: &[f64]| TestFunction::constant(t[0]));
        let v = ppf_exact_variance(&mu0, &[kern.clone(), kern], &phi, 4, 3).unwrap();
        assert!((v.product_form - 0.25 / 4.0).abs() < 1e-15);
        assert!((v.standard - 0.25 / 4.0).abs() < 1e-15);
    }
}
