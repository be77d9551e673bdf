mod common;

use common::{instances, Instance};
use prodform::diagnostics::{brute_force_oracle, DEFAULT_ORACLE_CAP};
use prodform::estimators::{
    standard_estimate, DiscreteBlock, DiscreteProductTarget, MarginalSamples, PointSet, Strategy, TestFunction,
};
use prodform::importance::{
    pf_is_estimate, ppf_estimate_with, ppf_exact_variance, ppf_standard_estimate, ConditionalSamples, LogBlockFn,
    LogWeightModel, PpfOptions, ThetaTestFunction,
};
use proptest::prelude::{prop, prop_assert, proptest, Just, ProptestConfig};
use proptest::strategy::Strategy as _;
use std::sync::Arc;

/// Block-major stages for `n` draws of each block of `target`.
fn stages(target: &DiscreteProductTarget, n: usize) -> Vec<Vec<f64>> {
    (0..target.k()).flat_map(|k| std::iter::repeat_n(target.block(k).probs().to_vec(), n)).collect()
}

fn realize(target: &DiscreteProductTarget, n: usize, idx: &[usize]) -> MarginalSamples {
    let blocks = (0..target.k())
        .map(|k| {
            let b = target.block(k);
            PointSet::scalars(idx[k * n..(k + 1) * n].iter().map(|&j| b.point(j)[0]).collect())
        })
        .collect();
    MarginalSamples::new(blocks).unwrap()
}

fn exp_weights(k: usize, slopes: Vec<f64>) -> LogWeightModel {
    let terms: Vec<LogBlockFn> = (0..k)
        .map(|i| {
            let c = slopes[i];
            Arc::new(move |_: &[f64], x: &[f64]| c * x[0]) as LogBlockFn
        })
        .collect();
    LogWeightModel::factorized(None, terms)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn product_form_is_unbiased_and_no_worse(
        (inst, slopes) in instances(3, 3, 2, true)
            .prop_flat_map(|i| { let k = i.k(); (Just(i), prop::collection::vec(-1.0f64..1.0, k)) })
    ) {
        let target = inst.target();
        let n = inst.n[0];
        let phi = inst.phi();
        let w = exp_weights(inst.k(), slopes.clone());
        let weighted = {
            let (phi, slopes) = (phi.clone(), slopes.clone());
            TestFunction::black_box(move |x| {
                let lw: f64 = x.iter().zip(&slopes).map(|(p, c)| c * p[0]).sum();
                phi.eval(x) * lw.exp()
            })
        };
        let st = stages(&target, n);
        let pf = brute_force_oracle(&st, DEFAULT_ORACLE_CAP, |idx| {
            Ok(pf_is_estimate(&realize(&target, n, idx), &w, &phi, &Strategy::BruteForce)?.value)
        }).unwrap();
        let std = brute_force_oracle(&st, DEFAULT_ORACLE_CAP, |idx| {
            Ok(standard_estimate(&realize(&target, n, idx), &weighted)?.value)
        }).unwrap();
        let exact = weighted_mean(&inst, &slopes);
        let scale = exact.abs().max(1.0);
        prop_assert!((pf.exact_mean - exact).abs() < 1e-12 * scale, "{} vs {exact}", pf.exact_mean);
        prop_assert!((std.exact_mean - exact).abs() < 1e-12 * scale);
        prop_assert!(pf.exact_variance <= std.exact_variance * (1.0 + 1e-12) + 1e-15);
    }
}

/// `mu(w phi)` by enumeration.
fn weighted_mean(inst: &Instance, slopes: &[f64]) -> f64 {
    let support = inst.support();
    let mut acc = 0.0;
    for (flat, v) in inst.table.iter().enumerate() {
        let mut rem = flat;
        let mut p = 1.0;
        let mut lw = 0.0;
        for k in (0..support.len()).rev() {
            let j = rem % support[k];
            p *= inst.probs[k][j];
            lw += slopes[k] * j as f64;
            rem /= support[k];
        }
        acc += p * v * f64::exp(lw);
    }
    acc
}

/// Exact moments of a two-level estimator by the law of total variance: the
/// outer draws are enumerated and, for each, the inner draws given them.
fn two_level_oracle(
    theta: &DiscreteBlock,
    kernels: &[DiscreteProductTarget],
    m: usize,
    n: usize,
    est: impl Fn(&ConditionalSamples) -> f64 + Sync,
) -> (f64, f64) {
    let conditional = |ti: &[usize]| {
        let inner: Vec<Vec<f64>> = ti.iter().flat_map(|&t| stages(&kernels[t], n)).collect();
        brute_force_oracle(&inner, DEFAULT_ORACLE_CAP, |xi| {
            let mut offset = 0;
            let xs: Vec<MarginalSamples> = ti
                .iter()
                .map(|&t| {
                    let len = kernels[t].k() * n;
                    let s = realize(&kernels[t], n, &xi[offset..offset + len]);
                    offset += len;
                    s
                })
                .collect();
            let thetas = PointSet::scalars(ti.iter().map(|&t| theta.point(t)[0]).collect());
            Ok(est(&ConditionalSamples::new(thetas, xs)?))
        })
    };
    let outer = vec![theta.probs().to_vec(); m];
    let means = brute_force_oracle(&outer, DEFAULT_ORACLE_CAP, |ti| Ok(conditional(ti)?.exact_mean)).unwrap();
    let vars = brute_force_oracle(&outer, DEFAULT_ORACLE_CAP, |ti| Ok(conditional(ti)?.exact_variance)).unwrap();
    (means.exact_mean, means.exact_variance + vars.exact_mean)
}

fn ppf_instance() -> (DiscreteBlock, Vec<DiscreteProductTarget>, ThetaTestFunction) {
    let theta = DiscreteBlock::scalar(vec![0.5, 2.0], vec![0.4, 0.6]).unwrap();
    let kernels = vec![
        DiscreteProductTarget::new(vec![
            DiscreteBlock::scalar(vec![0.0, 1.0], vec![0.3, 0.7]).unwrap(),
            DiscreteBlock::scalar(vec![-1.0, 2.0], vec![0.5, 0.5]).unwrap(),
        ])
        .unwrap(),
        DiscreteProductTarget::new(vec![
            DiscreteBlock::scalar(vec![1.0, 3.0], vec![0.9, 0.1]).unwrap(),
            DiscreteBlock::scalar(vec![0.0, 1.0], vec![0.2, 0.8]).unwrap(),
        ])
        .unwrap(),
    ];
    let phi: ThetaTestFunction = Arc::new(|t: &[f64]| {
        let th = t[0];
        TestFunction::black_box(move |x| (th * x[0][0] * x[1][0]).exp() - x[0][0])
    });
    (theta, kernels, phi)
}

#[test]
fn partially_product_form_variance_matches_enumeration() {
    let (theta, kernels, phi) = ppf_instance();
    let opts = PpfOptions { allow_duplicate_theta: true };
    for (m, n) in [(1, 1), (1, 2), (2, 2), (3, 1)] {
        let formula = ppf_exact_variance(&theta, &kernels, &phi, m, n).unwrap();
        let (mean_pf, var_pf) = two_level_oracle(&theta, &kernels, m, n, |cs| {
            ppf_estimate_with(cs, &phi, &Strategy::BruteForce, opts).unwrap().value
        });
        let (mean_std, var_std) =
            two_level_oracle(&theta, &kernels, m, n, |cs| ppf_standard_estimate(cs, &phi).unwrap().value);
        assert!((mean_pf - mean_std).abs() < 1e-12, "{mean_pf} vs {mean_std}");
        assert!(
            (formula.product_form - var_pf).abs() < 1e-12 * var_pf.max(1.0),
            "M={m} N={n}: {} vs {var_pf}",
            formula.product_form
        );
        assert!(
            (formula.standard - var_std).abs() < 1e-12 * var_std.max(1.0),
            "M={m} N={n}: {} vs {var_std}",
            formula.standard
        );
        assert!(var_pf <= var_std * (1.0 + 1e-12));
    }
}
