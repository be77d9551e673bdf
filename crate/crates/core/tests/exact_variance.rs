mod common;

use common::{instances, Instance};
use prodform::diagnostics::{oracle_product_target, OracleEstimator, DEFAULT_ORACLE_CAP};
use prodform::estimators::{asymptotic_variances, exact_variance, hoeffding_projection, BlockSet, Strategy};
use prodform::numeric::CompensatedSum;
use proptest::prelude::*;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variance_formula_matches_enumeration(inst in instances(3, 3, 3, false)) {
        let target = inst.target();
        let phi = inst.phi();
        let report = exact_variance(&target, &phi, &inst.n).unwrap();
        let oracle = oracle_product_target(
            &target, &phi, &inst.n, &OracleEstimator::ProductForm(Strategy::BruteForce), DEFAULT_ORACLE_CAP,
        ).unwrap();
        prop_assert!(rel_close(report.finite_sample, oracle.exact_variance, 1e-12),
            "{} vs {}", report.finite_sample, oracle.exact_variance);
        prop_assert!(rel_close(oracle.exact_mean, inst.mean(), 1e-12));
        prop_assert!(rel_close(report.mean, inst.mean(), 1e-12));
    }

    #[test]
    fn product_form_never_loses_to_standard(inst in instances(3, 3, 3, true)) {
        let target = inst.target();
        let phi = inst.phi();
        let pf = oracle_product_target(
            &target, &phi, &inst.n, &OracleEstimator::ProductForm(Strategy::BruteForce), DEFAULT_ORACLE_CAP,
        ).unwrap();
        let std = oracle_product_target(&target, &phi, &inst.n, &OracleEstimator::Standard, DEFAULT_ORACLE_CAP).unwrap();
        prop_assert!(pf.exact_variance <= std.exact_variance * (1.0 + 1e-12) + 1e-15, "{} vs {}", pf.exact_variance, std.exact_variance);
        let report = exact_variance(&target, &phi, &inst.n).unwrap();
        prop_assert!(rel_close(report.standard_variance(inst.n[0]), std.exact_variance, 1e-12), "{} vs {}", report.standard_variance(inst.n[0]), std.exact_variance);
        let (sigma_sq_pf, sigma_sq) = asymptotic_variances(&target, &phi).unwrap();
        prop_assert!(sigma_sq_pf <= sigma_sq * (1.0 + 1e-12) + 1e-15);
    }

    #[test]
    fn hoeffding_terms_integrate_to_zero(inst in instances(3, 3, 1, false)) {
        check_orthogonality(&inst);
    }
}

fn check_orthogonality(inst: &Instance) {
    let target = inst.target();
    let phi = inst.phi();
    let support = inst.support();
    for a in BlockSet::full(inst.k()).subsets().filter(|a| !a.is_empty()) {
        let psi = hoeffding_projection(&target, &phi, a).unwrap();
        let blocks: Vec<usize> = a.blocks().collect();
        // integrating out any nonempty B within A leaves zero at every point of A \ B
        for b in a.subsets().filter(|b| !b.is_empty()) {
            let dims: Vec<usize> = blocks.iter().map(|&k| support[k]).collect();
            let mut outer = vec![0usize; blocks.len()];
            loop {
                let mut acc = CompensatedSum::new();
                let mut inner = outer.clone();
                let free: Vec<usize> = (0..blocks.len()).filter(|&i| b.contains(blocks[i])).collect();
                let mut done = false;
                for i in &free {
                    inner[*i] = 0;
                }
                while !done {
                    let p: f64 = free.iter().map(|&i| inst.probs[blocks[i]][inner[i]]).product();
                    let pts: Vec<[f64; 1]> = inner.iter().map(|&j| [j as f64]).collect();
                    let refs: Vec<&[f64]> = pts.iter().map(|p| &p[..]).collect();
                    acc.add(p * psi.eval(&refs).unwrap());
                    done = true;
                    for &i in free.iter().rev() {
                        inner[i] += 1;
                        if inner[i] < dims[i] {
                            done = false;
                            break;
                        }
                        inner[i] = 0;
                    }
                }
                assert!(acc.value().abs() < 1e-12, "A={a:?} B={b:?}: {}", acc.value());
                // advance the blocks of A outside B
                let fixed: Vec<usize> = (0..blocks.len()).filter(|&i| !b.contains(blocks[i])).collect();
                let mut carry = true;
                for &i in fixed.iter().rev() {
                    outer[i] += 1;
                    if outer[i] < dims[i] {
                        carry = false;
                        break;
                    }
                    outer[i] = 0;
                }
                if carry {
                    break;
                }
            }
        }
    }
}

#[test]
fn orthogonality_on_a_fixed_instance() {
    let inst = Instance {
        probs: vec![vec![0.2, 0.8], vec![0.5, 0.3, 0.2], vec![1.0]],
        table: vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5],
        n: vec![1, 1, 1],
    };
    check_orthogonality(&inst);
}

#[test]
fn single_sample_variance_is_the_plain_variance() {
    let inst = Instance { probs: vec![vec![0.5, 0.5], vec![0.5, 0.5]], table: vec![0.0, 0.0, 0.0, 1.0], n: vec![1, 1] };
    let r = exact_variance(&inst.target(), &inst.phi(), &[1, 1]).unwrap();
    assert!((r.finite_sample - 3.0 / 16.0).abs() < 1e-15);
    assert!((r.asymptotic_std - 3.0 / 16.0).abs() < 1e-15);
    // sigma_x^2 = Var(E[phi|x1]) + Var(E[phi|x2]) = 2 * 1/16
    assert!((r.asymptotic_pf - 1.0 / 8.0).abs() < 1e-15);
}
