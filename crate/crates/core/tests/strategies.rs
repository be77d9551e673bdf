use prodform::estimators::{product_form_estimate, MarginalSamples, Strategy, TestFunction};
use prodform::factorized::{plan_elimination, Factor, FactorGraphFunction, Heuristic, SopFunction};
use proptest::prelude::{any, prop, prop_assert, proptest, ProptestConfig};
use proptest::strategy::Strategy as _;

#[derive(Debug, Clone)]
struct SopSpec {
    coeffs: Vec<f64>,
    // (kind, parameter) per term and block
    factors: Vec<Vec<(u8, f64)>>,
}

fn sop_spec(k: usize) -> impl proptest::strategy::Strategy<Value = SopSpec> {
    (1usize..=3).prop_flat_map(move |j| {
        (
            prop::collection::vec(-2.0f64..2.0, j),
            prop::collection::vec(prop::collection::vec((0u8..4, -1.5f64..1.5), k), j),
        )
            .prop_map(|(coeffs, factors)| SopSpec { coeffs, factors })
    })
}

fn build_sop(spec: &SopSpec) -> SopFunction {
    let factors = spec
        .factors
        .iter()
        .map(|row| {
            row.iter()
                .map(|&(kind, c)| match kind {
                    0 => Factor::One,
                    1 => Factor::Identity,
                    2 => Factor::Power(2),
                    _ => Factor::custom(move |x| (c * x[0]).cos() + 1.5),
                })
                .collect()
        })
        .collect();
    SopFunction::new(factors, spec.coeffs.clone()).unwrap()
}

fn samples(k: usize) -> impl proptest::strategy::Strategy<Value = MarginalSamples> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 1..=8), k)
        .prop_map(|blocks| MarginalSamples::from_scalars(blocks).unwrap())
}

fn abs_scale(samples: &MarginalSamples, f: &TestFunction) -> f64 {
    let g = f.clone();
    let abs = TestFunction::black_box(move |x| g.eval(x).abs());
    product_form_estimate(samples, &abs, &Strategy::BruteForce).unwrap().value
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn sop_fast_path_matches_brute_force(
        (spec, s) in (1usize..=5).prop_flat_map(|k| (sop_spec(k), samples(k)))
    ) {
        let f: TestFunction = build_sop(&spec).into();
        let fast = product_form_estimate(&s, &f, &Strategy::SopFastPath).unwrap().value;
        let brute = product_form_estimate(&s, &f.to_black_box(), &Strategy::BruteForce).unwrap().value;
        let scale = abs_scale(&s, &f).max(f64::MIN_POSITIVE);
        prop_assert!((fast - brute).abs() <= 1e-10 * scale, "{fast} vs {brute}");
    }

    #[test]
    fn elimination_matches_brute_force(
        (scopes, params, s, fill) in (2usize..=5).prop_flat_map(|k| (
            prop::collection::vec(prop::collection::btree_set(0..k, 1..=3), 1..=5),
            prop::collection::vec(-1.0f64..1.0, 5),
            samples(k),
            any::<bool>(),
        ))
    ) {
        let k = s.k();
        let mut g = FactorGraphFunction::new(k);
        for (i, scope) in scopes.iter().enumerate() {
            let scope: Vec<usize> = scope.iter().copied().collect();
            let c = params[i];
            g = g.with_factor(&scope, move |x| {
                let t: f64 = x.iter().map(|p| p[0]).sum();
                1.2 + (c * t + 0.3).sin()
            }).unwrap();
        }
        let heuristic = if fill { Heuristic::MinFill } else { Heuristic::MinDegree };
        let plan = plan_elimination(&g, heuristic, &[], &s.sizes());
        let f: TestFunction = g.into();
        let elim = product_form_estimate(&s, &f, &Strategy::Eliminate(plan)).unwrap().value;
        let brute = product_form_estimate(&s, &f.to_black_box(), &Strategy::BruteForce).unwrap().value;
        prop_assert!((elim - brute).abs() <= 1e-10 * brute.abs(), "{elim} vs {brute}");
    }

    #[test]
    fn estimate_is_invariant_to_sample_order(
        (s, seed) in (1usize..=3).prop_flat_map(|k| (samples(k), any::<u64>()))
    ) {
        let f = TestFunction::black_box(|x| {
            let t: f64 = x.iter().map(|p| p[0]).sum();
            (t * 1.3).sin() * t.exp()
        });
        let base = product_form_estimate(&s, &f, &Strategy::BruteForce).unwrap().value;
        // reverse or rotate each block depending on the seed
        let blocks: Vec<Vec<f64>> = (0..s.k())
            .map(|k| {
                let mut v: Vec<f64> = s.block(k).as_slice().to_vec();
                let r = (seed >> (8 * k)) as usize % v.len();
                v.rotate_left(r);
                if (seed >> (8 * k + 7)) & 1 == 1 {
                    v.reverse();
                }
                v
            })
            .collect();
        let shuffled = MarginalSamples::from_scalars(blocks).unwrap();
        let other = product_form_estimate(&shuffled, &f, &Strategy::BruteForce).unwrap().value;
        let scale = abs_scale(&s, &f).max(f64::MIN_POSITIVE);
        prop_assert!((base - other).abs() <= 1e-12 * scale);
    }

    #[test]
    fn estimate_is_invariant_to_block_relabeling(s in samples(3)) {
        let f = TestFunction::black_box(|x| x[0][0] * (x[1][0] - x[2][0]).exp());
        // the same function with blocks listed in the order (2, 0, 1)
        let g = TestFunction::black_box(|x| x[1][0] * (x[2][0] - x[0][0]).exp());
        let permuted = MarginalSamples::new(vec![s.block(2).clone(), s.block(0).clone(), s.block(1).clone()]).unwrap();
        let a = product_form_estimate(&s, &f, &Strategy::BruteForce).unwrap().value;
        let b = product_form_estimate(&permuted, &g, &Strategy::BruteForce).unwrap().value;
        let scale = abs_scale(&s, &f).max(f64::MIN_POSITIVE);
        prop_assert!((a - b).abs() <= 1e-12 * scale);
    }
}

#[test]
fn mismatched_strategy_is_rejected() {
    let s = MarginalSamples::from_scalars(vec![vec![1.0, 2.0], vec![3.0]]).unwrap();
    let f = TestFunction::black_box(|x| x[0][0]);
    assert!(product_form_estimate(&s, &f, &Strategy::SopFastPath).is_err());
}
