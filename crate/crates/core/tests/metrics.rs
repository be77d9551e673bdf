use prodform::diagnostics::{ks_statistic, w1_distance, Ecdf};
use proptest::prelude::*;

fn ecdf() -> impl Strategy<Value = Ecdf> {
    prop::collection::vec((-5.0f64..5.0, 0.01f64..1.0), 1..30).prop_map(|pairs| {
        let (x, w): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        Ecdf::from_weighted(&x, &w).unwrap()
    })
}

proptest! {
    #[test]
    fn distances_are_metrics(f in ecdf(), g in ecdf(), h in ecdf()) {
        let d = |a: &Ecdf, b: &Ecdf| (w1_distance(a, b).unwrap(), ks_statistic(a, b).unwrap());
        let (fg, kfg) = d(&f, &g);
        let (gf, kgf) = d(&g, &f);
        prop_assert!((fg - gf).abs() < 1e-12);
        prop_assert!((kfg - kgf).abs() < 1e-12);
        let (ff, kff) = d(&f, &f);
        prop_assert!(ff.abs() < 1e-15 && kff.abs() < 1e-15);
        let (fh, kfh) = d(&f, &h);
        let (gh, kgh) = d(&g, &h);
        prop_assert!(fh <= fg + gh + 1e-12);
        prop_assert!(kfh <= kfg + kgh + 1e-12);
        prop_assert!((0.0..=1.0).contains(&kfg));
    }

    #[test]
    fn shifting_a_sample_moves_w1_by_the_shift(xs in prop::collection::vec(-5.0f64..5.0, 1..20), c in 0.0f64..3.0) {
        let f = Ecdf::from_samples(&xs).unwrap();
        let moved: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let g = Ecdf::from_samples(&moved).unwrap();
        prop_assert!((w1_distance(&f, &g).unwrap() - c).abs() < 1e-9);
    }
}
