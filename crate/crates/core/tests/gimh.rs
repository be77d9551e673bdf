use prodform::diagnostics::{brute_force_oracle, DEFAULT_ORACLE_CAP};
use prodform::estimators::{DiscreteBlock, MarginalSamples, PointSet};
use prodform::importance::{LogBlockFn, LogWeightModel};
use prodform::mcmc::{density_estimate, gimh_chain, DensityMode, DiscreteUniformProposal, GimhConfig};
use prodform::{Dist1D, SimRng};
use std::sync::Arc;

/// `w(theta, x) = prod_k exp(theta x_k)` against `N(0, 1)` latents, so the
/// marginal is proportional to `exp(K theta^2 / 2)`.
fn tilt_weight(k: usize) -> LogWeightModel {
    let term: LogBlockFn = Arc::new(|t: &[f64], x: &[f64]| t[0] * x[0]);
    LogWeightModel::factorized(None, vec![term; k])
}

fn normal_kernel(k: usize) -> impl Fn(&[f64], usize, &SimRng) -> prodform::Result<MarginalSamples> {
    move |_: &[f64], n: usize, rng: &SimRng| {
        let d = Dist1D::normal(0.0, 1.0)?;
        MarginalSamples::new((0..k).map(|b| PointSet::scalars(d.sample_n(&mut rng.split(b as u64), n))).collect())
    }
}

fn total_variation(trace_theta: &[f64], points: &[f64], target: &[f64]) -> f64 {
    let n = trace_theta.len() as f64;
    points
        .iter()
        .zip(target)
        .map(|(p, t)| {
            let freq = trace_theta.iter().filter(|&&x| x == *p).count() as f64 / n;
            (freq - t).abs()
        })
        .sum::<f64>()
        / 2.0
}

#[test]
fn three_point_chain_reaches_the_exact_target() {
    let k = 2;
    let points = [0.0, 0.5, 1.0];
    let raw: Vec<f64> = points.iter().map(|t: &f64| (k as f64 * t * t / 2.0).exp()).collect();
    let z: f64 = raw.iter().sum();
    let target: Vec<f64> = raw.iter().map(|r| r / z).collect();
    for (mode, seed) in [(DensityMode::ProductForm, 1), (DensityMode::Standard, 2)] {
        let mut proposal = DiscreteUniformProposal { points: points.iter().map(|&p| vec![p]).collect() };
        let cfg = GimhConfig { n_inner: 10, mode, steps: 1_000_000, burn_in_fraction: 0.0, ..GimhConfig::default() };
        let trace = gimh_chain(
            &normal_kernel(k),
            &tilt_weight(k),
            &mut proposal,
            &[0.5],
            &cfg,
            &mut SimRng::from_seed_u64(seed),
        )
        .unwrap();
        let tv = total_variation(&trace.kept_coordinate(0), &points, &target);
        assert!(tv < 0.02, "{mode:?}: TV {tv}");
    }
}

#[test]
fn density_estimates_are_unbiased() {
    let theta = [0.7];
    let blocks = [
        DiscreteBlock::scalar(vec![-1.0, 0.5, 2.0], vec![0.2, 0.5, 0.3]).unwrap(),
        DiscreteBlock::scalar(vec![0.0, 1.0], vec![0.6, 0.4]).unwrap(),
    ];
    let prior: prodform::importance::LogThetaFn = Arc::new(|t: &[f64]| -t[0]);
    let w = LogWeightModel::factorized(
        Some(prior),
        vec![Arc::new(|t: &[f64], x: &[f64]| t[0] * x[0]), Arc::new(|t: &[f64], x: &[f64]| -(x[0] - t[0]).powi(2))],
    );
    let exact: f64 = (-theta[0] as f64).exp()
        * blocks[0].probs().iter().enumerate().map(|(j, p)| p * (theta[0] * blocks[0].point(j)[0]).exp()).sum::<f64>()
        * blocks[1]
            .probs()
            .iter()
            .enumerate()
            .map(|(j, p)| p * (-(blocks[1].point(j)[0] - theta[0]).powi(2)).exp())
            .sum::<f64>();
    for n in 1..=3 {
        let stages: Vec<Vec<f64>> = blocks.iter().flat_map(|b| std::iter::repeat(b.probs().to_vec()).take(n)).collect();
        let realize = |idx: &[usize]| {
            MarginalSamples::new(
                blocks
                    .iter()
                    .enumerate()
                    .map(|(k, b)| PointSet::scalars(idx[k * n..(k + 1) * n].iter().map(|&j| b.point(j)[0]).collect()))
                    .collect(),
            )
            .unwrap()
        };
        let mut vars = Vec::new();
        for mode in [DensityMode::Standard, DensityMode::ProductForm] {
            let r = brute_force_oracle(&stages, DEFAULT_ORACLE_CAP, |idx| {
                Ok(density_estimate(&theta, &realize(idx), &w, mode)?.exp())
            })
            .unwrap();
            assert!((r.exact_mean - exact).abs() < 1e-12 * exact, "{mode:?} N={n}: {} vs {exact}", r.exact_mean);
            vars.push(r.exact_variance);
        }
        assert!(vars[1] <= vars[0] * (1.0 + 1e-12), "N={n}: {vars:?}");
    }
}

/// Batch-means estimate of the asymptotic variance of the chain average, with
/// its standard error.
fn batch_means(xs: &[f64], batches: usize) -> (f64, f64) {
    let len = xs.len() / batches;
    let means: Vec<f64> = (0..batches).map(|b| xs[b * len..(b + 1) * len].iter().sum::<f64>() / len as f64).collect();
    let m = means.iter().sum::<f64>() / batches as f64;
    let v = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (batches - 1) as f64 * len as f64;
    (v, v * (2.0 / (batches - 1) as f64).sqrt())
}

#[test]
fn product_form_chain_mixes_no_worse_on_the_hierarchical_model() {
    use prodform::mcmc::{HierarchicalModel, LogRandomWalk};
    let mut rng = SimRng::from_seed_u64(21);
    let y = HierarchicalModel::simulate_observations(20, 1.0, &mut rng);
    let model = HierarchicalModel::new(y, 1.0, 1.0).unwrap();
    let kernel = |t: &[f64], n: usize, r: &SimRng| model.sample_kernel(t[0], n, r);
    let w = model.gimh_weight();
    let mut out = Vec::new();
    for mode in [DensityMode::Standard, DensityMode::ProductForm] {
        // same fixed proposal for both chains
        let mut q = LogRandomWalk { scale: 0.5 };
        let cfg = GimhConfig { n_inner: 20, mode, steps: 40_000, burn_in_fraction: 0.0, ..GimhConfig::default() };
        let t = gimh_chain(&kernel, &w, &mut q, &[1.0], &cfg, &mut SimRng::from_seed_u64(5)).unwrap();
        assert_eq!(q.scale, 0.5);
        out.push(batch_means(&t.coordinate(0)[4000..], 20));
    }
    let ((v_std, se_std), (v_pf, se_pf)) = (out[0], out[1]);
    assert!(
        v_pf <= v_std + 2.0 * (se_std * se_std + se_pf * se_pf).sqrt(),
        "pf {v_pf} +- {se_pf}, standard {v_std} +- {se_std}"
    );
}
