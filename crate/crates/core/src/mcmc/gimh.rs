use super::{adapt_log_scale, burn_in_steps, ChainTrace};
use crate::distributions::{standard_normal, SimRng};
use crate::error::{Error, Result};
use crate::estimators::MarginalSamples;
use crate::importance::LogWeightModel;
use crate::numeric::{for_each_tuple, log_sum_exp, product_u128};

/// How the pseudo-marginal density is estimated from `N` inner samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityMode {
    /// Average of `w(theta, X^n)` over the `N` aligned samples.
    Standard,
    /// Average of `w(theta, X^n)` over all `N^K` index tuples.
    ProductForm,
}

/// Draws inner samples `X ~ M(theta, .)^N`, one block per latent dimension.
pub trait LatentKernel {
    fn sample(&self, theta: &[f64], n: usize, rng: &SimRng) -> Result<MarginalSamples>;
}

impl<F> LatentKernel for F
where
    F: Fn(&[f64], usize, &SimRng) -> Result<MarginalSamples>,
{
    fn sample(&self, theta: &[f64], n: usize, rng: &SimRng) -> Result<MarginalSamples> {
        self(theta, n, rng)
    }
}

/// Proposal `Q(theta, .)` over the parameter.
pub trait ThetaProposal {
    fn propose(&self, theta: &[f64], rng: &mut SimRng) -> Vec<f64>;
    /// `log Q(to, from) - log Q(from, to)`.
    fn log_q_ratio(&self, from: &[f64], to: &[f64]) -> f64;
    fn scale(&self) -> f64;
    fn set_scale(&mut self, scale: f64);
    fn adaptive(&self) -> bool {
        true
    }
}

/// `theta' = theta * exp(scale * Z)` coordinate-wise, for positive parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRandomWalk {
    pub scale: f64,
}

impl ThetaProposal for LogRandomWalk {
    fn propose(&self, theta: &[f64], rng: &mut SimRng) -> Vec<f64> {
        theta.iter().map(|t| t * (self.scale * standard_normal(rng)).exp()).collect()
    }

    fn log_q_ratio(&self, from: &[f64], to: &[f64]) -> f64 {
        // the log-normal density carries a 1/theta' Jacobian
        to.iter().zip(from).map(|(b, a)| b.ln() - a.ln()).sum()
    }

    fn scale(&self) -> f64 {
        self.scale
    }

    fn set_scale(&mut self, scale: f64) {
        self.scale = scale;
    }
}

/// `theta' = theta + scale * Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianRandomWalk {
    pub scale: f64,
}

impl ThetaProposal for GaussianRandomWalk {
    fn propose(&self, theta: &[f64], rng: &mut SimRng) -> Vec<f64> {
        theta.iter().map(|t| t + self.scale * standard_normal(rng)).collect()
    }

    fn log_q_ratio(&self, _: &[f64], _: &[f64]) -> f64 {
        0.0
    }

    fn scale(&self) -> f64 {
        self.scale
    }

    fn set_scale(&mut self, scale: f64) {
        self.scale = scale;
    }
}

/// Independent uniform proposal over a finite set of parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteUniformProposal {
    pub points: Vec<Vec<f64>>,
}

impl ThetaProposal for DiscreteUniformProposal {
    fn propose(&self, _: &[f64], rng: &mut SimRng) -> Vec<f64> {
        let i = ((rng.uniform_open() * self.points.len() as f64) as usize).min(self.points.len() - 1);
        self.points[i].clone()
    }

    fn log_q_ratio(&self, _: &[f64], _: &[f64]) -> f64 {
        0.0
    }

    fn scale(&self) -> f64 {
        1.0
    }

    fn set_scale(&mut self, _: f64) {}

    fn adaptive(&self) -> bool {
        false
    }
}

/// Log of the unbiased density estimate at `theta` from `inner`.
///
/// Returns `-inf` when every weight is zero. A factorized weight makes the
/// product-form estimate cost `O(K N)`; a joint weight falls back to
/// enumerating the `N^K` tuples (capped at 10^8).
pub fn density_estimate(theta: &[f64], inner: &MarginalSamples, w: &LogWeightModel, mode: DensityMode) -> Result<f64> {
    let check = |lw: f64, loc: &dyn Fn() -> String| -> Result<f64> { crate::importance::check_log_weight(lw, loc) };
    match mode {
        DensityMode::Standard => {
            let n = inner
                .aligned_len()
                .ok_or_else(|| Error::InvalidArgument("the standard estimate needs equal block sizes".into()))?;
            let mut lws = Vec::with_capacity(n);
            let mut pts: Vec<&[f64]> = Vec::with_capacity(inner.k());
            for i in 0..n {
                pts.clear();
                pts.extend((0..inner.k()).map(|k| inner.point(k, i)));
                lws.push(check(w.log_weight(theta, &pts), &|| format!("inner sample {i}"))?);
            }
            Ok(log_sum_exp(&lws) - (n as f64).ln())
        }
        DensityMode::ProductForm if w.is_factorized() => {
            let mut acc = check(w.theta_term(theta), &|| "theta term".to_string())?;
            let mut g = Vec::new();
            for k in 0..inner.k() {
                g.clear();
                for (n, x) in inner.block(k).iter().enumerate() {
                    g.push(check(w.block_term(k, theta, x), &|| format!("block {k}, sample {n}"))?);
                }
                acc += log_sum_exp(&g) - (g.len() as f64).ln();
            }
            Ok(if acc.is_nan() { f64::NEG_INFINITY } else { acc })
        }
        DensityMode::ProductForm => {
            let sizes = inner.sizes();
            let total = product_u128(sizes.iter().copied());
            let cap = 100_000_000u128;
            if total > cap {
                return Err(Error::CapExceeded { what: "product-form density estimate", required: total, cap });
            }
            let mut lws = Vec::with_capacity(total as usize);
            let mut pts: Vec<&[f64]> = Vec::with_capacity(inner.k());
            let mut err = None;
            for_each_tuple(&sizes, |t| {
                if err.is_some() {
                    return;
                }
                pts.clear();
                pts.extend(t.iter().enumerate().map(|(k, &n)| inner.point(k, n)));
                match check(w.log_weight(theta, &pts), &|| format!("sample indices {t:?}")) {
                    Ok(lw) => lws.push(lw),
                    Err(e) => err = Some(e),
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            Ok(log_sum_exp(&lws) - (total as f64).ln())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GimhConfig {
    /// Inner samples per density estimate.
    pub n_inner: usize,
    pub mode: DensityMode,
    pub steps: usize,
    pub burn_in_fraction: f64,
    pub target_accept: f64,
    /// Attempts at a nonzero density estimate at the initial state.
    pub max_init_retries: usize,
}

impl Default for GimhConfig {
    fn default() -> Self {
        GimhConfig {
            n_inner: 100,
            mode: DensityMode::ProductForm,
            steps: 100,
            burn_in_fraction: 0.2,
            target_accept: 0.25,
            max_init_retries: 100,
        }
    }
}

/// Grouped independence Metropolis-Hastings.
///
/// Each step draws fresh inner samples at the proposed parameter; the current
/// estimate is kept (not refreshed) until a proposal is accepted. Proposal
/// scales adapt during burn-in and are frozen afterwards.
pub fn gimh_chain(
    kernel: &dyn LatentKernel,
    w: &LogWeightModel,
    proposal: &mut dyn ThetaProposal,
    init: &[f64],
    cfg: &GimhConfig,
    rng: &mut SimRng,
) -> Result<ChainTrace> {
    if cfg.n_inner == 0 {
        return Err(Error::InvalidArgument("need at least one inner sample".into()));
    }
    if !(0.0..1.0).contains(&cfg.burn_in_fraction) {
        return Err(Error::InvalidArgument("burn-in fraction must lie in [0, 1)".into()));
    }
    let mut theta = init.to_vec();
    let mut log_est = f64::NEG_INFINITY;
    for attempt in 0..cfg.max_init_retries.max(1) {
        let inner = kernel.sample(&theta, cfg.n_inner, &rng.split_named(&format!("init/{attempt}")))?;
        log_est = density_estimate(&theta, &inner, w, cfg.mode)?;
        if log_est.is_finite() {
            break;
        }
    }
    if !log_est.is_finite() {
        return Err(Error::Degenerate(format!(
            "density estimate at the initial state stayed zero after {} attempts",
            cfg.max_init_retries.max(1)
        )));
    }
    let burn_in = burn_in_steps(cfg.steps, cfg.burn_in_fraction);
    let mut trace = ChainTrace::with_capacity(theta.len(), cfg.steps, burn_in);
    let mut log_scale = proposal.scale().ln();
    for t in 0..cfg.steps {
        let scale = proposal.scale();
        let cand = proposal.propose(&theta, rng);
        let inner = kernel.sample(&cand, cfg.n_inner, &rng.split(t as u64))?;
        let cand_est = density_estimate(&cand, &inner, w, cfg.mode)?;
        let log_ratio = cand_est - log_est + proposal.log_q_ratio(&theta, &cand);
        let log_ratio = if log_ratio.is_nan() { f64::NEG_INFINITY } else { log_ratio };
        let accepted = rng.uniform_open().ln() < log_ratio;
        if accepted {
            theta = cand;
            log_est = cand_est;
        }
        trace.push(&theta, accepted, scale, log_est);
        if t < burn_in && proposal.adaptive() {
            log_scale = adapt_log_scale(log_scale, log_ratio.min(0.0).exp(), cfg.target_accept, t);
            proposal.set_scale(log_scale.exp());
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimators::PointSet;
    use std::sync::Arc;

    fn normal_kernel(k: usize) -> impl Fn(&[f64], usize, &SimRng) -> Result<MarginalSamples> {
        move |_: &[f64], n: usize, rng: &SimRng| {
            let d = crate::Dist1D::normal(0.0, 1.0)?;
            MarginalSamples::new((0..k).map(|b| PointSet::scalars(d.sample_n(&mut rng.split(b as u64), n))).collect())
        }
    }

    #[test]
    fn constant_weight_in_both_modes() {
        let w = LogWeightModel::factorized(Some(Arc::new(|_| 2f64.ln())), vec![Arc::new(|_, _| 0.0); 2]);
        let inner = normal_kernel(2)(&[0.0], 3, &SimRng::from_seed_u64(0)).unwrap();
        for mode in [DensityMode::Standard, DensityMode::ProductForm] {
            let v = density_estimate(&[0.0], &inner, &w, mode).unwrap();
            assert!((v - 2f64.ln()).abs() < 1e-15);
        }
    }

    #[test]
    fn joint_weight_enumeration_matches_factorized() {
        let inner = MarginalSamples::from_scalars(vec![vec![0.1, 0.4], vec![-0.3, 1.0]]).unwrap();
        let fact = LogWeightModel::factorized(
            Some(Arc::new(|t| -t[0])),
            vec![Arc::new(|t, x| t[0] * x[0]), Arc::new(|_, x| -x[0] * x[0])],
        );
        let joint = LogWeightModel::joint(|t, x| -t[0] + t[0] * x[0][0] - x[1][0] * x[1][0]);
        let a = density_estimate(&[0.7], &inner, &fact, DensityMode::ProductForm).unwrap();
        let b = density_estimate(&[0.7], &inner, &joint, DensityMode::ProductForm).unwrap();
        assert!((a - b).abs() < 1e-14);
        // the four-term sum by hand
        let mut s = 0.0;
        for x0 in [0.1, 0.4] {
            for x1 in [-0.3f64, 1.0] {
                s += (-0.7 + 0.7 * x0 - x1 * x1).exp();
            }
        }
        assert!((a - (s / 4.0).ln()).abs() < 1e-14);
    }

    #[test]
    fn single_block_modes_coincide() {
        let inner = MarginalSamples::from_scalars(vec![vec![0.1, 0.4, -2.0]]).unwrap();
        let w = LogWeightModel::factorized(None, vec![Arc::new(|t, x| t[0] * x[0])]);
        let a = density_estimate(&[1.3], &inner, &w, DensityMode::Standard).unwrap();
        let b = density_estimate(&[1.3], &inner, &w, DensityMode::ProductForm).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn rejection_keeps_estimate() {
        let model = crate::mcmc::HierarchicalModel::new(vec![0.5, -0.2, 1.4], 1.0, 1.0).unwrap();
        let m2 = model.clone();
        let kernel = move |t: &[f64], n: usize, r: &SimRng| m2.sample_kernel(t[0], n, r);
        let mut prop = LogRandomWalk { scale: 1.0 };
        let cfg = GimhConfig { n_inner: 5, steps: 400, mode: DensityMode::Standard, ..GimhConfig::default() };
        let t =
            gimh_chain(&kernel, &model.gimh_weight(), &mut prop, &[1.0], &cfg, &mut SimRng::from_seed_u64(8)).unwrap();
        for i in 1..t.len() {
            if !t.accepted[i] {
                assert_eq!(t.log_density[i].to_bits(), t.log_density[i - 1].to_bits());
                assert_eq!(t.state(i), t.state(i - 1));
            }
        }
        assert!(t.acceptance_count > 0 && t.acceptance_count < t.len());
    }
}
