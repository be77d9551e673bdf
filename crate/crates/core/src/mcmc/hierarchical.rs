use super::ChainTrace;
use crate::distributions::{box_muller, inverse_gamma_logpdf, normal_logpdf, Dist1D, SimRng};
use crate::error::{Error, Result};
use crate::estimators::{MarginalSamples, PointSet};
use crate::importance::{ConditionalSamples, LogBlockFn, LogThetaFn, LogWeightModel};
use std::sync::Arc;

/// `theta ~ Inv-Gamma(alpha/2, alpha*beta/2)`, `X_k | theta ~ N(0, theta)`,
/// `Y_k | X_k ~ N(X_k, 1)` independently for `k = 1..K`.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchicalModel {
    y: Vec<f64>,
    alpha: f64,
    beta: f64,
}

impl HierarchicalModel {
    pub fn new(y: Vec<f64>, alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite() && beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidParameters(format!("alpha and beta must be positive, got {alpha} and {beta}")));
        }
        if let Some(v) = y.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameters(format!("observation {v} is not finite")));
        }
        Ok(HierarchicalModel { y, alpha, beta })
    }

    /// Observations simulated from the model with `theta` fixed.
    pub fn simulate_observations(k: usize, theta: f64, rng: &mut SimRng) -> Vec<f64> {
        let sd = theta.sqrt();
        let mut y = Vec::with_capacity(k);
        while y.len() < k {
            let (a, b) = box_muller(rng);
            let (c, d) = box_muller(rng);
            y.push(sd * a + c);
            if y.len() < k {
                y.push(sd * b + d);
            }
        }
        y
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn k(&self) -> usize {
        self.y.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn prior_shape(&self) -> f64 {
        self.alpha / 2.0
    }

    pub fn prior_scale(&self) -> f64 {
        self.alpha * self.beta / 2.0
    }

    pub fn prior(&self) -> Dist1D {
        Dist1D::InverseGamma { shape: self.prior_shape(), scale: self.prior_scale() }
    }

    pub fn log_prior(&self, theta: f64) -> f64 {
        inverse_gamma_logpdf(theta, self.prior_shape(), self.prior_scale())
    }

    /// Starting value: prior mean when finite, else prior median.
    pub fn initial_theta(&self) -> f64 {
        let prior = self.prior();
        prior.mean().unwrap_or_else(|| prior.quantile(0.5).expect("valid probability"))
    }

    /// Unnormalized `log p(theta, x | y)`.
    pub fn log_joint(&self, theta: f64, x: &[f64]) -> f64 {
        if theta <= 0.0 {
            return f64::NEG_INFINITY;
        }
        let mut acc = self.log_prior(theta);
        for (xk, yk) in x.iter().zip(&self.y) {
            acc += normal_logpdf(*xk, 0.0, theta) + normal_logpdf(*yk, *xk, 1.0);
        }
        acc
    }

    /// Unnormalized `log p(theta | y) = log p(theta) + sum_k log N(y_k; 0, theta + 1)`.
    pub fn log_theta_marginal(&self, theta: f64) -> f64 {
        if theta <= 0.0 {
            return f64::NEG_INFINITY;
        }
        self.log_prior(theta) + self.y.iter().map(|yk| normal_logpdf(*yk, 0.0, theta + 1.0)).sum::<f64>()
    }

    /// Posterior moments of each `x_k` given `E[s]` and `E[s^2]` for
    /// `s = theta / (1 + theta)` under the posterior.
    pub fn latent_moments(&self, e_s: f64, e_s2: f64) -> (Vec<f64>, Vec<f64>) {
        let means: Vec<f64> = self.y.iter().map(|y| y * e_s).collect();
        let sds = self.y.iter().zip(&means).map(|(y, m)| (e_s + y * y * e_s2 - m * m).max(0.0).sqrt()).collect();
        (means, sds)
    }

    /// Weight for the joint proposal `p(theta) prod_k N(x_k; 0, 1)`, with theta
    /// in block 0: `g_k(theta, x) = log N(y_k; x, 1) + log N(x; 0, theta) - log N(x; 0, 1)`.
    pub fn is_weight(&self) -> LogWeightModel {
        let terms = self
            .y
            .iter()
            .map(|&yk| -> LogBlockFn {
                Arc::new(move |t: &[f64], x: &[f64]| {
                    normal_logpdf(yk, x[0], 1.0) + normal_logpdf(x[0], 0.0, t[0]) - normal_logpdf(x[0], 0.0, 1.0)
                })
            })
            .collect();
        LogWeightModel::factorized(None, terms).with_theta_block()
    }

    /// Weight for the proposal `p(theta) prod_k N(x_k; 0, theta)`:
    /// `prod_k N(y_k; x_k, 1)`, free of theta.
    pub fn is2_weight(&self) -> LogWeightModel {
        LogWeightModel::factorized(None, self.likelihood_terms())
    }

    /// Weight of the pseudo-marginal sampler with kernel `prod_k N(0, theta)`:
    /// `p(theta) prod_k N(y_k; x_k, 1)`.
    pub fn gimh_weight(&self) -> LogWeightModel {
        let (a, b) = (self.prior_shape(), self.prior_scale());
        let prior: LogThetaFn = Arc::new(move |t: &[f64]| inverse_gamma_logpdf(t[0], a, b));
        LogWeightModel::factorized(Some(prior), self.likelihood_terms())
    }

    fn likelihood_terms(&self) -> Vec<LogBlockFn> {
        self.y
            .iter()
            .map(|&yk| -> LogBlockFn { Arc::new(move |_: &[f64], x: &[f64]| normal_logpdf(yk, x[0], 1.0)) })
            .collect()
    }

    /// `n` draws of `theta ~ p` (block 0) and `x_k ~ N(0, 1)` (blocks `1..=K`).
    pub fn sample_is_proposal(&self, n: usize, rng: &SimRng) -> Result<MarginalSamples> {
        let prior = self.prior();
        let mut r = rng.split_named("theta");
        let mut blocks = vec![PointSet::scalars((0..n).map(|_| prior.sample(&mut r)).collect())];
        let std = Dist1D::normal(0.0, 1.0)?;
        for k in 0..self.k() {
            blocks.push(PointSet::scalars(std.sample_n(&mut rng.split(k as u64), n)));
        }
        MarginalSamples::new(blocks)
    }

    /// `m` draws `theta^j ~ p`, each with `n` draws `x_k ~ N(0, theta^j)` per block.
    pub fn sample_conditional(&self, m: usize, n: usize, rng: &SimRng) -> Result<ConditionalSamples> {
        let prior = self.prior();
        let mut r = rng.split_named("theta");
        let thetas: Vec<f64> = (0..m).map(|_| prior.sample(&mut r)).collect();
        let mut x = Vec::with_capacity(m);
        for (j, &t) in thetas.iter().enumerate() {
            let outer = rng.split(j as u64);
            x.push(self.sample_kernel(t, n, &outer)?);
        }
        ConditionalSamples::new(PointSet::scalars(thetas), x)
    }

    /// `n` draws of `x_k ~ N(0, theta)` for each block.
    pub fn sample_kernel(&self, theta: f64, n: usize, rng: &SimRng) -> Result<MarginalSamples> {
        let d = Dist1D::normal(0.0, theta)?;
        MarginalSamples::new(
            (0..self.k()).map(|k| PointSet::scalars(d.sample_n(&mut rng.split(k as u64), n))).collect(),
        )
    }
}

/// Alternates `x | theta, y` and `theta | x`. States are `(theta, x_1..x_K)`.
pub fn gibbs_hierarchical(
    model: &HierarchicalModel,
    steps: usize,
    burn_in_fraction: f64,
    rng: &mut SimRng,
) -> Result<ChainTrace> {
    if !(0.0..1.0).contains(&burn_in_fraction) {
        return Err(Error::InvalidArgument("burn-in fraction must lie in [0, 1)".into()));
    }
    let k = model.k();
    let burn_in = super::burn_in_steps(steps, burn_in_fraction);
    let mut trace = ChainTrace::with_capacity(k + 1, steps, burn_in);
    let mut state = vec![0.0; k + 1];
    state[0] = model.initial_theta();
    let shape = (model.alpha + k as f64) / 2.0;
    for _ in 0..steps {
        let theta = state[0];
        let prec = 1.0 / theta + 1.0;
        let sd = (1.0 / prec).sqrt();
        let mut i = 0;
        while i < k {
            let (a, b) = box_muller(rng);
            state[i + 1] = model.y[i] / prec + sd * a;
            if i + 1 < k {
                state[i + 2] = model.y[i + 1] / prec + sd * b;
            }
            i += 2;
        }
        let ss: f64 = state[1..].iter().map(|x| x * x).sum();
        let post = Dist1D::InverseGamma { shape, scale: (model.alpha * model.beta + ss) / 2.0 };
        state[0] = post.sample(rng);
        trace.push(&state, true, 0.0, model.log_joint(state[0], &state[1..]));
    }
    Ok(trace)
}
