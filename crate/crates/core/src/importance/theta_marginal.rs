use super::ppf::ConditionalSamples;
use super::{check_log_weight, log_mean_weight, LogWeightModel};
use crate::error::{Error, Result};
use crate::estimators::{MarginalSamples, PointSet};
use crate::numeric::{log_sum_exp, sum};
use rayon::prelude::*;

/// Per-atom conditional moments of scalar latent blocks, `atoms x K` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentMoments {
    pub k: usize,
    pub first: Vec<f64>,
    pub second: Vec<f64>,
}

/// Weighted atoms `sum_i w_i delta_{theta_i}` with log-weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedParticles {
    atoms: PointSet,
    log_weights: Vec<f64>,
    log_norm: f64,
    latent: Option<LatentMoments>,
}

impl WeightedParticles {
    pub fn new(atoms: PointSet, log_weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != log_weights.len() || atoms.is_empty() {
            return Err(Error::InvalidArgument(format!("{} atoms for {} weights", atoms.len(), log_weights.len())));
        }
        for (i, &lw) in log_weights.iter().enumerate() {
            check_log_weight(lw, || format!("atom {i}"))?;
        }
        let log_norm = log_sum_exp(&log_weights);
        if log_norm == f64::NEG_INFINITY {
            return Err(Error::Degenerate("every particle weight is zero".into()));
        }
        Ok(WeightedParticles { atoms, log_weights, log_norm, latent: None })
    }

    /// Equally weighted atoms, e.g. the states of a Markov chain.
    pub fn uniform(atoms: PointSet) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![0.0; n])
    }

    fn with_latent(mut self, latent: LatentMoments) -> Self {
        self.latent = Some(latent);
        self
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn atoms(&self) -> &PointSet {
        &self.atoms
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    /// `log sum_i w_i` of the unnormalized weights.
    pub fn log_normalizer(&self) -> f64 {
        self.log_norm
    }

    pub fn normalized_weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|lw| (lw - self.log_norm).exp()).collect()
    }

    /// Scalar atom locations (first coordinate).
    pub fn locations(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a[0]).collect()
    }

    /// Effective sample size `1 / sum_i w_i^2`.
    pub fn ess(&self) -> f64 {
        1.0 / sum(self.normalized_weights().iter().map(|w| w * w))
    }

    /// Mass carried by the `p` heaviest atoms.
    pub fn top_mass(&self, p: usize) -> f64 {
        let mut w = self.normalized_weights();
        w.sort_by(|a, b| b.total_cmp(a));
        sum(w.into_iter().take(p))
    }

    pub fn expectation(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        sum(self.normalized_weights().iter().zip(self.atoms.iter()).map(|(w, a)| w * f(a)))
    }

    pub fn latent(&self) -> Option<&LatentMoments> {
        self.latent.as_ref()
    }

    /// Means and standard deviations of each latent block under the weighted
    /// joint approximation.
    pub fn latent_moments(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let lat = self.latent.as_ref()?;
        let w = self.normalized_weights();
        let mut means = Vec::with_capacity(lat.k);
        let mut sds = Vec::with_capacity(lat.k);
        for k in 0..lat.k {
            let m1 = sum(w.iter().enumerate().map(|(a, wa)| wa * lat.first[a * lat.k + k]));
            let m2 = sum(w.iter().enumerate().map(|(a, wa)| wa * lat.second[a * lat.k + k]));
            means.push(m1);
            sds.push((m2 - m1 * m1).max(0.0).sqrt());
        }
        Some((means, sds))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ThetaMarginalMethod {
    Is,
    Pfis,
    Is2,
    Pfis2,
}

impl ThetaMarginalMethod {
    pub fn name(self) -> &'static str {
        match self {
            ThetaMarginalMethod::Is => "IS",
            ThetaMarginalMethod::Pfis => "PFIS",
            ThetaMarginalMethod::Is2 => "IS2",
            ThetaMarginalMethod::Pfis2 => "PFIS2",
        }
    }
}

/// Samples for [`theta_marginal`]: joint draws with theta in block 0, or
/// conditional draws.
#[derive(Debug, Clone, Copy)]
pub enum ThetaMarginalInput<'a> {
    Joint(&'a MarginalSamples),
    Conditional(&'a ConditionalSamples),
}

pub fn theta_marginal(
    method: ThetaMarginalMethod,
    input: ThetaMarginalInput<'_>,
    w: &LogWeightModel,
) -> Result<WeightedParticles> {
    match (method, input) {
        (ThetaMarginalMethod::Is, ThetaMarginalInput::Joint(s)) => theta_marginal_is(s, w),
        (ThetaMarginalMethod::Pfis, ThetaMarginalInput::Joint(s)) => theta_marginal_pfis(s, w),
        (ThetaMarginalMethod::Is2, ThetaMarginalInput::Conditional(c)) => theta_marginal_is2(c, w),
        (ThetaMarginalMethod::Pfis2, ThetaMarginalInput::Conditional(c)) => theta_marginal_pfis2(c, w),
        (m, _) => Err(Error::InvalidArgument(format!(
            "{} needs {} samples",
            m.name(),
            match m {
                ThetaMarginalMethod::Is | ThetaMarginalMethod::Pfis => "joint",
                _ => "conditional",
            }
        ))),
    }
}

fn need_factorized(w: &LogWeightModel, kx: usize, what: &str) -> Result<()> {
    match w.n_x_blocks() {
        Some(n) if n == kx => Ok(()),
        Some(n) => Err(Error::InvalidArgument(format!("weight has {n} block terms, samples have {kx} latent blocks"))),
        None => Err(Error::InvalidArgument(format!("{what} needs a factorized weight"))),
    }
}

/// `sum_n w(theta^n, X^n) delta_{theta^n}` over aligned joint draws.
pub fn theta_marginal_is(joint: &MarginalSamples, w: &LogWeightModel) -> Result<WeightedParticles> {
    let n = joint
        .aligned_len()
        .ok_or_else(|| Error::InvalidArgument("importance sampling needs aligned joint draws".into()))?;
    let kx = joint.k() - 1;
    let mut lws = Vec::with_capacity(n);
    let mut first = Vec::with_capacity(n * kx);
    let mut second = Vec::with_capacity(n * kx);
    let mut pts: Vec<&[f64]> = Vec::with_capacity(kx);
    for i in 0..n {
        pts.clear();
        pts.extend((1..=kx).map(|k| joint.point(k, i)));
        lws.push(check_log_weight(w.log_weight(joint.point(0, i), &pts), || format!("sample {i}"))?);
        for p in &pts {
            first.push(p[0]);
            second.push(p[0] * p[0]);
        }
    }
    Ok(WeightedParticles::new(joint.block(0).clone(), lws)?.with_latent(LatentMoments { k: kx, first, second }))
}

/// Locally weighted mean of `x` and `x^2` plus `log mean exp(g)`.
fn local_moments(g: &[f64], x: impl Iterator<Item = f64>, what: &str) -> Result<(f64, f64, f64)> {
    let lm = log_mean_weight(g, what)?;
    let shift = lm + (g.len() as f64).ln();
    let mut m1 = crate::numeric::CompensatedSum::new();
    let mut m2 = crate::numeric::CompensatedSum::new();
    for (gi, xi) in g.iter().zip(x) {
        let wi = (gi - shift).exp();
        m1.add(wi * xi);
        m2.add(wi * xi * xi);
    }
    Ok((lm, m1.value(), m2.value()))
}

/// Atom `theta^n` weighted by the product-form sum over every combination of
/// latent samples: `exp(g_0) prod_k mean_{n'} exp(g_k(theta^n, x_k^{n'}))`.
pub fn theta_marginal_pfis(marginals: &MarginalSamples, w: &LogWeightModel) -> Result<WeightedParticles> {
    let kx = marginals.k() - 1;
    need_factorized(w, kx, "PFIS")?;
    let n_atoms = marginals.n(0);
    let rows: Vec<Result<(f64, Vec<f64>, Vec<f64>)>> = (0..n_atoms)
        .into_par_iter()
        .map(|a| {
            let theta = marginals.point(0, a);
            let mut lw = check_log_weight(w.theta_term(theta), || format!("theta term at atom {a}"))?;
            let mut f = Vec::with_capacity(kx);
            let mut s = Vec::with_capacity(kx);
            let mut g = Vec::new();
            for k in 0..kx {
                let block = marginals.block(k + 1);
                g.clear();
                for (n, x) in block.iter().enumerate() {
                    g.push(check_log_weight(w.block_term(k, theta, x), || {
                        format!("block {}, sample {n}, atom {a}", k + 1)
                    })?);
                }
                if lw == f64::NEG_INFINITY {
                    f.push(0.0);
                    s.push(0.0);
                    continue;
                }
                match local_moments(&g, block.iter().map(|x| x[0]), "latent") {
                    Ok((lm, m1, m2)) => {
                        lw += lm;
                        f.push(m1);
                        s.push(m2);
                    }
                    Err(_) => {
                        lw = f64::NEG_INFINITY;
                        f.push(0.0);
                        s.push(0.0);
                    }
                }
            }
            Ok((lw, f, s))
        })
        .collect();
    assemble(marginals.block(0).clone(), rows, kx)
}

/// Atom `theta^m` weighted by `mean_n w(theta^m, X^{m,n})` over aligned
/// conditional draws.
pub fn theta_marginal_is2(cs: &ConditionalSamples, w: &LogWeightModel) -> Result<WeightedParticles> {
    let kx = cs.k();
    let rows: Vec<Result<(f64, Vec<f64>, Vec<f64>)>> = (0..cs.m())
        .into_par_iter()
        .map(|m| {
            let x = cs.x(m);
            let n =
                x.aligned_len().ok_or_else(|| Error::InvalidArgument("IS2 needs equal inner sample sizes".into()))?;
            let theta = cs.theta(m);
            let mut g = Vec::with_capacity(n);
            let mut pts: Vec<&[f64]> = Vec::with_capacity(kx);
            for i in 0..n {
                pts.clear();
                pts.extend((0..kx).map(|k| x.point(k, i)));
                g.push(check_log_weight(w.log_weight(theta, &pts), || format!("outer {m}, inner {i}"))?);
            }
            let lm = log_sum_exp(&g);
            if lm == f64::NEG_INFINITY {
                return Ok((lm, vec![0.0; kx], vec![0.0; kx]));
            }
            let mut f = Vec::with_capacity(kx);
            let mut s = Vec::with_capacity(kx);
            for k in 0..kx {
                let (_, m1, m2) = local_moments(&g, x.block(k).iter().map(|p| p[0]), "inner")?;
                f.push(m1);
                s.push(m2);
            }
            Ok((lm - (n as f64).ln(), f, s))
        })
        .collect();
    assemble(cs.thetas().clone(), rows, kx)
}

/// Atom `theta^m` weighted by `exp(g_0) prod_k mean_n exp(g_k(theta^m, x_k^{m,n}))`.
pub fn theta_marginal_pfis2(cs: &ConditionalSamples, w: &LogWeightModel) -> Result<WeightedParticles> {
    let kx = cs.k();
    need_factorized(w, kx, "PFIS2")?;
    let rows: Vec<Result<(f64, Vec<f64>, Vec<f64>)>> = (0..cs.m())
        .into_par_iter()
        .map(|m| {
            let x = cs.x(m);
            let theta = cs.theta(m);
            let mut lw = check_log_weight(w.theta_term(theta), || format!("theta term at outer {m}"))?;
            let mut f = Vec::with_capacity(kx);
            let mut s = Vec::with_capacity(kx);
            let mut g = Vec::new();
            for k in 0..kx {
                g.clear();
                for (n, p) in x.block(k).iter().enumerate() {
                    g.push(check_log_weight(w.block_term(k, theta, p), || format!("outer {m}, block {k}, inner {n}"))?);
                }
                match local_moments(&g, x.block(k).iter().map(|p| p[0]), "inner") {
                    Ok((lm, m1, m2)) if lw > f64::NEG_INFINITY => {
                        lw += lm;
                        f.push(m1);
                        s.push(m2);
                    }
                    _ => {
                        lw = f64::NEG_INFINITY;
                        f.push(0.0);
                        s.push(0.0);
                    }
                }
            }
            Ok((lw, f, s))
        })
        .collect();
    assemble(cs.thetas().clone(), rows, kx)
}

fn assemble(atoms: PointSet, rows: Vec<Result<(f64, Vec<f64>, Vec<f64>)>>, kx: usize) -> Result<WeightedParticles> {
    let mut lws = Vec::with_capacity(rows.len());
    let mut first = Vec::with_capacity(rows.len() * kx);
    let mut second = Vec::with_capacity(rows.len() * kx);
    for r in rows {
        let (lw, f, s) = r?;
        lws.push(lw);
        first.extend(f);
        second.extend(s);
    }
    Ok(WeightedParticles::new(atoms, lws)?.with_latent(LatentMoments { k: kx, first, second }))
}
