//! Importance sampling with product-form proposals.
//!
//! Weights are handled as log-weights throughout: with a hundred blocks the
//! product of per-block density ratios routinely leaves the range of `f64`.

mod ppf;
mod theta_marginal;

pub use ppf::{
    ppf_estimate, ppf_estimate_with, ppf_exact_variance, ppf_standard_estimate, ConditionalSamples, PpfOptions,
    PpfVariance, ThetaTestFunction,
};
pub use theta_marginal::{
    theta_marginal, theta_marginal_is, theta_marginal_is2, theta_marginal_pfis, theta_marginal_pfis2, LatentMoments,
    ThetaMarginalInput, ThetaMarginalMethod, WeightedParticles,
};

use crate::error::{Error, Result};
use crate::estimators::{tuple_sum, Estimate, EvalKind, EvalLimits, MarginalSamples, Strategy, TestFunction};
use crate::factorized::{eval_eliminated_with, FactorGraphFunction, SopFunction};
use crate::numeric::{for_each_tuple, log_sum_exp, product_u128, signed_log_sum, SignedLog};
use std::fmt;
use std::sync::Arc;

pub type LogThetaFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
/// `(theta, x_k) -> g_k(theta, x_k)`.
pub type LogBlockFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
/// `(theta, x) -> log w(theta, x)`.
pub type LogJointFn = Arc<dyn Fn(&[f64], &[&[f64]]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum WeightForm {
    Joint(LogJointFn),
    Factorized { theta_term: Option<LogThetaFn>, block_terms: Vec<LogBlockFn> },
}

/// A log importance weight `log w(theta, x)`, either as one joint evaluator or
/// as `g_0(theta) + sum_k g_k(theta, x_k)`.
///
/// When `theta_block` is set, block 0 of the samples the weight is applied to
/// holds `theta` and the remaining blocks hold `x_1..x_K`. Otherwise `theta`
/// is empty and every block is an `x` block.
#[derive(Clone)]
pub struct LogWeightModel {
    form: WeightForm,
    theta_block: bool,
}

impl fmt::Debug for LogWeightModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let form = match &self.form {
            WeightForm::Joint(_) => "Joint".to_string(),
            WeightForm::Factorized { theta_term, block_terms } => {
                format!("Factorized {{ theta_term: {}, blocks: {} }}", theta_term.is_some(), block_terms.len())
            }
        };
        write!(f, "LogWeightModel {{ {form}, theta_block: {} }}", self.theta_block)
    }
}

impl LogWeightModel {
    pub fn joint(f: impl Fn(&[f64], &[&[f64]]) -> f64 + Send + Sync + 'static) -> Self {
        LogWeightModel { form: WeightForm::Joint(Arc::new(f)), theta_block: false }
    }

    pub fn factorized(theta_term: Option<LogThetaFn>, block_terms: Vec<LogBlockFn>) -> Self {
        LogWeightModel { form: WeightForm::Factorized { theta_term, block_terms }, theta_block: false }
    }

    /// `w = 1` on `k` blocks.
    pub fn unit(k: usize) -> Self {
        let zero: LogBlockFn = Arc::new(|_, _| 0.0);
        Self::factorized(None, vec![zero; k])
    }

    pub fn with_theta_block(mut self) -> Self {
        self.theta_block = true;
        self
    }

    pub fn has_theta_block(&self) -> bool {
        self.theta_block
    }

    pub fn is_factorized(&self) -> bool {
        matches!(self.form, WeightForm::Factorized { .. })
    }

    /// Number of `x` blocks, when the weight is factorized.
    pub fn n_x_blocks(&self) -> Option<usize> {
        match &self.form {
            WeightForm::Factorized { block_terms, .. } => Some(block_terms.len()),
            WeightForm::Joint(_) => None,
        }
    }

    pub fn log_weight(&self, theta: &[f64], x: &[&[f64]]) -> f64 {
        match &self.form {
            WeightForm::Joint(f) => f(theta, x),
            WeightForm::Factorized { theta_term, block_terms } => {
                let mut acc = theta_term.as_ref().map_or(0.0, |g| g(theta));
                for (g, xk) in block_terms.iter().zip(x) {
                    acc += g(theta, xk);
                }
                acc
            }
        }
    }

    pub(crate) fn theta_term(&self, theta: &[f64]) -> f64 {
        match &self.form {
            WeightForm::Factorized { theta_term: Some(g), .. } => g(theta),
            _ => 0.0,
        }
    }

    pub(crate) fn block_term(&self, k: usize, theta: &[f64], xk: &[f64]) -> f64 {
        match &self.form {
            WeightForm::Factorized { block_terms, .. } => block_terms[k](theta, xk),
            WeightForm::Joint(_) => panic!("block terms need a factorized weight"),
        }
    }

    /// Log-weight of a full sample tuple, splitting off `theta` if present.
    pub(crate) fn log_weight_tuple(&self, pts: &[&[f64]]) -> f64 {
        if self.theta_block {
            self.log_weight(pts[0], &pts[1..])
        } else {
            self.log_weight(&[], pts)
        }
    }

    fn check_blocks(&self, marginals: &MarginalSamples) -> Result<()> {
        if let Some(kx) = self.n_x_blocks() {
            let expected = kx + self.theta_block as usize;
            if expected != marginals.k() {
                return Err(Error::InvalidArgument(format!(
                    "weight covers {expected} blocks, samples have {}",
                    marginals.k()
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn check_log_weight(lw: f64, location: impl FnOnce() -> String) -> Result<f64> {
    if lw.is_nan() || lw == f64::INFINITY {
        Err(Error::NonFiniteWeight { location: location() })
    } else {
        Ok(lw)
    }
}

/// `mu_x^N(w phi)`: unbiased for `gamma(phi) = mu(w phi)`.
pub fn pf_is_estimate(
    marginals: &MarginalSamples,
    w: &LogWeightModel,
    phi: &TestFunction,
    strategy: &Strategy,
) -> Result<Estimate> {
    let (v, est) = pf_is_log(marginals, w, phi, strategy, &EvalLimits::default())?;
    Ok(Estimate { value: v.value(), ..est })
}

/// Self-normalized `mu_x^N(w phi) / mu_x^N(w)`.
pub fn pf_snis_estimate(
    marginals: &MarginalSamples,
    w: &LogWeightModel,
    phi: &TestFunction,
    strategy: &Strategy,
) -> Result<Estimate> {
    let limits = EvalLimits::default();
    let (num, est) = pf_is_log(marginals, w, phi, strategy, &limits)?;
    let one = unit_like(phi, marginals.k())?;
    let (den, den_est) = pf_is_log(marginals, w, &one, strategy, &limits)?;
    if den.sign <= 0.0 || !den.log_abs.is_finite() {
        return Err(Error::Degenerate("the weight normalization is zero or underflowed".into()));
    }
    let value = if num.sign == 0.0 { 0.0 } else { num.sign * (num.log_abs - den.log_abs).exp() };
    Ok(Estimate { value, n_phi_evals: est.n_phi_evals + den_est.n_phi_evals, ..est })
}

/// The function `1` in the representation required by `phi`'s strategy.
fn unit_like(phi: &TestFunction, k: usize) -> Result<TestFunction> {
    Ok(match phi {
        TestFunction::BlackBox(_) => TestFunction::constant(1.0),
        TestFunction::Sop(_) => SopFunction::with_unit_coeffs(vec![vec![crate::factorized::Factor::One; k]])?.into(),
        TestFunction::FactorGraph(_) => FactorGraphFunction::new(k).into(),
    })
}

fn pf_is_log(
    marginals: &MarginalSamples,
    w: &LogWeightModel,
    phi: &TestFunction,
    strategy: &Strategy,
    limits: &EvalLimits,
) -> Result<(SignedLog, Estimate)> {
    w.check_blocks(marginals)?;
    match (strategy, phi) {
        (Strategy::BruteForce, _) => brute_force_log(marginals, w, phi, limits.brute_force_cap),
        (Strategy::SopFastPath, TestFunction::Sop(f)) if w.is_factorized() => sop_fast_path_log(marginals, w, f),
        (Strategy::Eliminate(plan), TestFunction::FactorGraph(f)) if w.is_factorized() && !w.theta_block => {
            // fold exp(g_k) into the graph as single-block factors
            let mut g = f.clone();
            for k in 0..marginals.k() {
                let wk = w.clone();
                g = g.with_factor(&[k], move |x| wk.block_term(k, &[], x[0]).exp())?;
            }
            // weight-only blocks are independent singletons; sum them out last
            let mut plan = plan.clone();
            for k in 0..marginals.k() {
                if !plan.order.contains(&k) && !plan.keep.contains(&k) {
                    plan.order.push(k);
                }
            }
            let est = eval_eliminated_with(marginals, &g, &plan, limits.table_cap)?;
            let g0 = w.theta_term(&[]);
            let v = SignedLog::from_value(est.value);
            Ok((SignedLog { log_abs: v.log_abs + g0, ..v }, est))
        }
        _ => Err(Error::StrategyMismatch {
            strategy: match strategy {
                Strategy::BruteForce => "brute-force",
                Strategy::SopFastPath => "sop-fast-path",
                Strategy::Eliminate(_) => "eliminate",
            },
            representation: if w.is_factorized() { phi.representation() } else { "joint-weight" },
        }),
    }
}

fn brute_force_log(
    marginals: &MarginalSamples,
    w: &LogWeightModel,
    phi: &TestFunction,
    cap: u128,
) -> Result<(SignedLog, Estimate)> {
    let sizes = marginals.sizes();
    let total = product_u128(sizes.iter().copied());
    if total > cap {
        return Err(Error::CapExceeded { what: "brute-force weighted sum", required: total, cap });
    }
    // first pass: largest log-weight, used as a shift
    let mut shift = f64::NEG_INFINITY;
    let mut err = None;
    let mut pts: Vec<&[f64]> = Vec::with_capacity(sizes.len());
    for_each_tuple(&sizes, |t| {
        if err.is_some() {
            return;
        }
        pts.clear();
        pts.extend(t.iter().enumerate().map(|(k, &n)| marginals.point(k, n)));
        match check_log_weight(w.log_weight_tuple(&pts), || format!("sample indices {t:?}")) {
            Ok(lw) => shift = shift.max(lw),
            Err(e) => err = Some(e),
        }
    });
    if let Some(e) = err {
        return Err(e);
    }
    let est_base =
        Estimate { value: 0.0, n_phi_evals: total as u64, n_samples_used: sizes.clone(), kind: EvalKind::BruteForce };
    if shift == f64::NEG_INFINITY {
        return Ok((SignedLog::ZERO, est_base));
    }
    let s = tuple_sum(marginals, cap, |pts, idx| {
        let lw = w.log_weight_tuple(pts);
        if lw == f64::NEG_INFINITY {
            return Ok(0.0);
        }
        let v = phi.eval(pts);
        if !v.is_finite() {
            return Err(Error::NonFinite { location: format!("sample indices {idx:?}") });
        }
        Ok((lw - shift).exp() * v)
    })?;
    let v = SignedLog::from_value(s);
    let out = SignedLog { log_abs: v.log_abs + shift - (total as f64).ln(), ..v };
    Ok((out, est_base))
}

/// Sum-of-products `phi` with a factorized weight. With a `theta` block the
/// weight couples `theta` to every `x` block, so the sum is organized per
/// `theta` atom: `O(J K N_0 N)` work instead of `O(N^{K+1})`.
fn sop_fast_path_log(
    marginals: &MarginalSamples,
    w: &LogWeightModel,
    f: &SopFunction,
) -> Result<(SignedLog, Estimate)> {
    if f.k() != marginals.k() {
        return Err(Error::InvalidArgument(format!("function has {} blocks, samples have {}", f.k(), marginals.k())));
    }
    let off = w.theta_block as usize;
    let kx = marginals.k() - off;
    let n_atoms = if w.theta_block { marginals.n(0) } else { 1 };
    let n_terms = f.n_terms();

    // factor values on x blocks do not depend on theta
    let mut fvals: Vec<Vec<Vec<SignedLog>>> = Vec::with_capacity(n_terms);
    for j in 0..n_terms {
        let mut per_block = Vec::with_capacity(kx);
        for k in 0..kx {
            let block = marginals.block(k + off);
            let factor = f.factor(j, k + off);
            let mut vals = Vec::with_capacity(block.len());
            for (n, x) in block.iter().enumerate() {
                let v = factor.eval(x);
                if !v.is_finite() {
                    return Err(Error::NonFinite { location: format!("term {j}, block {}, sample {n}", k + off) });
                }
                vals.push(SignedLog::from_value(v));
            }
            per_block.push(vals);
        }
        fvals.push(per_block);
    }

    let mut atom_totals = Vec::with_capacity(n_atoms);
    let mut logs: Vec<f64> = Vec::new();
    let mut scratch: Vec<SignedLog> = Vec::new();
    for a in 0..n_atoms {
        let theta: &[f64] = if w.theta_block { marginals.point(0, a) } else { &[] };
        let g0 = check_log_weight(w.theta_term(theta), || format!("theta term at atom {a}"))?;
        // g_k(theta, x_k^n)
        let mut g: Vec<Vec<f64>> = Vec::with_capacity(kx);
        for k in 0..kx {
            logs.clear();
            for (n, x) in marginals.block(k + off).iter().enumerate() {
                logs.push(check_log_weight(w.block_term(k, theta, x), || {
                    format!("block {}, sample {n}, atom {a}", k + off)
                })?);
            }
            g.push(logs.clone());
        }
        let mut terms = Vec::with_capacity(n_terms);
        for j in 0..n_terms {
            let mut t = SignedLog::from_value(f.coeffs()[j]);
            if w.theta_block {
                t = t.mul(SignedLog::from_value(f.factor(j, 0).eval(theta)));
            }
            for k in 0..kx {
                if t.sign == 0.0 {
                    break;
                }
                scratch.clear();
                scratch.extend(fvals[j][k].iter().zip(&g[k]).map(|(fv, gk)| SignedLog {
                    sign: if *gk == f64::NEG_INFINITY { 0.0 } else { fv.sign },
                    log_abs: fv.log_abs + gk,
                }));
                let s = signed_log_sum(&scratch);
                let n = g[k].len() as f64;
                t = t.mul(SignedLog { log_abs: s.log_abs - n.ln(), ..s });
            }
            terms.push(t);
        }
        let total = signed_log_sum(&terms);
        atom_totals.push(SignedLog { log_abs: total.log_abs + g0, ..total });
    }
    let s = signed_log_sum(&atom_totals);
    let out = SignedLog { log_abs: s.log_abs - (n_atoms as f64).ln(), ..s };
    let sizes = marginals.sizes();
    let x_samples: u64 = sizes[off..].iter().map(|&n| n as u64).sum();
    Ok((
        out,
        Estimate {
            value: 0.0,
            n_phi_evals: n_terms as u64 * x_samples * n_atoms as u64,
            n_samples_used: sizes,
            kind: EvalKind::SopFastPath,
        },
    ))
}

/// `log(mean(exp(xs)))` with an explicit error when every entry is `-inf`.
pub(crate) fn log_mean_weight(xs: &[f64], what: &str) -> Result<f64> {
    let v = log_sum_exp(xs);
    if v == f64::NEG_INFINITY {
        return Err(Error::Degenerate(format!("all {what} weights are zero")));
    }
    Ok(v - (xs.len() as f64).ln())
}
