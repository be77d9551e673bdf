//! Truncated Taylor expansion of `exp(x_1 * ... * x_K)` under independent
//! `Uniform[0, a]` coordinates, with reference series for its mean, the
//! truncation bias and the asymptotic variances.
//!
//! `sum_j z^j / (j! (j+1)^K)` is the hypergeometric `KFK(1,..,1; 2,..,2; z)`;
//! all series are summed in the log domain.

use super::{Factor, SopFunction};
use crate::error::{Error, Result};
use crate::numeric::log_sum_exp;
use statrs::function::gamma::ln_gamma;

/// `1 + sum_{j=1}^J (x_1 ... x_K)^j / j!` over `k` scalar blocks.
pub fn taylor_sop_exp(j_max: usize, k: usize) -> Result<SopFunction> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one block".into()));
    }
    let mut factors = Vec::with_capacity(j_max + 1);
    let mut coeffs = Vec::with_capacity(j_max + 1);
    factors.push(vec![Factor::One; k]);
    coeffs.push(1.0);
    let mut c = 1.0;
    for j in 1..=j_max {
        c /= j as f64;
        factors.push(vec![Factor::Power(j as u32); k]);
        coeffs.push(c);
    }
    SopFunction::new(factors, coeffs)
}

/// Default truncation: `ceil(1.2 a^K) + 2`.
pub fn default_cutoff(a: f64, k: usize) -> usize {
    (1.2 * a.powi(k as i32)).ceil() as usize + 2
}

fn log_term(log_z: f64, k: usize, j: usize) -> f64 {
    let jf = j as f64;
    jf * log_z - ln_gamma(jf + 1.0) - k as f64 * (jf + 1.0).ln()
}

fn check(a: f64, tol: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::InvalidArgument(format!("interval length must be positive, got {a}")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Sums `t_j`, `j >= start`, given in log form, stopping once the term ratio
/// is below one and the geometric tail bound `t r / (1 - r)` falls under
/// `tol` times the partial sum.
fn sum_log_series(start: usize, tol: f64, log_t: impl Fn(usize) -> f64) -> Result<f64> {
    const MAX_TERMS: usize = 10_000_000;
    let mut terms = Vec::new();
    let mut running = f64::NEG_INFINITY;
    let mut prev = f64::NAN;
    for j in start..start + MAX_TERMS {
        let t = log_t(j);
        terms.push(t);
        running = if running == f64::NEG_INFINITY { t } else { running.max(t) + (-(running - t).abs()).exp().ln_1p() };
        if prev.is_finite() {
            let log_r = t - prev;
            if log_r < 0.0 {
                let log_tail = t + log_r - (-(log_r.exp_m1())).ln();
                if log_tail < tol.ln() + running {
                    return Ok(log_sum_exp(&terms));
                }
            }
        }
        prev = t;
    }
    Err(Error::Numerical("series did not converge".into()))
}

/// `KFK(1,..,1; 2,..,2; z)` for `z > 0`, in log form.
pub fn log_pfq(z: f64, k: usize, tol: f64) -> Result<f64> {
    check(z, tol)?;
    let log_z = z.ln();
    sum_log_series(0, tol, |j| log_term(log_z, k, j))
}

pub fn pfq(z: f64, k: usize, tol: f64) -> Result<f64> {
    log_pfq(z, k, tol).map(f64::exp)
}

/// `E[exp(X_1 ... X_K)]` for i.i.d. `X_k ~ Uniform[0, a]`.
pub fn pfq_mean(a: f64, k: usize, tol: f64) -> Result<f64> {
    check(a, tol)?;
    pfq(a.powi(k as i32), k, tol)
}

/// `Var(exp(X_1 ... X_K))`, the standard estimator's asymptotic variance.
pub fn exp_product_variance(a: f64, k: usize, tol: f64) -> Result<f64> {
    check(a, tol)?;
    let z = a.powi(k as i32);
    let second = pfq(2.0 * z, k, tol)?;
    let mean = pfq(z, k, tol)?;
    Ok(second - mean * mean)
}

/// Bias `mu(phi) - mu(phi_J) = sum_{j > J} (1/j!) (a^j / (j+1))^K`.
pub fn taylor_bias(a: f64, k: usize, j_max: usize, tol: f64) -> Result<f64> {
    check(a, tol)?;
    let log_z = k as f64 * a.ln();
    // the tail terms can be tiny relative to the full series; sum them on their own
    sum_log_series(j_max + 1, tol, |j| log_term(log_z, k, j)).map(f64::exp)
}

/// `sigma_x^2(phi_J)`: the product-form asymptotic variance of the truncated
/// expansion.
pub fn taylor_pf_asymptotic_variance(a: f64, k: usize, j_max: usize) -> Result<f64> {
    check(a, 1.0)?;
    let kf = k as f64;
    let la = a.ln();
    let mut logs = Vec::with_capacity(j_max * j_max);
    for i in 1..=j_max {
        for j in 1..=j_max {
            let (fi, fj) = (i as f64, j as f64);
            logs.push(
                kf.ln() - ln_gamma(fi + 1.0) - ln_gamma(fj + 1.0) + (fi * fj).ln() - (fi + fj + 1.0).ln()
                    + kf * ((fi + fj) * la - (fi + 1.0).ln() - (fj + 1.0).ln()),
            );
        }
    }
    Ok(log_sum_exp(&logs).exp())
}
