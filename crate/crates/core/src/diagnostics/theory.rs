use crate::distributions::standard_normal_cdf;
use crate::error::{Error, Result};

/// Whether the product-form estimator is at least as cost-efficient as the
/// standard one for a target variance, given `sigma^2`, `sigma_x^2`, `K` and the
/// relative cost `C_r` of evaluating `phi` versus drawing a sample.
///
/// Checks `sigma^2 / sigma_x^2 >= ((sigma_x^2 / target)^(K-1) C_r + 1) / (C_r + 1)`.
/// The asymptotic sample-size approximation behind it needs
/// `sigma_x^2 > target`; otherwise a single sample suffices and
/// [`Error::Regime`] is returned.
pub fn efficiency_frontier(sigma_sq: f64, sigma_sq_pf: f64, k: usize, target_sigma_sq: f64, c_r: f64) -> Result<bool> {
    let (lhs, rhs) = frontier_sides(sigma_sq, sigma_sq_pf, k, target_sigma_sq, c_r)?;
    Ok(lhs >= rhs)
}

/// Both sides of the frontier inequality, in log form when they overflow.
pub fn frontier_sides(sigma_sq: f64, sigma_sq_pf: f64, k: usize, target_sigma_sq: f64, c_r: f64) -> Result<(f64, f64)> {
    check_positive(&[("sigma_sq", sigma_sq), ("sigma_sq_pf", sigma_sq_pf), ("target", target_sigma_sq)])?;
    if !(c_r.is_finite() && c_r >= 0.0) {
        return Err(Error::InvalidArgument("relative cost must be finite and nonnegative".into()));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("K must be positive".into()));
    }
    if sigma_sq_pf <= target_sigma_sq {
        return Err(Error::Regime(format!(
            "sigma_x^2 = {sigma_sq_pf} does not exceed the target {target_sigma_sq}; one sample suffices"
        )));
    }
    let lhs = sigma_sq / sigma_sq_pf;
    let growth = (sigma_sq_pf / target_sigma_sq).powi(k as i32 - 1);
    Ok((lhs, (growth * c_r + 1.0) / (c_r + 1.0)))
}

/// Large-`K` reduction of the frontier at `C_r = 1`:
/// `sigma^2 / sigma_x^2 >= (sigma_x^2 / target)^(K-1) / 2`.
pub fn efficiency_frontier_large_k(sigma_sq: f64, sigma_sq_pf: f64, k: usize, target_sigma_sq: f64) -> Result<bool> {
    let (lhs, _) = frontier_sides(sigma_sq, sigma_sq_pf, k, target_sigma_sq, 1.0)?;
    Ok(lhs >= 0.5 * (sigma_sq_pf / target_sigma_sq).powi(k as i32 - 1))
}

/// The large-`K` frontier for the i.i.d. product family at relative tolerance
/// `eps`, as `(log lhs, log rhs)` of
/// `((1 + CV^2)^K - 1) / CV^(2K) >= (eps^2 / 2) (K / eps^2)^K`.
pub fn iid_frontier_log_sides(cv: f64, k: usize, eps: f64) -> Result<(f64, f64)> {
    check_positive(&[("CV", cv), ("eps", eps)])?;
    let kf = k as f64;
    let c2 = cv * cv;
    let lhs = ((1.0 + c2).powf(kf) - 1.0).ln() - kf * c2.ln();
    let rhs = (eps * eps / 2.0).ln() + kf * (kf / (eps * eps)).ln();
    Ok((lhs, rhs))
}

fn check_positive(vals: &[(&str, f64)]) -> Result<()> {
    for (name, v) in vals {
        if !(v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// Closed-form variance ratios `sigma^2 / sigma_x^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TheoryRatio {
    /// `phi = prod_k psi(x_k)` with i.i.d. blocks and coefficient of variation `cv`:
    /// `((1 + CV^2)^K - 1) / (CV^2 K)`.
    IidProduct { cv: f64, k: usize },
    /// `phi = 1{x_1 >= alpha} 1{x_2 >= alpha}` with independent standard normal
    /// blocks: `(2 - Phi(alpha)) / (2 (1 - Phi(alpha)))`.
    TailIndicator { alpha: f64 },
}

pub fn theory_ratio(kind: TheoryRatio) -> f64 {
    match kind {
        TheoryRatio::IidProduct { cv, k } => {
            let c2 = cv * cv;
            // expm1/ln_1p keep small CV accurate
            (k as f64 * c2.ln_1p()).exp_m1() / (c2 * k as f64)
        }
        TheoryRatio::TailIndicator { alpha } => {
            let p = standard_normal_cdf(alpha);
            (2.0 - p) / (2.0 * (1.0 - p))
        }
    }
}

/// `(sigma^2, sigma_x^2)` for the i.i.d. product family with block mean `rho`.
pub fn iid_product_variances(rho: f64, cv: f64, k: usize) -> (f64, f64) {
    let scale = rho.powi(2 * k as i32);
    let c2 = cv * cv;
    (scale * (k as f64 * c2.ln_1p()).exp_m1(), scale * k as f64 * c2)
}
