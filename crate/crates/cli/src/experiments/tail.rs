//! `phi = 1{x_1 >= alpha} 1{x_2 >= alpha}` with standard normal blocks. At
//! large `alpha` the standard estimator mostly returns zero.

use super::{cell, check_replicates, mean, sample_variance};
use crate::config::Tail;
use crate::error::{CliError, Result};
use crate::output::RunDir;
use prodform::diagnostics::{theory_ratio, TheoryRatio};
use prodform::distributions::standard_normal_cdf;
use prodform::estimators::{
    product_form_estimate, standard_estimate, MarginalSamples, PointSet, Strategy, TestFunction,
};
use prodform::factorized::{Factor, SopFunction};
use prodform::{Dist1D, SimRng};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Replicate {
    pub alpha: f64,
    pub replicate: usize,
    pub standard: f64,
    pub product_form: f64,
}

#[derive(Debug, Clone)]
pub struct AlphaRow {
    pub alpha: f64,
    /// `(1 - Phi(alpha))^2`
    pub truth: f64,
    pub mean_standard: f64,
    pub mean_pf: f64,
    pub var_standard: f64,
    pub var_pf: f64,
    pub theory_ratio: f64,
    /// Exact ratio of the two variances at the given `N`.
    pub finite_n_ratio: f64,
}

impl AlphaRow {
    pub fn empirical_ratio(&self) -> f64 {
        self.var_standard / self.var_pf
    }
}

#[derive(Debug, Clone)]
pub struct TailResult {
    pub params: Tail,
    pub rows: Vec<AlphaRow>,
    pub replicates: Vec<Replicate>,
}

/// `Var(standard) / Var(pf)` with `p = P(x >= alpha)`:
/// `(1 - p^2) / (2 p (1 - p) + (1 - p)^2 / N)`.
pub fn finite_n_ratio(alpha: f64, n: usize) -> f64 {
    let p = 1.0 - standard_normal_cdf(alpha);
    (1.0 - p * p) / (2.0 * p * (1.0 - p) + (1.0 - p) * (1.0 - p) / n as f64)
}

pub fn compute(p: &Tail, seed: u64) -> Result<TailResult> {
    check_replicates(p.r)?;
    if p.n == 0 || p.alpha.is_empty() || p.alpha.iter().any(|a| !a.is_finite()) {
        return Err(CliError::Config("tail needs N > 0 and finite alpha values".into()));
    }
    let master = SimRng::from_seed_u64(seed);
    let d = Dist1D::normal(0.0, 1.0)?;
    let mut rows = Vec::new();
    let mut replicates = Vec::new();
    for (ai, &alpha) in p.alpha.iter().enumerate() {
        let ind = Factor::custom(move |x| if x[0] >= alpha { 1.0 } else { 0.0 });
        let sop: TestFunction = SopFunction::with_unit_coeffs(vec![vec![ind.clone(), ind]])?.into();
        let black = sop.to_black_box();
        let stream = master.split(ai as u64);
        let reps = (0..p.r)
            .into_par_iter()
            .map(|r| {
                let rng = stream.split(r as u64);
                let s = MarginalSamples::new(
                    (0..2).map(|k| PointSet::scalars(d.sample_n(&mut rng.split(k), p.n))).collect(),
                )?;
                Ok(Replicate {
                    alpha,
                    replicate: r,
                    standard: standard_estimate(&s, &black)?.value,
                    product_form: product_form_estimate(&s, &sop, &Strategy::SopFastPath)?.value,
                })
            })
            .collect::<prodform::Result<Vec<_>>>()?;
        let std: Vec<f64> = reps.iter().map(|r| r.standard).collect();
        let pf: Vec<f64> = reps.iter().map(|r| r.product_form).collect();
        let q = 1.0 - standard_normal_cdf(alpha);
        rows.push(AlphaRow {
            alpha,
            truth: q * q,
            mean_standard: mean(&std),
            mean_pf: mean(&pf),
            var_standard: sample_variance(&std),
            var_pf: sample_variance(&pf),
            theory_ratio: theory_ratio(TheoryRatio::TailIndicator { alpha }),
            finite_n_ratio: finite_n_ratio(alpha, p.n),
        });
        replicates.extend(reps);
    }
    Ok(TailResult { params: p.clone(), rows, replicates })
}

pub fn write(res: &TailResult, dir: &mut RunDir) -> Result<()> {
    let columns = [
        ("alpha", "threshold"),
        ("N", "samples per coordinate"),
        ("R", "replicates"),
        ("truth", "(1-Phi(alpha))^2"),
        ("mean_standard", "average standard estimate"),
        ("mean_pf", "average product-form estimate"),
        ("var_standard", "replicate variance of the standard estimator"),
        ("var_pf", "replicate variance of the product-form estimator"),
        ("empirical_ratio", "var_standard/var_pf"),
        ("theory_ratio", "(2-Phi(alpha))/(2(1-Phi(alpha))), the large-N ratio"),
        ("finite_n_ratio", "exact variance ratio at this N"),
    ];
    let rows: Vec<Vec<String>> = res
        .rows
        .iter()
        .map(|r| {
            vec![
                cell(r.alpha),
                res.params.n.to_string(),
                res.params.r.to_string(),
                cell(r.truth),
                cell(r.mean_standard),
                cell(r.mean_pf),
                cell(r.var_standard),
                cell(r.var_pf),
                cell(r.empirical_ratio()),
                cell(r.theory_ratio),
                cell(r.finite_n_ratio),
            ]
        })
        .collect();
    dir.csv("tail.csv", &columns, &rows)?;
    dir.ndjson("replicates.ndjson", &res.replicates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_ratio_tends_to_theory() {
        for a in [0.0, 1.0, 2.0] {
            let t = theory_ratio(TheoryRatio::TailIndicator { alpha: a });
            assert!((finite_n_ratio(a, 1 << 40) - t).abs() < 1e-6 * t);
            assert!(finite_n_ratio(a, 200) < t);
        }
    }
}
