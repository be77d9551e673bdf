//! i.i.d. products `prod_k x_k`, `x_k ~ N(1, CV^2)`: the variance ratio grows
//! like `(1 + CV^2)^K / (CV^2 K)`. Also evaluates the cost frontier.

use super::{cell, check_replicates, sample_variance};
use crate::config::Scaling;
use crate::error::{CliError, Result};
use crate::output::RunDir;
use prodform::diagnostics::{frontier_sides, iid_frontier_log_sides, iid_product_variances, theory_ratio, TheoryRatio};
use prodform::estimators::{
    product_form_estimate, standard_estimate, MarginalSamples, PointSet, Strategy, TestFunction,
};
use prodform::factorized::SopFunction;
use prodform::{Dist1D, SimRng};
use rayon::prelude::*;

#[derive(Debug, Clone)]
pub struct ScalingRow {
    pub cv: f64,
    pub k: usize,
    pub var_standard: f64,
    pub var_pf: f64,
    pub theory_ratio: f64,
    /// Frontier sides at the target variance `(eps mu)^2`, or `None` outside
    /// the regime where the frontier applies.
    pub frontier: Option<(f64, f64)>,
    pub large_k_log_sides: (f64, f64),
}

impl ScalingRow {
    pub fn empirical_ratio(&self) -> f64 {
        self.var_standard / self.var_pf
    }
}

#[derive(Debug, Clone)]
pub struct ScalingResult {
    pub params: Scaling,
    pub rows: Vec<ScalingRow>,
}

pub fn compute(p: &Scaling, seed: u64) -> Result<ScalingResult> {
    check_replicates(p.r)?;
    if p.n == 0 || p.k.contains(&0) || p.cv.iter().any(|&c| !(c > 0.0 && c.is_finite())) {
        return Err(CliError::Config("scaling needs N > 0, K > 0 and positive CV".into()));
    }
    let master = SimRng::from_seed_u64(seed);
    let mut rows = Vec::new();
    for (ci, &cv) in p.cv.iter().enumerate() {
        let d = Dist1D::normal(1.0, cv * cv)?;
        for (ki, &k) in p.k.iter().enumerate() {
            let sop: TestFunction = SopFunction::product_of_coordinates(k).into();
            let black = sop.to_black_box();
            let stream = master.split(ci as u64).split(ki as u64);
            let pairs = (0..p.r)
                .into_par_iter()
                .map(|r| {
                    let rng = stream.split(r as u64);
                    let s = MarginalSamples::new(
                        (0..k).map(|b| PointSet::scalars(d.sample_n(&mut rng.split(b as u64), p.n))).collect(),
                    )?;
                    Ok((
                        standard_estimate(&s, &black)?.value,
                        product_form_estimate(&s, &sop, &Strategy::SopFastPath)?.value,
                    ))
                })
                .collect::<prodform::Result<Vec<_>>>()?;
            let (std, pf): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            let (s2, s2pf) = iid_product_variances(1.0, cv, k);
            let target = p.eps * p.eps;
            let frontier = frontier_sides(s2, s2pf, k, target, p.c_r).ok();
            rows.push(ScalingRow {
                cv,
                k,
                var_standard: sample_variance(&std),
                var_pf: sample_variance(&pf),
                theory_ratio: theory_ratio(TheoryRatio::IidProduct { cv, k }),
                frontier,
                large_k_log_sides: iid_frontier_log_sides(cv, k, p.eps)?,
            });
        }
    }
    Ok(ScalingResult { params: p.clone(), rows })
}

pub fn write(res: &ScalingResult, dir: &mut RunDir) -> Result<()> {
    let columns = [
        ("cv", "coefficient of variation of each factor"),
        ("K", "number of factors"),
        ("N", "samples per block"),
        ("R", "replicates"),
        ("var_standard", "replicate variance of the standard estimator"),
        ("var_pf", "replicate variance of the product-form estimator"),
        ("empirical_ratio", "var_standard/var_pf"),
        ("theory_ratio", "((1+CV^2)^K-1)/(CV^2 K)"),
        ("frontier_lhs", "sigma^2/sigma_x^2; empty when sigma_x^2 does not exceed the target (eps mu)^2"),
        ("frontier_rhs", "((sigma_x^2/target)^(K-1) C_r + 1)/(C_r + 1)"),
        ("pf_cheaper", "frontier_lhs >= frontier_rhs"),
        ("large_k_log_lhs", "log(((1+CV^2)^K-1)/CV^(2K))"),
        ("large_k_log_rhs", "log((eps^2/2)(K/eps^2)^K)"),
    ];
    let p = &res.params;
    let rows: Vec<Vec<String>> = res
        .rows
        .iter()
        .map(|r| {
            let (lhs, rhs, cheaper) = match r.frontier {
                Some((l, h)) => (cell(l), cell(h), (l >= h).to_string()),
                None => (String::new(), String::new(), String::new()),
            };
            vec![
                cell(r.cv),
                r.k.to_string(),
                p.n.to_string(),
                p.r.to_string(),
                cell(r.var_standard),
                cell(r.var_pf),
                cell(r.empirical_ratio()),
                cell(r.theory_ratio),
                lhs,
                rhs,
                cheaper,
                cell(r.large_k_log_sides.0),
                cell(r.large_k_log_sides.1),
            ]
        })
        .collect();
    dir.csv("scaling.csv", &columns, &rows)
}
