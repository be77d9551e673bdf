//! Standard vs product-form estimates of `E[x_1 ... x_K] = 1` with
//! `x_k ~ N(1, 1)`: the variances are `(2^K - 1) / N` and about `K / N`.

use super::{cell, check_replicates, mean, sample_variance};
use crate::config::ToyGaussian;
use crate::error::Result;
use crate::output::RunDir;
use prodform::estimators::{
    product_form_estimate, standard_estimate, MarginalSamples, PointSet, Strategy, TestFunction,
};
use prodform::factorized::SopFunction;
use prodform::{Dist1D, SimRng};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct Replicate {
    pub replicate: usize,
    pub standard: f64,
    pub product_form: f64,
}

#[derive(Debug, Clone)]
pub struct ToyResult {
    pub params: ToyGaussian,
    pub replicates: Vec<Replicate>,
    pub var_standard: f64,
    pub var_pf: f64,
    pub theory_standard: f64,
    pub theory_pf: f64,
}

impl ToyResult {
    pub fn ratio(&self) -> f64 {
        self.var_standard / self.var_pf
    }

    /// `sigma^2 / sigma_x^2 = (2^K - 1) / K`.
    pub fn theory_ratio(&self) -> f64 {
        self.theory_standard / self.theory_pf
    }
}

pub fn compute(p: &ToyGaussian, seed: u64) -> Result<ToyResult> {
    check_replicates(p.r)?;
    let master = SimRng::from_seed_u64(seed);
    let d = Dist1D::normal(1.0, 1.0)?;
    let sop: TestFunction = SopFunction::product_of_coordinates(p.k).into();
    let black = sop.to_black_box();
    let replicates = (0..p.r)
        .into_par_iter()
        .map(|r| {
            let rng = master.split(r as u64);
            let blocks = (0..p.k).map(|k| PointSet::scalars(d.sample_n(&mut rng.split(k as u64), p.n))).collect();
            let s = MarginalSamples::new(blocks)?;
            Ok(Replicate {
                replicate: r,
                standard: standard_estimate(&s, &black)?.value,
                product_form: product_form_estimate(&s, &sop, &Strategy::SopFastPath)?.value,
            })
        })
        .collect::<prodform::Result<Vec<_>>>()?;
    let std: Vec<f64> = replicates.iter().map(|r| r.standard).collect();
    let pf: Vec<f64> = replicates.iter().map(|r| r.product_form).collect();
    let n = p.n as f64;
    Ok(ToyResult {
        params: p.clone(),
        var_standard: sample_variance(&std),
        var_pf: sample_variance(&pf),
        theory_standard: (2f64.powi(p.k as i32) - 1.0) / n,
        theory_pf: p.k as f64 / n,
        replicates,
    })
}

pub fn write(res: &ToyResult, dir: &mut RunDir) -> Result<()> {
    let columns = [
        ("estimator", "standard or product-form"),
        ("K", "number of blocks"),
        ("N", "samples per block"),
        ("R", "replicates"),
        ("mean", "average estimate over replicates (truth is 1)"),
        ("replicate_variance", "unbiased variance of the estimates across replicates"),
        ("theory_variance", "(2^K-1)/N for standard; K/N (leading order) for product-form"),
        ("relative_error", "replicate_variance/theory_variance - 1"),
    ];
    let p = &res.params;
    let mut rows = Vec::new();
    for (name, vals, var, theory) in [
        (
            "standard",
            res.replicates.iter().map(|r| r.standard).collect::<Vec<_>>(),
            res.var_standard,
            res.theory_standard,
        ),
        ("product-form", res.replicates.iter().map(|r| r.product_form).collect(), res.var_pf, res.theory_pf),
    ] {
        rows.push(vec![
            name.to_string(),
            p.k.to_string(),
            p.n.to_string(),
            p.r.to_string(),
            cell(mean(&vals)),
            cell(var),
            cell(theory),
            cell(var / theory - 1.0),
        ]);
    }
    dir.csv("variances.csv", &columns, &rows)?;
    dir.csv(
        "ratio.csv",
        &[("empirical_ratio", "standard over product-form replicate variance"), ("theory_ratio", "(2^K-1)/K")],
        &[vec![cell(res.ratio()), cell(res.theory_ratio())]],
    )?;
    dir.ndjson("replicates.ndjson", &res.replicates)
}
