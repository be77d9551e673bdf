//! Eight approximations of the theta-marginal of the hierarchical Gaussian
//! model, scored against a quadrature reference.
//!
//! Chains (Gibbs, RWM) run `N^2` steps; IS uses `N^2` joint draws and PFIS `N`;
//! IS2 and PFIS2 use `M = N` outer draws with `N` inner draws each; GIMH and
//! PFGIMH run `N` steps with `N` inner draws. All chains discard the first 20%.

use super::{cell, check_replicates, mean};
use crate::config::{Hierarchical, Method};
use crate::error::{CliError, Result};
use crate::output::RunDir;
use prodform::diagnostics::{
    ks_statistic, reference_theta_posterior, w1_distance, CdfEvaluator, Ecdf, GridSpec, ReferencePosterior,
};
use prodform::importance::{
    theta_marginal_is, theta_marginal_is2, theta_marginal_pfis, theta_marginal_pfis2, WeightedParticles,
};
use prodform::mcmc::{
    gibbs_hierarchical, gimh_chain, rwm_chain, ChainTrace, DensityMode, GimhConfig, HierarchicalModel, LogRandomWalk,
    RwmConfig, ThetaProposal,
};
use prodform::SimRng;
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

pub const BURN_IN: f64 = 0.2;
pub const TARGET_ACCEPT: f64 = 0.25;
/// Steps of the adaptive pilot run that tunes each GIMH proposal, in units of `N`.
const PILOT_FACTOR: usize = 10;
const RWM_INITIAL_SCALE: f64 = 0.05;
const GIMH_INITIAL_SCALE: f64 = 0.5;
/// Points in the reference ECDF dump.
const REFERENCE_DUMP: usize = 2000;

#[derive(Debug, Clone, Serialize)]
pub struct MethodRun {
    pub replicate: usize,
    pub method: &'static str,
    pub w1: f64,
    /// `w1` divided by the reference standard deviation.
    pub w1_normalized: f64,
    pub ks: f64,
    /// `|mean / reference mean - 1|`
    pub mean_rel_error: f64,
    pub sd_rel_error: f64,
    pub top_mass_1: Option<f64>,
    pub top_mass_3: Option<f64>,
    pub ess: Option<f64>,
    /// `sum_k |E[x_k] - reference|`, for methods that approximate the latents.
    pub x_mean_abs_error: Option<f64>,
    pub x_sd_abs_error: Option<f64>,
    pub acceptance_rate: Option<f64>,
    pub proposal_scale: Option<f64>,
    /// 1 for the smallest `w1` within the replicate.
    pub w1_rank: usize,
    #[serde(skip)]
    pub ecdf: Ecdf,
}

#[derive(Debug, Clone)]
pub struct HierarchicalResult {
    pub params: Hierarchical,
    pub y: Vec<f64>,
    pub reference: ReferencePosterior,
    pub reference_latent: (Vec<f64>, Vec<f64>),
    /// `runs[r]` holds replicate `r`'s methods in the configured order.
    pub runs: Vec<Vec<MethodRun>>,
}

impl HierarchicalResult {
    pub fn run(&self, replicate: usize, method: Method) -> Option<&MethodRun> {
        self.runs[replicate].iter().find(|m| m.method == method.name())
    }
}

/// Reads one observation per line, skipping a header and `#` comments.
pub fn load_observations(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut y = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let field = rec.get(0).unwrap_or("").trim();
        match field.parse::<f64>() {
            Ok(v) if v.is_finite() => y.push(v),
            _ if i == 0 => continue,
            _ => {
                return Err(CliError::Config(format!(
                    "{}: line {} is not a finite number: {field:?}",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(y)
}

fn validate(p: &Hierarchical) -> Result<()> {
    check_replicates(p.r)?;
    if p.n < 2 {
        return Err(CliError::Config(format!("N must be at least 2, got {}", p.n)));
    }
    if p.methods.is_empty() {
        return Err(CliError::Config("no methods selected".into()));
    }
    let mut seen = p.methods.clone();
    seen.sort_by_key(|m| m.name());
    seen.dedup();
    if seen.len() != p.methods.len() {
        return Err(CliError::Config("a method is listed twice".into()));
    }
    Ok(())
}

pub fn compute(p: &Hierarchical, seed: u64) -> Result<HierarchicalResult> {
    validate(p)?;
    let master = SimRng::from_seed_u64(seed);
    let y = match &p.data {
        Some(path) => load_observations(Path::new(path))?,
        None => HierarchicalModel::simulate_observations(p.k, 1.0, &mut master.split_named("data")),
    };
    if p.data.is_some() && y.len() != p.k {
        return Err(CliError::Config(format!("K = {} but the data file has {} observations", p.k, y.len())));
    }
    let model = HierarchicalModel::new(y.clone(), p.alpha, p.beta)?;
    let reference = reference_theta_posterior(&model, GridSpec::default())?;
    let (e_s, e_s2) = reference.shrinkage_moments();
    let reference_latent = model.latent_moments(e_s, e_s2);
    let runs = (0..p.r)
        .into_par_iter()
        .map(|r| {
            let rng = master.split(r as u64);
            let mut out = p
                .methods
                .iter()
                .map(|&m| {
                    run_method(&model, m, p.n, p.rwm_log_theta, &rng.split_named(m.name()))
                        .and_then(|a| score(a, r, m, &reference, &reference_latent))
                })
                .collect::<prodform::Result<Vec<_>>>()?;
            let mut order: Vec<usize> = (0..out.len()).collect();
            order.sort_by(|&a, &b| out[a].w1.total_cmp(&out[b].w1));
            for (rank, i) in order.into_iter().enumerate() {
                out[i].w1_rank = rank + 1;
            }
            Ok(out)
        })
        .collect::<prodform::Result<Vec<_>>>()?;
    Ok(HierarchicalResult { params: p.clone(), y, reference, reference_latent, runs })
}

/// What a method produced before scoring.
enum Approximation {
    Particles(WeightedParticles),
    Chain { thetas: Vec<f64>, latent: Option<(Vec<f64>, Vec<f64>)>, acceptance: f64, scale: Option<f64> },
}

fn chain_latent(trace: &ChainTrace, k: usize) -> (Vec<f64>, Vec<f64>) {
    let mut means = Vec::with_capacity(k);
    let mut sds = Vec::with_capacity(k);
    for c in 1..=k {
        let xs = trace.kept_coordinate(c);
        let m = mean(&xs);
        let v = mean(&xs.iter().map(|x| (x - m) * (x - m)).collect::<Vec<_>>());
        means.push(m);
        sds.push(v.sqrt());
    }
    (means, sds)
}

/// A random walk on `log theta` whose scale stays where the pilot left it.
struct Frozen(LogRandomWalk);

impl ThetaProposal for Frozen {
    fn propose(&self, theta: &[f64], rng: &mut SimRng) -> Vec<f64> {
        self.0.propose(theta, rng)
    }

    fn log_q_ratio(&self, from: &[f64], to: &[f64]) -> f64 {
        self.0.log_q_ratio(from, to)
    }

    fn scale(&self) -> f64 {
        self.0.scale
    }

    fn set_scale(&mut self, _: f64) {}

    fn adaptive(&self) -> bool {
        false
    }
}

fn gimh(model: &HierarchicalModel, n: usize, mode: DensityMode, rng: &SimRng) -> prodform::Result<Approximation> {
    let kernel = |t: &[f64], n: usize, r: &SimRng| model.sample_kernel(t[0], n, r);
    let w = model.gimh_weight();
    let init = [model.initial_theta()];
    // the pilot adapts throughout; its final scale is frozen for the real run
    let mut pilot = LogRandomWalk { scale: GIMH_INITIAL_SCALE };
    let pilot_cfg = GimhConfig {
        n_inner: n,
        mode,
        steps: PILOT_FACTOR * n,
        burn_in_fraction: 1.0 - 0.5 / (PILOT_FACTOR * n) as f64,
        target_accept: TARGET_ACCEPT,
        ..GimhConfig::default()
    };
    gimh_chain(&kernel, &w, &mut pilot, &init, &pilot_cfg, &mut rng.split_named("pilot"))?;
    let mut proposal = Frozen(pilot);
    let cfg = GimhConfig { steps: n, burn_in_fraction: BURN_IN, ..pilot_cfg };
    let trace = gimh_chain(&kernel, &w, &mut proposal, &init, &cfg, &mut rng.split_named("chain"))?;
    Ok(Approximation::Chain {
        thetas: trace.kept_coordinate(0),
        latent: None,
        acceptance: trace.kept_acceptance_rate(),
        scale: Some(proposal.0.scale),
    })
}

fn run_method(
    model: &HierarchicalModel,
    method: Method,
    n: usize,
    log_theta: bool,
    rng: &SimRng,
) -> prodform::Result<Approximation> {
    let k = model.k();
    let n2 = n * n;
    Ok(match method {
        Method::Gibbs => {
            let trace = gibbs_hierarchical(model, n2, BURN_IN, &mut rng.clone())?;
            Approximation::Chain {
                thetas: trace.kept_coordinate(0),
                latent: Some(chain_latent(&trace, k)),
                acceptance: 1.0,
                scale: None,
            }
        }
        Method::Rwm => {
            // on (log theta, x) the Jacobian of theta = exp(u) adds u;
            // on (theta, x) the joint is -inf for theta <= 0
            let target = |s: &[f64]| {
                if log_theta {
                    model.log_joint(s[0].exp(), &s[1..]) + s[0]
                } else {
                    model.log_joint(s[0], &s[1..])
                }
            };
            let mut init = vec![0.0; k + 1];
            init[0] = model.initial_theta();
            if log_theta {
                init[0] = init[0].ln();
            }
            let cfg = RwmConfig {
                steps: n2,
                initial_scale: RWM_INITIAL_SCALE,
                target_accept: TARGET_ACCEPT,
                burn_in_fraction: BURN_IN,
            };
            let trace = rwm_chain(target, &init, &cfg, &mut rng.clone())?;
            Approximation::Chain {
                thetas: if log_theta {
                    trace.kept_coordinate(0).into_iter().map(f64::exp).collect()
                } else {
                    trace.kept_coordinate(0)
                },
                latent: Some(chain_latent(&trace, k)),
                acceptance: trace.kept_acceptance_rate(),
                scale: trace.proposal_scale_history.last().copied(),
            }
        }
        Method::Is => {
            Approximation::Particles(theta_marginal_is(&model.sample_is_proposal(n2, rng)?, &model.is_weight())?)
        }
        Method::Pfis => {
            Approximation::Particles(theta_marginal_pfis(&model.sample_is_proposal(n, rng)?, &model.is_weight())?)
        }
        Method::Is2 => {
            Approximation::Particles(theta_marginal_is2(&model.sample_conditional(n, n, rng)?, &model.is2_weight())?)
        }
        Method::Pfis2 => {
            Approximation::Particles(theta_marginal_pfis2(&model.sample_conditional(n, n, rng)?, &model.is2_weight())?)
        }
        Method::Gimh => gimh(model, n, DensityMode::Standard, rng)?,
        Method::Pfgimh => gimh(model, n, DensityMode::ProductForm, rng)?,
    })
}

fn abs_error(est: &[f64], truth: &[f64]) -> f64 {
    prodform::numeric::sum(est.iter().zip(truth).map(|(a, b)| (a - b).abs()))
}

fn score(
    approx: Approximation,
    replicate: usize,
    method: Method,
    reference: &ReferencePosterior,
    reference_latent: &(Vec<f64>, Vec<f64>),
) -> prodform::Result<MethodRun> {
    let (ecdf, top1, top3, ess, latent, acceptance, scale) = match approx {
        Approximation::Particles(p) => {
            let latent = p.latent_moments();
            (Ecdf::from_particles(&p)?, Some(p.top_mass(1)), Some(p.top_mass(3)), Some(p.ess()), latent, None, None)
        }
        Approximation::Chain { thetas, latent, acceptance, scale } => {
            (Ecdf::from_samples(&thetas)?, None, None, None, latent, Some(acceptance), scale)
        }
    };
    let w1 = w1_distance(&ecdf, reference)?;
    let sd = reference.sd();
    Ok(MethodRun {
        replicate,
        method: method.name(),
        w1,
        w1_normalized: w1 / sd,
        ks: ks_statistic(&ecdf, reference)?,
        mean_rel_error: (ecdf.mean() / reference.mean() - 1.0).abs(),
        sd_rel_error: (ecdf.sd() / sd - 1.0).abs(),
        top_mass_1: top1,
        top_mass_3: top3,
        ess,
        x_mean_abs_error: latent.as_ref().map(|(m, _)| abs_error(m, &reference_latent.0)),
        x_sd_abs_error: latent.as_ref().map(|(_, s)| abs_error(s, &reference_latent.1)),
        acceptance_rate: acceptance,
        proposal_scale: scale,
        w1_rank: 0,
        ecdf,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map(cell).unwrap_or_default()
}

pub fn write(res: &HierarchicalResult, dir: &mut RunDir) -> Result<()> {
    let metric_columns = [
        ("replicate", "replicate index"),
        ("method", "gibbs, rwm, is, pfis, is2, pfis2, gimh or pfgimh"),
        ("w1", "Wasserstein-1 distance between the theta ECDF and the reference"),
        ("w1_normalized", "w1 divided by the reference standard deviation"),
        ("ks", "Kolmogorov-Smirnov statistic against the reference"),
        ("mean_rel_error", "|mean/reference mean - 1| for theta"),
        ("sd_rel_error", "|sd/reference sd - 1| for theta"),
        ("top_mass_1", "largest normalized weight (weighted methods only)"),
        ("top_mass_3", "sum of the three largest normalized weights (weighted methods only)"),
        ("ess", "effective sample size 1/sum w^2 (weighted methods only)"),
        ("x_mean_abs_error", "sum over k of |estimated - reference| posterior mean of x_k"),
        ("x_sd_abs_error", "sum over k of |estimated - reference| posterior sd of x_k"),
        ("acceptance_rate", "post burn-in acceptance rate (chains only)"),
        ("proposal_scale", "final proposal scale (adaptive chains only)"),
        ("w1_rank", "rank of w1 among the methods in this replicate, 1 = best"),
    ];
    let rows: Vec<Vec<String>> = res
        .runs
        .iter()
        .flatten()
        .map(|m| {
            vec![
                m.replicate.to_string(),
                m.method.to_string(),
                cell(m.w1),
                cell(m.w1_normalized),
                cell(m.ks),
                cell(m.mean_rel_error),
                cell(m.sd_rel_error),
                opt(m.top_mass_1),
                opt(m.top_mass_3),
                opt(m.ess),
                opt(m.x_mean_abs_error),
                opt(m.x_sd_abs_error),
                opt(m.acceptance_rate),
                opt(m.proposal_scale),
                m.w1_rank.to_string(),
            ]
        })
        .collect();
    dir.csv("metrics.csv", &metric_columns, &rows)?;

    let avg = |method: &str, f: &dyn Fn(&MethodRun) -> Option<f64>| -> Option<f64> {
        let v: Vec<f64> = res.runs.iter().flatten().filter(|m| m.method == method).filter_map(f).collect();
        (!v.is_empty()).then(|| mean(&v))
    };
    let methods: Vec<&'static str> = res.params.methods.iter().map(|m| m.name()).collect();
    let mean_w1: Vec<f64> = methods.iter().map(|m| avg(m, &|r| Some(r.w1_normalized)).unwrap_or(f64::NAN)).collect();
    let mut order: Vec<usize> = (0..methods.len()).collect();
    order.sort_by(|&a, &b| mean_w1[a].total_cmp(&mean_w1[b]));
    let mut rank = vec![0; methods.len()];
    for (r, i) in order.into_iter().enumerate() {
        rank[i] = r + 1;
    }
    let summary: Vec<Vec<String>> = methods
        .iter()
        .enumerate()
        .map(|(i, m)| {
            vec![
                m.to_string(),
                rank[i].to_string(),
                cell(100.0 * mean_w1[i]),
                opt(avg(m, &|r| Some(r.w1)).map(|v| 100.0 * v / res.reference.mean())),
                opt(avg(m, &|r| Some(100.0 * r.ks))),
                opt(avg(m, &|r| Some(100.0 * r.mean_rel_error))),
                opt(avg(m, &|r| Some(100.0 * r.sd_rel_error))),
                opt(avg(m, &|r| r.top_mass_3)),
                opt(avg(m, &|r| r.x_mean_abs_error)),
                opt(avg(m, &|r| r.x_sd_abs_error)),
            ]
        })
        .collect();
    dir.csv(
        "summary.csv",
        &[
            ("method", "approximation"),
            ("rank", "rank of w1_pct_sd among the methods, 1 = best"),
            ("w1_pct_sd", "mean over replicates of 100 w1/reference sd"),
            ("w1_pct_mean", "mean over replicates of 100 w1/reference mean"),
            ("ks_pct", "mean over replicates of 100 ks"),
            ("mean_err_pct", "mean over replicates of 100 |mean/reference mean - 1|"),
            ("sd_err_pct", "mean over replicates of 100 |sd/reference sd - 1|"),
            ("top_mass_3", "mean over replicates of the three largest weights' mass"),
            ("x_mean_abs_error", "mean over replicates of the total latent-mean error"),
            ("x_sd_abs_error", "mean over replicates of the total latent-sd error"),
        ],
        &summary,
    )?;
    dir.csv(
        "reference.csv",
        &[
            ("K", "number of observations"),
            ("alpha", "prior shape parameter"),
            ("beta", "prior scale parameter"),
            ("mean", "reference posterior mean of theta"),
            ("sd", "reference posterior sd of theta"),
        ],
        &[vec![
            res.params.k.to_string(),
            cell(res.params.alpha),
            cell(res.params.beta),
            cell(res.reference.mean()),
            cell(res.reference.sd()),
        ]],
    )?;
    dir.csv("data.csv", &[("y", "observation")], &res.y.iter().map(|v| vec![cell(*v)]).collect::<Vec<_>>())?;
    dir.ndjson("metrics.ndjson", &res.runs.iter().flatten().collect::<Vec<_>>())?;
    for m in &res.runs[0] {
        dir.ecdf(&format!("ecdf_{}.txt", m.method), &m.ecdf)?;
    }
    let reference = &res.reference;
    dir.pairs(
        "ecdf_reference.txt",
        (0..REFERENCE_DUMP).map(|i| {
            let p = (i as f64 + 0.5) / REFERENCE_DUMP as f64;
            let x = reference.quantile(p);
            (x, reference.cdf(x))
        }),
    )
}
