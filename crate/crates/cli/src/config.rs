//! Experiment configuration. The JSON form mirrors the command-line flags:
//!
//! ```json
//! {"experiment": {"toy-gaussian": {"K": 5, "N": 1000, "R": 200}}, "seed": 7}
//! ```

use clap::Args;
use serde::{Deserialize, Serialize};

fn default_seed() -> u64 {
    7
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Leave wall-clock timings out of the outputs so re-runs are byte-identical.
    #[serde(default = "yes")]
    pub deterministic: bool,
    /// Run directory; the command line and the environment take precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    ToyGaussian(ToyGaussian),
    Tail(Tail),
    Scaling(Scaling),
    Taylor(Taylor),
    Hierarchical(Hierarchical),
    Mixture(Mixture),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::ToyGaussian(_) => "toy-gaussian",
            Experiment::Tail(_) => "tail",
            Experiment::Scaling(_) => "scaling",
            Experiment::Taylor(_) => "taylor",
            Experiment::Hierarchical(_) => "hierarchical",
            Experiment::Mixture(_) => "mixture",
        }
    }
}

/// Standard vs product-form estimates of `E[x_1 ... x_K]` under `N(1, I)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[group(skip)]
#[serde(deny_unknown_fields, default)]
pub struct ToyGaussian {
    #[serde(rename = "K")]
    #[arg(long = "K", default_value_t = 10)]
    pub k: usize,
    #[serde(rename = "N")]
    #[arg(long = "N", default_value_t = 1000)]
    pub n: usize,
    #[serde(rename = "R")]
    #[arg(long = "R", default_value_t = 500)]
    pub r: usize,
}

impl Default for ToyGaussian {
    fn default() -> Self {
        ToyGaussian { k: 10, n: 1000, r: 500 }
    }
}

/// The two-dimensional tail indicator `1{min(x_1, x_2) >= alpha}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[group(skip)]
#[serde(deny_unknown_fields, default)]
pub struct Tail {
    #[arg(long = "alpha", value_delimiter = ',', default_values_t = vec![0.0, 1.0, 2.0])]
    pub alpha: Vec<f64>,
    #[serde(rename = "N")]
    #[arg(long = "N", default_value_t = 200)]
    pub n: usize,
    #[serde(rename = "R")]
    #[arg(long = "R", default_value_t = 2000)]
    pub r: usize,
}

impl Default for Tail {
    fn default() -> Self {
        Tail { alpha: vec![0.0, 1.0, 2.0], n: 200, r: 2000 }
    }
}

/// i.i.d. products `prod_k x_k` with `x_k ~ N(1, CV^2)` over a grid of CV and K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[group(skip)]
#[serde(deny_unknown_fields, default)]
pub struct Scaling {
    #[arg(long = "cv", value_delimiter = ',', default_values_t = vec![0.5, 1.0])]
    pub cv: Vec<f64>,
    #[serde(rename = "K")]
    #[arg(long = "K", value_delimiter = ',', default_values_t = vec![1, 2, 5, 10])]
    pub k: Vec<usize>,
    #[serde(rename = "N")]
    #[arg(long = "N", default_value_t = 2000)]
    pub n: usize,
    #[serde(rename = "R")]
    #[arg(long = "R", default_value_t = 500)]
    pub r: usize,
    /// Relative tolerance for the cost frontier.
    #[arg(long = "eps", default_value_t = 0.01)]
    pub eps: f64,
    /// Relative cost of evaluating `phi` versus drawing a sample.
    #[arg(long = "c-r", default_value_t = 1.0)]
    pub c_r: f64,
}

impl Default for Scaling {
    fn default() -> Self {
        Scaling { cv: vec![0.5, 1.0], k: vec![1, 2, 5, 10], n: 2000, r: 500, eps: 0.01, c_r: 1.0 }
    }
}

/// `exp(x_1 ... x_K)` under `U(0, a)^K` with a truncated Taylor expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[group(skip)]
#[serde(deny_unknown_fields, default)]
pub struct Taylor {
    #[arg(long = "a", default_value_t = 1.5)]
    pub a: f64,
    #[serde(rename = "K")]
    #[arg(long = "K", default_value_t = 10)]
    pub k: usize,
    /// Truncation cutoff; defaults to `ceil(1.2 a^K) + 2`.
    #[serde(rename = "J")]
    #[arg(long = "J")]
    pub j: Option<usize>,
    #[serde(rename = "N")]
    #[arg(long = "N", default_value_t = 1_000_000)]
    pub n: usize,
    #[serde(rename = "R")]
    #[arg(long = "R", default_value_t = 20)]
    pub r: usize,
}

impl Default for Taylor {
    fn default() -> Self {
        Taylor { a: 1.5, k: 10, j: None, n: 1_000_000, r: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Gibbs,
    Rwm,
    Is,
    Pfis,
    Is2,
    Pfis2,
    Gimh,
    Pfgimh,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::Gibbs,
        Method::Rwm,
        Method::Is,
        Method::Pfis,
        Method::Is2,
        Method::Pfis2,
        Method::Gimh,
        Method::Pfgimh,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Gibbs => "gibbs",
            Method::Rwm => "rwm",
            Method::Is => "is",
            Method::Pfis => "pfis",
            Method::Is2 => "is2",
            Method::Pfis2 => "pfis2",
            Method::Gimh => "gimh",
            Method::Pfgimh => "pfgimh",
        }
    }
}

/// Eight approximations of the theta-marginal of the hierarchical Gaussian model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[group(skip)]
#[serde(deny_unknown_fields, default)]
pub struct Hierarchical {
    #[serde(rename = "K")]
    #[arg(long = "K", default_value_t = 100)]
    pub k: usize,
    #[arg(long = "alpha", default_value_t = 1.0)]
    pub alpha: f64,
    #[arg(long = "beta", default_value_t = 1.0)]
    pub beta: f64,
    /// Samples per method; chains run `N^2` steps, and `M = N`.
    #[serde(rename = "N")]
    #[arg(long = "N", default_value_t = 100)]
    pub n: usize,
    #[serde(rename = "R")]
    #[arg(long = "R", default_value_t = 10)]
    pub r: usize,
    #[arg(long = "methods", value_enum, value_delimiter = ',', default_values_t = Method::ALL.to_vec())]
    pub methods: Vec<Method>,
    /// Run RWM on `(log theta, x)` instead of `(theta, x)`.
    #[arg(long = "rwm-log-theta")]
    pub rwm_log_theta: bool,
    /// Observations as a one-column CSV; generated with theta = 1 when absent.
    #[arg(long = "data")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
}

impl Default for Hierarchical {
    fn default() -> Self {
        Hierarchical {
            k: 100,
            alpha: 1.0,
            beta: 1.0,
            n: 100,
            r: 10,
            methods: Method::ALL.to_vec(),
            rwm_log_theta: false,
            data: None,
        }
    }
}

/// Stratified estimators on a mixture of product-form components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Args)]
#[group(skip)]
#[serde(deny_unknown_fields, default)]
pub struct Mixture {
    /// Component weights; their count is the number of components.
    #[arg(long = "weights", value_delimiter = ',', default_values_t = vec![0.5, 0.3, 0.2])]
    pub weights: Vec<f64>,
    #[serde(rename = "K")]
    #[arg(long = "K", default_value_t = 3)]
    pub k: usize,
    /// Total sample budget across components.
    #[serde(rename = "N")]
    #[arg(long = "N", default_value_t = 60)]
    pub n: usize,
    #[serde(rename = "R")]
    #[arg(long = "R", default_value_t = 1000)]
    pub r: usize,
}

impl Default for Mixture {
    fn default() -> Self {
        Mixture { weights: vec![0.5, 0.3, 0.2], k: 3, n: 60, r: 1000 }
    }
}
