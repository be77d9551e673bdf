pub mod hierarchical;
pub mod mixture;
pub mod scaling;
pub mod tail;
pub mod taylor;
pub mod toy_gaussian;

use crate::config::{Experiment, ExperimentConfig};
use crate::error::Result;
use crate::output::{num, Manifest, RunDir};
use std::path::Path;
use std::time::Instant;

/// Runs `config` into `out` and writes the manifest.
pub fn run(config: &ExperimentConfig, out: &Path, force: bool) -> Result<Manifest> {
    let start = Instant::now();
    let mut dir = RunDir::create(out, force)?;
    let seed = config.seed;
    match &config.experiment {
        Experiment::ToyGaussian(p) => toy_gaussian::write(&toy_gaussian::compute(p, seed)?, &mut dir)?,
        Experiment::Tail(p) => tail::write(&tail::compute(p, seed)?, &mut dir)?,
        Experiment::Scaling(p) => scaling::write(&scaling::compute(p, seed)?, &mut dir)?,
        Experiment::Taylor(p) => taylor::write(&taylor::compute(p, seed)?, &mut dir)?,
        Experiment::Hierarchical(p) => hierarchical::write(&hierarchical::compute(p, seed)?, &mut dir)?,
        Experiment::Mixture(p) => mixture::write(&mixture::compute(p, seed)?, &mut dir)?,
    }
    let recorded = ExperimentConfig { out_dir: None, ..config.clone() };
    let elapsed = (!config.deterministic).then(|| start.elapsed().as_secs_f64());
    dir.finish(&recorded, elapsed)
}

/// Unbiased sample variance.
pub(crate) fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let m = prodform::numeric::sum(xs.iter().copied()) / n;
    prodform::numeric::sum(xs.iter().map(|x| (x - m) * (x - m))) / (n - 1.0)
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    prodform::numeric::sum(xs.iter().copied()) / xs.len() as f64
}

pub(crate) fn check_replicates(r: usize) -> Result<()> {
    if r < 2 {
        return Err(crate::CliError::Config(format!("need at least 2 replicates, got {r}")));
    }
    Ok(())
}

pub(crate) fn cell(x: f64) -> String {
    num(x)
}
