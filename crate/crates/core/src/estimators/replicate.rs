use crate::distributions::SimRng;
use crate::error::{Error, Result};
use crate::numeric::sum;
use rayon::prelude::*;

/// Summary of `R` independent replicates of an estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateSummary {
    pub mean: f64,
    /// Unbiased sample variance across replicates.
    pub variance: f64,
    /// Standard error of `mean`.
    pub standard_error: f64,
    pub values: Vec<f64>,
}

/// Runs `runner` for replicates `0..r`. Replicate `i` receives the stream
/// `SimRng::from_seed_u64(seed).split(i)`, so results do not depend on
/// scheduling.
pub fn replicate_values<F>(r: usize, seed: u64, runner: F) -> Result<Vec<f64>>
where
    F: Fn(usize, &mut SimRng) -> Result<f64> + Sync,
{
    let master = SimRng::from_seed_u64(seed);
    (0..r)
        .into_par_iter()
        .map(|i| {
            let mut rng = master.split(i as u64);
            runner(i, &mut rng).map_err(|e| Error::Replicate { index: i, source: Box::new(e) })
        })
        .collect()
}

pub fn replicate_variance<F>(r: usize, seed: u64, runner: F) -> Result<ReplicateSummary>
where
    F: Fn(usize, &mut SimRng) -> Result<f64> + Sync,
{
    if r < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 replicates, got {r}")));
    }
    let values = replicate_values(r, seed, runner)?;
    let rf = r as f64;
    let mean = sum(values.iter().copied()) / rf;
    let variance = sum(values.iter().map(|v| (v - mean) * (v - mean))) / (rf - 1.0);
    Ok(ReplicateSummary { mean, variance, standard_error: (variance / rf).sqrt(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn constant_runner() {
        let s = replicate_variance(10, 1, |_, _| Ok(3.0)).unwrap();
        assert_eq!(s.mean, 3.0);
        assert_eq!(s.variance, 0.0);
    }

    #[test]
    fn reproducible_and_ordered() {
        let run = |_: usize, r: &mut SimRng| Ok(r.next_u64() as f64);
        let a = replicate_values(50, 9, run).unwrap();
        let b = replicate_values(50, 9, run).unwrap();
        assert_eq!(a, b);
        let mut direct = SimRng::from_seed_u64(9).split(17);
        assert_eq!(a[17], direct.next_u64() as f64);
    }

    #[test]
    fn failure_carries_index() {
        let r = replicate_variance(5, 0, |i, _| if i == 3 { Err(Error::Numerical("boom".into())) } else { Ok(1.0) });
        assert!(matches!(r, Err(Error::Replicate { index: 3, .. })));
        assert!(replicate_variance(1, 0, |_, _| Ok(1.0)).is_err());
    }
}
