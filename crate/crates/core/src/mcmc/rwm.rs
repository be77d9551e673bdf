use super::{adapt_log_scale, burn_in_steps, ChainTrace};
use crate::distributions::{box_muller, SimRng};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RwmConfig {
    pub steps: usize,
    pub initial_scale: f64,
    pub target_accept: f64,
    /// Fraction of the steps used for burn-in; the scale adapts only there.
    pub burn_in_fraction: f64,
}

impl Default for RwmConfig {
    fn default() -> Self {
        RwmConfig { steps: 10_000, initial_scale: 1.0, target_accept: 0.25, burn_in_fraction: 0.2 }
    }
}

/// Gaussian random-walk Metropolis on `log_target`.
pub fn rwm_chain(
    log_target: impl Fn(&[f64]) -> f64,
    init: &[f64],
    cfg: &RwmConfig,
    rng: &mut SimRng,
) -> Result<ChainTrace> {
    if !(cfg.burn_in_fraction >= 0.0 && cfg.burn_in_fraction < 1.0) {
        return Err(Error::InvalidArgument("burn-in fraction must lie in [0, 1)".into()));
    }
    if !(cfg.initial_scale > 0.0 && cfg.initial_scale.is_finite()) {
        return Err(Error::InvalidArgument("proposal scale must be positive".into()));
    }
    let mut current = init.to_vec();
    let mut lp = log_target(&current);
    if !lp.is_finite() {
        return Err(Error::Numerical(format!("log density at the initial state is {lp}")));
    }
    let burn_in = burn_in_steps(cfg.steps, cfg.burn_in_fraction);
    let mut trace = ChainTrace::with_capacity(init.len(), cfg.steps, burn_in);
    let mut log_scale = cfg.initial_scale.ln();
    let mut proposal = vec![0.0; init.len()];
    let mut normals = Vec::with_capacity(init.len() + 1);
    for t in 0..cfg.steps {
        let scale = log_scale.exp();
        normals.clear();
        while normals.len() < init.len() {
            let (a, b) = box_muller(rng);
            normals.push(a);
            normals.push(b);
        }
        for (p, (c, z)) in proposal.iter_mut().zip(current.iter().zip(&normals)) {
            *p = c + scale * z;
        }
        let lp_new = log_target(&proposal);
        let log_ratio = if lp_new.is_nan() { f64::NEG_INFINITY } else { lp_new - lp };
        let accept_prob = log_ratio.min(0.0).exp();
        let accepted = rng.uniform_open().ln() < log_ratio;
        if accepted {
            current.copy_from_slice(&proposal);
            lp = lp_new;
        }
        trace.push(&current, accepted, scale, lp);
        if t < burn_in {
            log_scale = adapt_log_scale(log_scale, accept_prob, cfg.target_accept, t);
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_target_accepts_everything() {
        let cfg = RwmConfig { steps: 500, burn_in_fraction: 0.0, ..RwmConfig::default() };
        let t = rwm_chain(|_| 0.0, &[0.0], &cfg, &mut SimRng::from_seed_u64(1)).unwrap();
        assert_eq!(t.acceptance_rate(), 1.0);
        assert_eq!(t.len(), 500);
    }

    #[test]
    fn sharp_target_with_huge_scale_rejects() {
        let cfg = RwmConfig { steps: 2000, initial_scale: 1e6, burn_in_fraction: 0.0, ..RwmConfig::default() };
        let t = rwm_chain(|x| -1e4 * x[0] * x[0], &[0.0], &cfg, &mut SimRng::from_seed_u64(2)).unwrap();
        assert!(t.acceptance_rate() < 0.01);
    }

    #[test]
    fn standard_normal_moments() {
        let cfg = RwmConfig { steps: 100_000, ..RwmConfig::default() };
        let t = rwm_chain(|x| -0.5 * x[0] * x[0], &[0.0], &cfg, &mut SimRng::from_seed_u64(3)).unwrap();
        let xs = t.kept_coordinate(0);
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
        assert!(m.abs() < 0.05, "mean {m}");
        assert!((v - 1.0).abs() < 0.1, "variance {v}");
        let rate = t.kept_acceptance_rate();
        assert!((rate - 0.25).abs() < 0.05, "acceptance {rate}");
        // frozen after burn-in
        let h = &t.proposal_scale_history[t.burn_in..];
        assert!(h.iter().all(|&s| s == h[0]));
    }

    #[test]
    fn non_finite_init_rejected() {
        let r = rwm_chain(|_| f64::NEG_INFINITY, &[0.0], &RwmConfig::default(), &mut SimRng::from_seed_u64(0));
        assert!(r.is_err());
    }
}
