//! Random-walk Metropolis, the conjugate Gibbs sampler of the hierarchical
//! Gaussian model, and grouped independence Metropolis-Hastings with
//! standard or product-form density estimates.

mod gimh;
mod hierarchical;
mod rwm;

pub use gimh::{
    density_estimate, gimh_chain, DensityMode, DiscreteUniformProposal, GaussianRandomWalk, GimhConfig, LatentKernel,
    LogRandomWalk, ThetaProposal,
};
pub use hierarchical::{gibbs_hierarchical, HierarchicalModel};
pub use rwm::{rwm_chain, RwmConfig};

/// States visited by a chain, one per step.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainTrace {
    width: usize,
    states: Vec<f64>,
    pub accepted: Vec<bool>,
    pub acceptance_count: usize,
    /// Proposal scale in force at each step.
    pub proposal_scale_history: Vec<f64>,
    /// Log target density (or its estimate) at the state after each step.
    pub log_density: Vec<f64>,
    pub burn_in: usize,
}

impl ChainTrace {
    pub(crate) fn with_capacity(width: usize, steps: usize, burn_in: usize) -> Self {
        ChainTrace {
            width,
            states: Vec::with_capacity(width * steps),
            accepted: Vec::with_capacity(steps),
            acceptance_count: 0,
            proposal_scale_history: Vec::with_capacity(steps),
            log_density: Vec::with_capacity(steps),
            burn_in,
        }
    }

    pub(crate) fn push(&mut self, state: &[f64], accepted: bool, scale: f64, log_density: f64) {
        self.states.extend_from_slice(state);
        self.accepted.push(accepted);
        self.acceptance_count += accepted as usize;
        self.proposal_scale_history.push(scale);
        self.log_density.push(log_density);
    }

    pub fn len(&self) -> usize {
        self.accepted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.accepted.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.states[i * self.width..(i + 1) * self.width]
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.acceptance_count as f64 / self.len() as f64
        }
    }

    /// Acceptance rate after burn-in.
    pub fn kept_acceptance_rate(&self) -> f64 {
        let kept = &self.accepted[self.burn_in.min(self.len())..];
        if kept.is_empty() {
            0.0
        } else {
            kept.iter().filter(|&&a| a).count() as f64 / kept.len() as f64
        }
    }

    /// Coordinate `c` over the whole chain.
    pub fn coordinate(&self, c: usize) -> Vec<f64> {
        self.states.chunks_exact(self.width).map(|s| s[c]).collect()
    }

    /// Coordinate `c` after burn-in.
    pub fn kept_coordinate(&self, c: usize) -> Vec<f64> {
        self.states.chunks_exact(self.width).skip(self.burn_in).map(|s| s[c]).collect()
    }
}

/// Robbins-Monro update of a log proposal scale toward a target acceptance
/// probability, with step size `(t + 1)^-0.6`.
pub(crate) fn adapt_log_scale(log_scale: f64, accept_prob: f64, target: f64, t: usize) -> f64 {
    let gamma = (t as f64 + 1.0).powf(-0.6);
    (log_scale + gamma * (accept_prob - target)).clamp(-30.0, 30.0)
}

pub(crate) fn burn_in_steps(steps: usize, fraction: f64) -> usize {
    (steps as f64 * fraction).floor() as usize
}
