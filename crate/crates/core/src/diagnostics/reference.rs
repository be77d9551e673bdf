use super::ecdf::CdfEvaluator;
use crate::distributions::Dist1D;
use crate::error::{Error, Result};
use crate::mcmc::HierarchicalModel;
use crate::numeric::CompensatedSum;

/// Controls for the quadrature behind [`reference_theta_posterior`].
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    /// Initial number of Simpson intervals on the `log theta` axis.
    pub intervals: usize,
    pub max_intervals: usize,
    /// Relative change in the normalizer at which refinement stops.
    pub tol: f64,
    /// Log-density drop below the mode at which the range is truncated.
    pub log_drop: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { intervals: 1 << 10, max_intervals: 1 << 22, tol: 1e-10, log_drop: 60.0 }
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Prior(Dist1D),
    Grid {
        u: Vec<f64>,
        /// Normalized density in `u = log theta` at each node.
        dens: Vec<f64>,
        cum: Vec<f64>,
        simpson: Vec<f64>,
    },
}

/// The theta-marginal posterior of the hierarchical model by quadrature.
#[derive(Debug, Clone)]
pub struct ReferencePosterior {
    repr: Repr,
}

fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    (0..=n)
        .map(|i| {
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect()
}

/// Normalizes `p(theta) prod_k N(y_k; 0, theta + 1)` on a `log theta` grid.
///
/// With no observations the prior itself is returned. Otherwise the range is
/// cut where the log density falls `log_drop` below its mode, and Simpson's
/// rule is refined until the normalizer settles.
pub fn reference_theta_posterior(model: &HierarchicalModel, spec: GridSpec) -> Result<ReferencePosterior> {
    if model.k() == 0 {
        return Ok(ReferencePosterior { repr: Repr::Prior(model.prior()) });
    }
    let lq = |u: f64| model.log_theta_marginal(u.exp()) + u;
    // coarse scan for the mode, then walk outward to the truncation points
    let mut mode = (f64::NEG_INFINITY, 0.0);
    let mut u = -50.0;
    while u <= 50.0 {
        let v = lq(u);
        if v > mode.0 {
            mode = (v, u);
        }
        u += 0.01;
    }
    if !mode.0.is_finite() {
        return Err(Error::Numerical("posterior density has no finite mode".into()));
    }
    let (lmax, umode) = mode;
    let floor = lmax - spec.log_drop;
    let mut lo = umode;
    while lo > -80.0 && lq(lo) > floor {
        lo -= 0.05;
    }
    let mut hi = umode;
    while hi < 80.0 && lq(hi) > floor {
        hi += 0.05;
    }
    let mut n = spec.intervals.max(2) & !1;
    let integrate = |n: usize| -> (Vec<f64>, Vec<f64>, f64) {
        let h = (hi - lo) / n as f64;
        let u: Vec<f64> = (0..=n).map(|i| lo + i as f64 * h).collect();
        let d: Vec<f64> = u.iter().map(|&x| (lq(x) - lmax).exp()).collect();
        let w = simpson_weights(n, h);
        let z = crate::numeric::sum(d.iter().zip(&w).map(|(a, b)| a * b));
        (u, d, z)
    };
    let (_, _, mut z) = integrate(n);
    let (u, d) = loop {
        if n * 2 > spec.max_intervals {
            return Err(Error::Numerical(format!("reference quadrature did not converge at {n} intervals")));
        }
        n *= 2;
        let (u2, d2, z2) = integrate(n);
        let change = ((z2 - z) / z2).abs();
        z = z2;
        if change < spec.tol {
            break (u2, d2);
        }
    };
    let h = (hi - lo) / n as f64;
    let dens: Vec<f64> = d.iter().map(|x| x / z).collect();
    // trapezoid CDF, renormalized so the final value is exactly one
    let mut cum = Vec::with_capacity(dens.len());
    let mut acc = CompensatedSum::new();
    cum.push(0.0);
    for w in dens.windows(2) {
        acc.add(0.5 * (w[0] + w[1]) * h);
        cum.push(acc.value());
    }
    let total = *cum.last().unwrap();
    for c in cum.iter_mut() {
        *c /= total;
    }
    let simpson = simpson_weights(n, h);
    Ok(ReferencePosterior { repr: Repr::Grid { u, dens, cum, simpson } })
}

impl ReferencePosterior {
    /// `E[f(theta)]`; with no observations, by quadrature against the prior.
    pub fn expectation(&self, f: impl Fn(f64) -> f64) -> f64 {
        match &self.repr {
            Repr::Prior(d) => {
                // prior quantile transform with the midpoint rule
                let n = 1 << 16;
                crate::numeric::sum(
                    (0..n).map(|i| f(d.quantile((i as f64 + 0.5) / n as f64).expect("probability in range"))),
                ) / n as f64
            }
            Repr::Grid { u, dens, simpson, .. } => {
                crate::numeric::sum(u.iter().zip(dens).zip(simpson).map(|((&x, &p), &w)| w * p * f(x.exp())))
            }
        }
    }

    pub fn mean(&self) -> f64 {
        self.expectation(|t| t)
    }

    pub fn sd(&self) -> f64 {
        let m = self.mean();
        self.expectation(|t| (t - m).powi(2)).max(0.0).sqrt()
    }

    /// `(E[s], E[s^2])` for `s = theta / (1 + theta)`.
    pub fn shrinkage_moments(&self) -> (f64, f64) {
        let s = |t: f64| t / (1.0 + t);
        (self.expectation(s), self.expectation(|t| s(t).powi(2)))
    }

    /// Total probability mass of the grid, one up to rounding.
    pub fn total_mass(&self) -> f64 {
        match &self.repr {
            Repr::Prior(_) => 1.0,
            Repr::Grid { cum, .. } => *cum.last().unwrap(),
        }
    }
}

impl CdfEvaluator for ReferencePosterior {
    fn cdf(&self, theta: f64) -> f64 {
        match &self.repr {
            Repr::Prior(d) => d.cdf(theta).expect("inverse gamma has a CDF"),
            Repr::Grid { u, dens, cum, .. } => {
                if theta <= 0.0 {
                    return 0.0;
                }
                let x = theta.ln();
                if x <= u[0] {
                    return 0.0;
                }
                if x >= u[u.len() - 1] {
                    return 1.0;
                }
                let i = u.partition_point(|&a| a <= x) - 1;
                let h = u[i + 1] - u[i];
                let t = (x - u[i]) / h;
                // integrate the linear interpolant of the density over the partial cell
                let d_at = dens[i] + t * (dens[i + 1] - dens[i]);
                let scale = (cum[i + 1] - cum[i]) / (0.5 * (dens[i] + dens[i + 1]) * h).max(f64::MIN_POSITIVE);
                (cum[i] + 0.5 * (dens[i] + d_at) * (x - u[i]) * scale).min(cum[i + 1])
            }
        }
    }

    fn quantile(&self, p: f64) -> f64 {
        match &self.repr {
            Repr::Prior(d) => d.quantile(p.clamp(0.0, 1.0)).expect("probability in range"),
            Repr::Grid { u, cum, .. } => {
                if p <= 0.0 {
                    return u[0].exp();
                }
                if p >= 1.0 {
                    return u[u.len() - 1].exp();
                }
                let i = cum.partition_point(|&c| c < p).clamp(1, cum.len() - 1);
                let span = cum[i] - cum[i - 1];
                let t = if span > 0.0 { (p - cum[i - 1]) / span } else { 0.0 };
                (u[i - 1] + t * (u[i] - u[i - 1])).exp()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_observations_gives_prior() {
        let m = HierarchicalModel::new(vec![], 1.0, 1.0).unwrap();
        let r = reference_theta_posterior(&m, GridSpec::default()).unwrap();
        let prior = m.prior();
        for t in [0.01, 0.5, 1.0, 7.0] {
            assert_eq!(r.cdf(t), prior.cdf(t).unwrap());
        }
    }

    #[test]
    fn cdf_is_normalized_and_monotone() {
        let m = HierarchicalModel::new(vec![0.3, -1.2, 2.0, 0.1], 1.0, 1.0).unwrap();
        let r = reference_theta_posterior(&m, GridSpec::default()).unwrap();
        assert!((r.total_mass() - 1.0).abs() < 1e-8);
        assert!((r.cdf(1e300) - 1.0).abs() < 1e-8);
        let mut prev = 0.0;
        for i in 1..2000 {
            let c = r.cdf(i as f64 * 0.01);
            assert!(c >= prev);
            prev = c;
        }
        let q = r.quantile(0.4);
        assert!((r.cdf(q) - 0.4).abs() < 1e-6);
    }

    #[test]
    fn moments_are_in_range() {
        let m = HierarchicalModel::new(vec![1.0; 50], 1.0, 1.0).unwrap();
        let r = reference_theta_posterior(&m, GridSpec::default()).unwrap();
        assert!(r.mean() > 0.0 && r.sd() > 0.0);
        let (es, es2) = r.shrinkage_moments();
        assert!(es > 0.0 && es < 1.0 && es2 < es);
    }
}
