//! Univariate distributions used by the experiments, plus seeded streams.

mod rng;

pub use rng::SimRng;

use crate::error::{Error, Result};
use rand_distr::Distribution;
use statrs::distribution::{ContinuousCDF, Gamma as StatrsGamma};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_ur, ln_gamma};
use std::f64::consts::PI;

/// A univariate distribution.
///
/// `InverseGamma { shape, scale }` has density proportional to
/// `x^(-shape-1) exp(-scale / x)`, so `Inv-Gamma(a/2, a*b/2)` reads
/// `InverseGamma { shape: a / 2, scale: a * b / 2 }`.
#[derive(Debug, Clone, PartialEq)]
pub enum Dist1D {
    Normal { mean: f64, var: f64 },
    StudentT { dof: f64, loc: f64, scale: f64 },
    Uniform { upper: f64 },
    InverseGamma { shape: f64, scale: f64 },
    PointMass(f64),
    FiniteDiscrete { points: Vec<f64>, probs: Vec<f64> },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameters(format!("{name} must be finite, got {v}")))
    }
}

impl Dist1D {
    pub fn normal(mean: f64, var: f64) -> Result<Self> {
        finite("mean", mean)?;
        positive("variance", var)?;
        Ok(Dist1D::Normal { mean, var })
    }

    pub fn student_t(dof: f64, loc: f64, scale: f64) -> Result<Self> {
        positive("degrees of freedom", dof)?;
        finite("location", loc)?;
        positive("scale", scale)?;
        Ok(Dist1D::StudentT { dof, loc, scale })
    }

    /// Uniform on `[0, upper]`.
    pub fn uniform(upper: f64) -> Result<Self> {
        positive("interval length", upper)?;
        Ok(Dist1D::Uniform { upper })
    }

    pub fn inverse_gamma(shape: f64, scale: f64) -> Result<Self> {
        positive("shape", shape)?;
        positive("scale", scale)?;
        Ok(Dist1D::InverseGamma { shape, scale })
    }

    pub fn point_mass(c: f64) -> Result<Self> {
        finite("location", c)?;
        Ok(Dist1D::PointMass(c))
    }

    pub fn finite_discrete(points: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != probs.len() {
            return Err(Error::InvalidParameters(
                "finite discrete distribution needs matching, nonempty points and probabilities".into(),
            ));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameters("probabilities must be nonnegative".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameters(format!("probabilities sum to {total}, expected 1")));
        }
        Ok(Dist1D::FiniteDiscrete { points, probs })
    }

    pub fn sample(&self, rng: &mut SimRng) -> f64 {
        match self {
            Dist1D::Normal { mean, var } => mean + var.sqrt() * standard_normal(rng),
            Dist1D::StudentT { dof, loc, scale } => {
                let t = rand_distr::StudentT::new(*dof).expect("validated dof");
                loc + scale * t.sample(rng)
            }
            Dist1D::Uniform { upper } => upper * rng.uniform_open(),
            Dist1D::InverseGamma { shape, scale } => {
                let g = rand_distr::Gamma::new(*shape, 1.0).expect("validated shape");
                scale / g.sample(rng)
            }
            Dist1D::PointMass(c) => *c,
            Dist1D::FiniteDiscrete { points, probs } => {
                let u = rng.uniform_open();
                let mut acc = 0.0;
                for (x, p) in points.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *x;
                    }
                }
                *points.last().expect("nonempty support")
            }
        }
    }

    pub fn sample_n(&self, rng: &mut SimRng, n: usize) -> Vec<f64> {
        match self {
            Dist1D::Normal { mean, var } => {
                let sd = var.sqrt();
                let mut out = Vec::with_capacity(n);
                while out.len() < n {
                    let (a, b) = box_muller(rng);
                    out.push(mean + sd * a);
                    if out.len() < n {
                        out.push(mean + sd * b);
                    }
                }
                out
            }
            _ => (0..n).map(|_| self.sample(rng)).collect(),
        }
    }

    pub fn logpdf(&self, x: f64) -> f64 {
        match self {
            Dist1D::Normal { mean, var } => normal_logpdf(x, *mean, *var),
            Dist1D::StudentT { dof, loc, scale } => {
                let z = (x - loc) / scale;
                ln_gamma((dof + 1.0) / 2.0)
                    - ln_gamma(dof / 2.0)
                    - 0.5 * (dof * PI).ln()
                    - scale.ln()
                    - (dof + 1.0) / 2.0 * (z * z / dof).ln_1p()
            }
            Dist1D::Uniform { upper } => {
                if (0.0..=*upper).contains(&x) {
                    -upper.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Dist1D::InverseGamma { shape, scale } => inverse_gamma_logpdf(x, *shape, *scale),
            Dist1D::PointMass(c) => {
                if x == *c {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Dist1D::FiniteDiscrete { points, probs } => {
                let p: f64 = points.iter().zip(probs).filter(|(pt, _)| **pt == x).map(|(_, p)| *p).sum();
                p.ln()
            }
        }
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        Ok(match self {
            Dist1D::Normal { mean, var } => standard_normal_cdf((x - mean) / var.sqrt()),
            Dist1D::Uniform { upper } => (x / upper).clamp(0.0, 1.0),
            Dist1D::InverseGamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_ur(*shape, scale / x)
                }
            }
            Dist1D::PointMass(c) => {
                if x >= *c {
                    1.0
                } else {
                    0.0
                }
            }
            Dist1D::FiniteDiscrete { points, probs } => {
                points.iter().zip(probs).filter(|(pt, _)| **pt <= x).map(|(_, p)| *p).sum::<f64>().min(1.0)
            }
            Dist1D::StudentT { .. } => return Err(Error::Unsupported("cdf of the Student-t family".into())),
        })
    }

    /// Quantile function for the families that need one.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
        }
        match self {
            Dist1D::Uniform { upper } => Ok(upper * p),
            Dist1D::PointMass(c) => Ok(*c),
            Dist1D::Normal { mean, var } => {
                let n = statrs::distribution::Normal::new(*mean, var.sqrt())
                    .map_err(|e| Error::InvalidParameters(e.to_string()))?;
                Ok(n.inverse_cdf(p))
            }
            Dist1D::InverseGamma { shape, scale } => {
                // X = scale / G with G ~ Gamma(shape, 1)
                let g = StatrsGamma::new(*shape, 1.0).map_err(|e| Error::InvalidParameters(e.to_string()))?;
                Ok(scale / g.inverse_cdf(1.0 - p))
            }
            Dist1D::FiniteDiscrete { points, probs } => {
                let mut order: Vec<usize> = (0..points.len()).collect();
                order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
                let mut acc = 0.0;
                for &i in &order {
                    acc += probs[i];
                    if acc >= p {
                        return Ok(points[i]);
                    }
                }
                Ok(points[*order.last().expect("nonempty")])
            }
            Dist1D::StudentT { .. } => Err(Error::Unsupported("quantile of the Student-t family".into())),
        }
    }

    /// Mean, when finite.
    pub fn mean(&self) -> Option<f64> {
        match self {
            Dist1D::Normal { mean, .. } => Some(*mean),
            Dist1D::StudentT { dof, loc, .. } => (*dof > 1.0).then_some(*loc),
            Dist1D::Uniform { upper } => Some(upper / 2.0),
            Dist1D::InverseGamma { shape, scale } => (*shape > 1.0).then(|| scale / (shape - 1.0)),
            Dist1D::PointMass(c) => Some(*c),
            Dist1D::FiniteDiscrete { points, probs } => Some(points.iter().zip(probs).map(|(x, p)| x * p).sum()),
        }
    }

    /// Variance, when finite.
    pub fn variance(&self) -> Option<f64> {
        match self {
            Dist1D::Normal { var, .. } => Some(*var),
            Dist1D::StudentT { dof, scale, .. } => (*dof > 2.0).then(|| scale * scale * dof / (dof - 2.0)),
            Dist1D::Uniform { upper } => Some(upper * upper / 12.0),
            Dist1D::InverseGamma { shape, scale } => {
                (*shape > 2.0).then(|| scale * scale / ((shape - 1.0).powi(2) * (shape - 2.0)))
            }
            Dist1D::PointMass(_) => Some(0.0),
            Dist1D::FiniteDiscrete { points, probs } => {
                let m: f64 = points.iter().zip(probs).map(|(x, p)| x * p).sum();
                Some(points.iter().zip(probs).map(|(x, p)| p * (x - m).powi(2)).sum())
            }
        }
    }
}

/// One Box-Muller pair of independent standard normals.
pub fn box_muller(rng: &mut SimRng) -> (f64, f64) {
    let u1 = rng.uniform_open();
    let u2 = rng.uniform_open();
    let r = (-2.0 * u1.ln()).sqrt();
    let angle = 2.0 * PI * u2;
    (r * angle.cos(), r * angle.sin())
}

/// A single standard normal draw (the second Box-Muller variate is discarded).
pub fn standard_normal(rng: &mut SimRng) -> f64 {
    box_muller(rng).0
}

pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (2.0 * PI * var).ln() - d * d / (2.0 * var)
}

pub fn inverse_gamma_logpdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Standard normal CDF.
pub fn standard_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}
