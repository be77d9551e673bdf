use crate::distributions::Dist1D;
use crate::error::{Error, Result};
use crate::importance::WeightedParticles;
use crate::numeric::CompensatedSum;

/// A distribution on the real line that can be compared against an [`Ecdf`].
pub trait CdfEvaluator {
    fn cdf(&self, x: f64) -> f64;

    /// Generalized inverse, `inf { x : F(x) >= p }`.
    fn quantile(&self, p: f64) -> f64;

    /// `(atoms, cumulative weights)` when the distribution is discrete, which
    /// lets the distances be computed exactly.
    fn atoms(&self) -> Option<(&[f64], &[f64])> {
        None
    }
}

/// Weighted empirical CDF: sorted distinct atoms with cumulative weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    atoms: Vec<f64>,
    cum: Vec<f64>,
}

impl Ecdf {
    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        let w = vec![1.0; xs.len()];
        Self::from_weighted(xs, &w)
    }

    /// Weights need not be normalized; they are rescaled to sum to one.
    pub fn from_weighted(xs: &[f64], weights: &[f64]) -> Result<Self> {
        if xs.len() != weights.len() {
            return Err(Error::InvalidArgument("one weight per atom is required".into()));
        }
        if xs.is_empty() {
            return Err(Error::InvalidArgument("an ECDF needs at least one atom".into()));
        }
        if let Some(i) = xs.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { location: format!("ECDF atom {i}") });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidArgument("ECDF weights must be finite and nonnegative".into()));
        }
        let total: f64 = crate::numeric::sum(weights.iter().copied());
        if total <= 0.0 {
            return Err(Error::Degenerate("ECDF weights sum to zero".into()));
        }
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
        let mut atoms = Vec::with_capacity(xs.len());
        let mut cum = Vec::with_capacity(xs.len());
        let mut acc = CompensatedSum::new();
        for &i in &order {
            acc.add(weights[i] / total);
            if atoms.last() == Some(&xs[i]) {
                *cum.last_mut().unwrap() = acc.value();
            } else {
                atoms.push(xs[i]);
                cum.push(acc.value());
            }
        }
        // absorb rounding so the last step lands on one
        let last = cum.len() - 1;
        cum[last] = 1.0;
        for c in cum.iter_mut() {
            *c = c.min(1.0);
        }
        Ok(Ecdf { atoms, cum })
    }

    pub fn from_particles(p: &WeightedParticles) -> Result<Self> {
        if p.atoms().width() != 1 {
            return Err(Error::InvalidArgument("an ECDF needs scalar atoms".into()));
        }
        Self::from_weighted(&p.locations(), &p.normalized_weights())
    }

    /// Builds from explicit cumulative weights, which must end at one.
    pub fn from_cumulative(atoms: Vec<f64>, cum: Vec<f64>) -> Result<Self> {
        if atoms.len() != cum.len() || atoms.is_empty() {
            return Err(Error::InvalidArgument("atoms and cumulative weights must align".into()));
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) || cum.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("atoms must increase and weights must not decrease".into()));
        }
        if (cum[cum.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("cumulative weights end at {}, not 1", cum[cum.len() - 1])));
        }
        Ok(Ecdf { atoms, cum })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cum
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    fn mass(&self, i: usize) -> f64 {
        if i == 0 {
            self.cum[0]
        } else {
            self.cum[i] - self.cum[i - 1]
        }
    }

    pub fn mean(&self) -> f64 {
        crate::numeric::sum((0..self.len()).map(|i| self.mass(i) * self.atoms[i]))
    }

    pub fn sd(&self) -> f64 {
        let m = self.mean();
        crate::numeric::sum((0..self.len()).map(|i| self.mass(i) * (self.atoms[i] - m).powi(2))).max(0.0).sqrt()
    }

    /// `F(x-)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let i = self.atoms.partition_point(|&a| a < x);
        if i == 0 {
            0.0
        } else {
            self.cum[i - 1]
        }
    }

    /// `(x, F(x))` pairs, one per atom.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().copied().zip(self.cum.iter().copied())
    }
}

impl CdfEvaluator for Ecdf {
    fn cdf(&self, x: f64) -> f64 {
        let i = self.atoms.partition_point(|&a| a <= x);
        if i == 0 {
            0.0
        } else {
            self.cum[i - 1]
        }
    }

    fn quantile(&self, p: f64) -> f64 {
        let i = self.cum.partition_point(|&c| c < p);
        self.atoms[i.min(self.atoms.len() - 1)]
    }

    fn atoms(&self) -> Option<(&[f64], &[f64])> {
        Some((&self.atoms, &self.cum))
    }
}

/// A [`Dist1D`] whose CDF and quantile are both available.
#[derive(Debug, Clone)]
pub struct DistCdf(Dist1D);

impl DistCdf {
    pub fn new(d: Dist1D) -> Result<Self> {
        d.cdf(0.0)?;
        d.quantile(0.5)?;
        Ok(DistCdf(d))
    }
}

impl CdfEvaluator for DistCdf {
    fn cdf(&self, x: f64) -> f64 {
        self.0.cdf(x).expect("checked at construction")
    }

    fn quantile(&self, p: f64) -> f64 {
        self.0.quantile(p).expect("checked at construction")
    }
}

/// Settings for comparing an ECDF with a continuous reference.
#[derive(Debug, Clone, Copy)]
pub struct DistanceGrid {
    /// Initial number of reference quantiles.
    pub quantiles: usize,
    /// Stop refining once the integral changes by less than this.
    pub tol: f64,
    pub max_quantiles: usize,
}

impl Default for DistanceGrid {
    fn default() -> Self {
        DistanceGrid { quantiles: 4096, tol: 1e-6, max_quantiles: 1 << 20 }
    }
}

fn check_normalized(f: &Ecdf) -> Result<()> {
    let last = f.cum[f.cum.len() - 1];
    if (last - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument(format!("ECDF total mass is {last}")));
    }
    Ok(())
}

/// Merged sorted grid of the ECDF atoms, reference quantiles and deep tail
/// quantiles.
fn grid(f: &Ecdf, g: &dyn CdfEvaluator, n: usize) -> Vec<f64> {
    let mut xs: Vec<f64> = f.atoms.clone();
    for i in 1..n {
        xs.push(g.quantile(i as f64 / n as f64));
    }
    for m in 1..=50 {
        let e = 0.5f64.powi(m) / n as f64;
        xs.push(g.quantile(e));
        xs.push(g.quantile(1.0 - e));
    }
    xs.retain(|x| x.is_finite());
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// `int |c - G|` over `[a, b]` treating `G` as linear between its endpoint values.
fn abs_diff_linear(c: f64, ga: f64, gb: f64, width: f64) -> f64 {
    let (da, db) = (ga - c, gb - c);
    if da * db >= 0.0 {
        0.5 * (da.abs() + db.abs()) * width
    } else {
        // the difference changes sign inside the interval
        let t = da.abs() / (da.abs() + db.abs());
        0.5 * (da.abs() * t + db.abs() * (1.0 - t)) * width
    }
}

fn w1_on_grid(f: &Ecdf, g: &dyn CdfEvaluator, xs: &[f64]) -> f64 {
    let mut acc = CompensatedSum::new();
    let mut g_prev = g.cdf(xs[0]);
    for w in xs.windows(2) {
        let g_next = g.cdf(w[1]);
        acc.add(abs_diff_linear(f.cdf(w[0]), g_prev, g_next, w[1] - w[0]));
        g_prev = g_next;
    }
    acc.value()
}

/// Exact `int |F - G|` for two step functions.
fn w1_discrete(f: &Ecdf, ga: &[f64], gc: &[f64]) -> f64 {
    let mut xs: Vec<f64> = f.atoms.iter().chain(ga).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let step = |atoms: &[f64], cum: &[f64], x: f64| {
        let i = atoms.partition_point(|&a| a <= x);
        if i == 0 {
            0.0
        } else {
            cum[i - 1]
        }
    };
    let mut acc = CompensatedSum::new();
    for w in xs.windows(2) {
        acc.add((f.cdf(w[0]) - step(ga, gc, w[0])).abs() * (w[1] - w[0]));
    }
    acc.value()
}

/// Wasserstein-1 distance `int |F - G| dx`.
///
/// Against a discrete reference the integral is exact. Otherwise `G` is
/// evaluated on the ECDF atoms merged with a quantile grid of `G`, and the grid
/// is doubled until the integral stabilizes.
pub fn w1_distance(f: &Ecdf, g: &dyn CdfEvaluator) -> Result<f64> {
    w1_distance_with(f, g, DistanceGrid::default())
}

pub fn w1_distance_with(f: &Ecdf, g: &dyn CdfEvaluator, opts: DistanceGrid) -> Result<f64> {
    check_normalized(f)?;
    if let Some((ga, gc)) = g.atoms() {
        return Ok(w1_discrete(f, ga, gc));
    }
    let mut n = opts.quantiles.max(2);
    let mut prev = w1_on_grid(f, g, &grid(f, g, n));
    loop {
        n *= 2;
        let next = w1_on_grid(f, g, &grid(f, g, n));
        if (next - prev).abs() < opts.tol {
            return Ok(next);
        }
        if n >= opts.max_quantiles {
            return Err(Error::Numerical(format!(
                "W1 grid refinement did not settle: change {} at {n} quantiles",
                (next - prev).abs()
            )));
        }
        prev = next;
    }
}

/// Kolmogorov-Smirnov statistic `sup |F - G|`.
///
/// Between atoms `F` is flat and `G` monotone, so checking `G` against both
/// one-sided limits of `F` at each atom (and at `G`'s atoms when discrete) is exact.
pub fn ks_statistic(f: &Ecdf, g: &dyn CdfEvaluator) -> Result<f64> {
    check_normalized(f)?;
    let mut sup: f64 = 0.0;
    for (&x, &fx) in f.atoms.iter().zip(&f.cum) {
        let gx = g.cdf(x);
        sup = sup.max((fx - gx).abs());
        // left limits: G(x-) is approached from below by continuity or steps
        let g_left = match g.atoms() {
            Some((ga, gc)) => {
                let i = ga.partition_point(|&a| a < x);
                if i == 0 {
                    0.0
                } else {
                    gc[i - 1]
                }
            }
            None => gx,
        };
        sup = sup.max((f.cdf_left(x) - g_left).abs());
    }
    if let Some((ga, gc)) = g.atoms() {
        for (&x, &gx) in ga.iter().zip(gc) {
            sup = sup.max((f.cdf(x) - gx).abs());
        }
    }
    Ok(sup.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecdf_merges_ties_and_normalizes() {
        let e = Ecdf::from_weighted(&[2.0, 1.0, 2.0], &[1.0, 2.0, 1.0]).unwrap();
        assert_eq!(e.atoms(), &[1.0, 2.0]);
        assert!((e.cumulative()[0] - 0.5).abs() < 1e-15);
        assert_eq!(e.cumulative()[1], 1.0);
        assert_eq!(e.cdf(1.5), 0.5);
        assert_eq!(e.cdf_left(2.0), 0.5);
        assert_eq!(e.cdf(2.0), 1.0);
        assert_eq!(e.quantile(0.5), 1.0);
        assert_eq!(e.quantile(0.51), 2.0);
    }

    #[test]
    fn point_masses() {
        let a = Ecdf::from_samples(&[0.0]).unwrap();
        let b = Ecdf::from_samples(&[1.0]).unwrap();
        assert!((w1_distance(&a, &b).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(ks_statistic(&a, &b).unwrap(), 1.0);
        assert_eq!(w1_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(ks_statistic(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn w1_matches_quantile_coupling_for_equal_size_samples() {
        let x = [0.3, -1.0, 2.5, 0.7];
        let y = [1.0, 0.1, -0.4, 3.0];
        let (mut xs, mut ys) = (x.to_vec(), y.to_vec());
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        let expect: f64 = xs.iter().zip(&ys).map(|(a, b)| (a - b).abs()).sum::<f64>() / 4.0;
        let f = Ecdf::from_samples(&x).unwrap();
        let g = Ecdf::from_samples(&y).unwrap();
        assert!((w1_distance(&f, &g).unwrap() - expect).abs() < 1e-14);
        assert!((w1_distance(&g, &f).unwrap() - expect).abs() < 1e-14);
    }

    #[test]
    fn w1_to_continuous_uniform() {
        // a point mass at c against U(0, 1) has W1 = c^2/2 + (1-c)^2/2
        let g = DistCdf::new(Dist1D::uniform(1.0).unwrap()).unwrap();
        let f = Ecdf::from_samples(&[0.3]).unwrap();
        let w = w1_distance(&f, &g).unwrap();
        assert!((w - (0.09 / 2.0 + 0.49 / 2.0)).abs() < 1e-6, "{w}");
        let ks = ks_statistic(&f, &g).unwrap();
        assert!((ks - 0.7).abs() < 1e-12);
    }

    #[test]
    fn w1_point_mass_against_normal() {
        // E|Z| = sqrt(2/pi)
        let g = DistCdf::new(Dist1D::normal(0.0, 1.0).unwrap()).unwrap();
        let f = Ecdf::from_samples(&[0.0]).unwrap();
        let w = w1_distance(&f, &g).unwrap();
        assert!((w - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-5, "{w}");
    }

    #[test]
    fn unnormalized_cumulative_is_rejected() {
        assert!(Ecdf::from_cumulative(vec![0.0, 1.0], vec![0.5, 0.9]).is_err());
    }
}
