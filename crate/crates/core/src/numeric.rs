//! Small numerical kernels shared across the crate: compensated summation and
//! log-domain reductions.

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Compensated sum of an iterator.
pub fn sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// `log(sum(exp(x)))`, returning `-inf` for an empty or all `-inf` input.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let s = sum(xs.iter().map(|&x| (x - max).exp()));
    max + s.ln()
}

/// `log(mean(exp(x)))`.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NEG_INFINITY;
    }
    log_sum_exp(xs) - (xs.len() as f64).ln()
}

/// A real number stored as `sign * exp(log_abs)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    pub sign: f64,
    pub log_abs: f64,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog { sign: 0.0, log_abs: f64::NEG_INFINITY };

    pub fn from_value(x: f64) -> Self {
        if x == 0.0 {
            Self::ZERO
        } else {
            SignedLog { sign: x.signum(), log_abs: x.abs().ln() }
        }
    }

    pub fn value(&self) -> f64 {
        if self.sign == 0.0 {
            0.0
        } else {
            self.sign * self.log_abs.exp()
        }
    }

    pub fn mul(self, other: SignedLog) -> SignedLog {
        if self.sign == 0.0 || other.sign == 0.0 {
            return Self::ZERO;
        }
        SignedLog { sign: self.sign * other.sign, log_abs: self.log_abs + other.log_abs }
    }
}

/// Signed log-sum-exp: sums values given as `(sign, log_abs)` pairs.
pub fn signed_log_sum(terms: &[SignedLog]) -> SignedLog {
    let max = terms.iter().filter(|t| t.sign != 0.0).map(|t| t.log_abs).fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return SignedLog::ZERO;
    }
    let s = sum(terms.iter().filter(|t| t.sign != 0.0).map(|t| t.sign * (t.log_abs - max).exp()));
    if s == 0.0 {
        SignedLog::ZERO
    } else {
        SignedLog { sign: s.signum(), log_abs: max + s.abs().ln() }
    }
}

/// Iterates over all index tuples of a mixed-radix counter.
pub(crate) struct Odometer {
    dims: Vec<usize>,
    current: Vec<usize>,
    done: bool,
}

impl Odometer {
    pub(crate) fn new(dims: &[usize]) -> Self {
        Odometer { dims: dims.to_vec(), current: vec![0; dims.len()], done: dims.contains(&0) }
    }

    /// Returns the current tuple, then advances. `None` when exhausted.
    pub(crate) fn next_tuple(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        // advance lazily: the caller sees `current` before the increment
        Some(&self.current)
    }

    pub(crate) fn advance(&mut self) {
        for pos in (0..self.dims.len()).rev() {
            self.current[pos] += 1;
            if self.current[pos] < self.dims[pos] {
                return;
            }
            self.current[pos] = 0;
        }
        self.done = true;
    }
}

/// Visits every tuple in `[0, dims[0]) x ... x [0, dims[d-1])` in row-major order.
pub(crate) fn for_each_tuple(dims: &[usize], mut f: impl FnMut(&[usize])) {
    let mut odo = Odometer::new(dims);
    while let Some(t) = odo.next_tuple() {
        f(t);
        odo.advance();
    }
}

/// Product of `dims` as `u128`, saturating.
pub(crate) fn product_u128(dims: impl IntoIterator<Item = usize>) -> u128 {
    dims.into_iter().fold(1u128, |acc, d| acc.saturating_mul(d as u128))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut acc = CompensatedSum::new();
        acc.add(1e16);
        for _ in 0..1000 {
            acc.add(1.0);
        }
        acc.add(-1e16);
        assert_eq!(acc.value(), 1000.0);
    }

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert!((log_mean_exp(&[0.0, 0.0, 0.0]) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn signed_log_sum_cancels() {
        let a = SignedLog::from_value(3.0);
        let b = SignedLog::from_value(-5.0);
        let s = signed_log_sum(&[a, b]);
        assert!((s.value() + 2.0).abs() < 1e-12);
        assert_eq!(signed_log_sum(&[a, SignedLog::from_value(-3.0)]), SignedLog::ZERO);
    }

    #[test]
    fn odometer_visits_row_major() {
        let mut seen = Vec::new();
        for_each_tuple(&[2, 3], |t| seen.push((t[0], t[1])));
        assert_eq!(seen.len(), 6);
        assert_eq!(seen[0], (0, 0));
        assert_eq!(seen[1], (0, 1));
        assert_eq!(seen[5], (1, 2));
        let mut count = 0;
        for_each_tuple(&[], |_| count += 1);
        assert_eq!(count, 1);
    }
}
