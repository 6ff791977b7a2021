//! Small numerical kernels shared by the rest of the crate.

/// `ln(Σ exp(terms))`, shifting by the largest term so nothing overflows.
///
/// Terms equal to `-inf` contribute nothing; an all-`-inf` input yields `-inf`.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let mut acc = KahanSum::default();
    for &t in terms {
        acc.add((t - max).exp());
    }
    max + acc.total().ln()
}

/// Neumaier's variant of compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::default();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<KahanSum>().total()
}

/// Step used for central differences of a first derivative at `x`.
pub fn central_step(x: f64) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + x.abs())
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn log_sum_exp_handles_extremes() {
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY, 2.0]), 2.0);
        let big = log_sum_exp(&[1000.0, 1000.0]);
        assert!((big - (1000.0 + 2f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn kahan_recovers_small_terms() {
        let mut values = vec![1.0];
        values.extend(std::iter::repeat_n(1e-16, 10_000));
        let s = compensated_sum(values);
        assert!((s - (1.0 + 1e-12)).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn log_sum_exp_matches_naive(xs in proptest::collection::vec(-30.0f64..30.0, 1..20)) {
            let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
            prop_assert!((log_sum_exp(&xs) - naive).abs() < 1e-12);
        }
    }
}
