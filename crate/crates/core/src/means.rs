//! Generalized f-mean and the weighted Hölder and Lehmer mean families.
//!
//! Every power sum is evaluated in the log domain: terms are carried as
//! `ln w + α ln x` and combined with a shifted log-sum-exp, so orders of
//! several hundred do not overflow on data spanning many decades.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::{compensated_sum, log_sum_exp};

/// Order of a mean family, including the two limiting orders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeanOrder {
    NegInfinity,
    Finite(f64),
    PosInfinity,
}

impl MeanOrder {
    /// Maps infinite `alpha` onto the sentinel variants; NaN is rejected.
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_nan() {
            Err(Error::Domain("mean order is NaN".into()))
        } else if alpha == f64::INFINITY {
            Ok(MeanOrder::PosInfinity)
        } else if alpha == f64::NEG_INFINITY {
            Ok(MeanOrder::NegInfinity)
        } else {
            Ok(MeanOrder::Finite(alpha))
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            MeanOrder::NegInfinity => f64::NEG_INFINITY,
            MeanOrder::Finite(a) => a,
            MeanOrder::PosInfinity => f64::INFINITY,
        }
    }
}

impl From<f64> for MeanOrder {
    fn from(alpha: f64) -> Self {
        MeanOrder::new(alpha).expect("mean order must not be NaN")
    }
}

impl FromStr for MeanOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(MeanOrder::PosInfinity),
            "-inf" | "-infinity" => Ok(MeanOrder::NegInfinity),
            other => other
                .parse::<f64>()
                .map_err(|_| Error::Domain(format!("invalid mean order `{s}`")))
                .and_then(MeanOrder::new),
        }
    }
}

impl fmt::Display for MeanOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeanOrder::NegInfinity => write!(f, "-inf"),
            MeanOrder::Finite(a) => write!(f, "{a}"),
            MeanOrder::PosInfinity => write!(f, "inf"),
        }
    }
}

/// One column of observations with their w-weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl Sample {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("sample is empty".into()));
        }
        if values.len() != weights.len() {
            return Err(Error::Domain(format!(
                "{} values but {} weights",
                values.len(),
                weights.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!(
                "value {v} is not a finite non-negative number"
            )));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Domain(format!(
                "weight {w} is not a finite positive number"
            )));
        }
        Ok(Sample { values, weights })
    }

    /// Sample with every weight equal to one.
    pub fn unweighted(values: Vec<f64>) -> Result<Self> {
        let weights = vec![1.0; values.len()];
        Sample::new(values, weights)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn require_positive(&self, what: &str) -> Result<()> {
        match self.values.iter().position(|&v| v == 0.0) {
            Some(i) => Err(Error::Domain(format!(
                "value at index {i} is 0, which is a pole of {what}"
            ))),
            None => Ok(()),
        }
    }

    /// `ln(w_i / Σw)` for every observation.
    fn log_normalized_weights(&self) -> Vec<f64> {
        let log_w: Vec<f64> = self.weights.iter().map(|w| w.ln()).collect();
        let log_total = log_sum_exp(&log_w);
        log_w.iter().map(|lw| lw - log_total).collect()
    }

    fn log_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.ln()).collect()
    }
}

/// Which mean family a v-weight decomposition refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanKind {
    Holder,
    Lehmer,
}

impl FromStr for MeanKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "holder" | "hölder" | "power" => Ok(MeanKind::Holder),
            "lehmer" => Ok(MeanKind::Lehmer),
            _ => Err(Error::Domain(format!("unknown mean kind `{s}`"))),
        }
    }
}

/// Generalized (Kolmogorov) f-mean `f⁻¹((1/n) Σ f(x_i))`.
///
/// `f` must be continuous and increasing on the data range with `f_inverse`
/// its inverse there. The result is clamped to `[min x, max x]`, which only
/// removes rounding noise for a valid `f`.
pub fn f_mean<F, G>(f: F, f_inverse: G, values: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    if values.is_empty() {
        return Err(Error::Domain("sample is empty".into()));
    }
    let mut mapped = Vec::with_capacity(values.len());
    for &x in values {
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::Numeric(format!("f({x}) = {fx} is not finite")));
        }
        mapped.push(fx);
    }
    let avg = compensated_sum(mapped) / values.len() as f64;
    let mu = f_inverse(avg);
    if !mu.is_finite() {
        return Err(Error::Numeric(format!("f^-1({avg}) = {mu} is not finite")));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(mu.clamp(lo, hi))
}

/// Weighted Hölder (power) mean `(Σ w x^α / Σ w)^(1/α)`.
///
/// Order 0 is the weighted geometric mean and the infinite orders return the
/// sample extremes. Zero values are rejected whenever `α ≤ 0`.
pub fn holder_mean(order: MeanOrder, sample: &Sample) -> Result<f64> {
    match order {
        MeanOrder::PosInfinity => Ok(sample.max()),
        MeanOrder::NegInfinity => {
            sample.require_positive("a Hölder mean of order -inf")?;
            Ok(sample.min())
        }
        MeanOrder::Finite(alpha) => {
            if alpha <= 0.0 {
                sample.require_positive(&format!("a Hölder mean of order {alpha}"))?;
            }
            let log_v = sample.log_normalized_weights();
            let log_x = sample.log_values();
            let value = if alpha == 0.0 {
                compensated_sum(log_v.iter().zip(&log_x).map(|(lv, lx)| lv.exp() * lx)).exp()
            } else {
                (log_power_mean(alpha, &log_v, &log_x) / alpha).exp()
            };
            finite_or_err(clamp_to(value, sample), "Hölder mean")
        }
    }
}

/// Weighted Lehmer mean `Σ w x^α / Σ w x^(α-1)`.
///
/// Zero values are rejected whenever `α ≤ 1`.
pub fn lehmer_mean(order: MeanOrder, sample: &Sample) -> Result<f64> {
    match order {
        MeanOrder::PosInfinity => Ok(sample.max()),
        MeanOrder::NegInfinity => {
            sample.require_positive("a Lehmer mean of order -inf")?;
            Ok(sample.min())
        }
        MeanOrder::Finite(alpha) => {
            if alpha <= 1.0 {
                sample.require_positive(&format!("a Lehmer mean of order {alpha}"))?;
            } else if sample.max() == 0.0 {
                return Ok(0.0);
            }
            let log_v = sample.log_normalized_weights();
            let log_x = sample.log_values();
            let num = weighted_log_terms(alpha, &log_v, &log_x);
            let den = weighted_log_terms(alpha - 1.0, &log_v, &log_x);
            let value = (log_sum_exp(&num) - log_sum_exp(&den)).exp();
            finite_or_err(clamp_to(value, sample), "Lehmer mean")
        }
    }
}

/// Per-observation v-weights of a mean family.
///
/// Lehmer: `w x^(α-1) / Σ w x^(α-1)`, summing to one. Hölder:
/// `w x^(α-1) / Σ w`, left unnormalized; see [`holder_v_weight_total`].
/// At `α = ±∞` the Lehmer weights collapse onto the extreme values; the
/// Hölder weights have no finite limit there and are rejected.
pub fn v_weights(kind: MeanKind, order: MeanOrder, sample: &Sample) -> Result<Vec<f64>> {
    let alpha = match order {
        MeanOrder::Finite(a) => a,
        infinite => {
            if kind == MeanKind::Holder {
                return Err(Error::Domain(
                    "Hölder v-weights diverge at an infinite order".into(),
                ));
            }
            if infinite == MeanOrder::NegInfinity {
                sample.require_positive("Lehmer v-weights of order -inf")?;
            }
            let target = if infinite == MeanOrder::PosInfinity {
                sample.max()
            } else {
                sample.min()
            };
            return Ok(extreme_weights(sample, target));
        }
    };
    if alpha < 1.0 || (kind == MeanKind::Lehmer && alpha == 1.0) {
        sample.require_positive(&format!("the v-weight x^({alpha}-1)"))?;
    }
    let log_v = sample.log_normalized_weights();
    let log_x = sample.log_values();
    let terms = weighted_log_terms(alpha - 1.0, &log_v, &log_x);
    let weights: Vec<f64> = match kind {
        MeanKind::Lehmer => {
            if terms.iter().all(|t| *t == f64::NEG_INFINITY) {
                // every value is zero: the ratio is 0/0, fall back to w / Σw
                return Ok(log_v.iter().map(|lv| lv.exp()).collect());
            }
            let total = log_sum_exp(&terms);
            terms.iter().map(|t| (t - total).exp()).collect()
        }
        MeanKind::Holder => terms.iter().map(|t| t.exp()).collect(),
    };
    if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::Numeric(format!("v-weight {w} overflowed")));
    }
    Ok(weights)
}

/// Sum of the Hölder v-weights, `(H_{α-1})^(α-1)` for `α ≠ 1`.
pub fn holder_v_weight_total(order: MeanOrder, sample: &Sample) -> Result<f64> {
    Ok(compensated_sum(v_weights(MeanKind::Holder, order, sample)?))
}

/// `ln(w_i/Σw) + p ln x_i`, with `0^0` taken as 1.
fn weighted_log_terms(power: f64, log_v: &[f64], log_x: &[f64]) -> Vec<f64> {
    log_v
        .iter()
        .zip(log_x)
        .map(|(lv, lx)| if power == 0.0 { *lv } else { lv + power * lx })
        .collect()
}

/// `ln Σ v_i x_i^α` for normalized weights `v`.
///
/// When every `|α ln x_i|` is small the sum is formed as `ln(1 + Σ v (x^α - 1))`
/// through `expm1`/`ln_1p`; dividing the result by a tiny `α` would otherwise
/// amplify the rounding of the plain log-sum-exp.
fn log_power_mean(alpha: f64, log_v: &[f64], log_x: &[f64]) -> f64 {
    let spread = log_x
        .iter()
        .fold(0.0_f64, |m, lx| m.max((alpha * lx).abs()));
    if spread <= 0.5 {
        compensated_sum(
            log_v
                .iter()
                .zip(log_x)
                .map(|(lv, lx)| lv.exp() * (alpha * lx).exp_m1()),
        )
        .ln_1p()
    } else {
        log_sum_exp(&weighted_log_terms(alpha, log_v, log_x))
    }
}

fn extreme_weights(sample: &Sample, target: f64) -> Vec<f64> {
    let hits: f64 = sample
        .values
        .iter()
        .zip(&sample.weights)
        .filter(|(v, _)| **v == target)
        .map(|(_, w)| *w)
        .sum();
    sample
        .values
        .iter()
        .zip(&sample.weights)
        .map(|(v, w)| if *v == target { w / hits } else { 0.0 })
        .collect()
}

fn clamp_to(value: f64, sample: &Sample) -> f64 {
    if value.is_nan() {
        value
    } else {
        value.clamp(sample.min(), sample.max())
    }
}

fn finite_or_err(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numeric(format!("{what} evaluated to {value}")))
    }
}
