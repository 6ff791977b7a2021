//! Multinomial counts, kept as the non-identifiability counterexample.
//!
//! Using all `k` counts as the sufficient statistic gives a non-minimal
//! family: the counts always sum to `N`, so `T` is constant along
//! `(1,…,1)`. Dropping the last count restores minimality.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::expfam::FamilyModel;
use crate::numeric::log_sum_exp;

/// `Multi(k, N, p)` with fixed `N` and `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialFixture {
    trials: u64,
    probs: Vec<f64>,
}

pub fn multinomial_fixture(trials: u64, probs: &[f64]) -> Result<MultinomialFixture> {
    if trials == 0 {
        return Err(Error::Config("multinomial needs at least one trial".into()));
    }
    if probs.is_empty() || probs.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
        return Err(Error::Config(format!(
            "probabilities {probs:?} must be positive"
        )));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::Config(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(MultinomialFixture {
        trials,
        probs: probs.to_vec(),
    })
}

impl MultinomialFixture {
    pub fn categories(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Redundant model with `T(x) = x ∈ R^k`.
    pub fn full_model(&self) -> MultinomialFull {
        MultinomialFull {
            trials: self.trials,
            categories: self.probs.len(),
        }
    }

    /// Minimal model with `T(x) = (x_1, …, x_{k-1})`; needs `k ≥ 2`.
    pub fn reduced_model(&self) -> Result<MultinomialReduced> {
        if self.probs.len() < 2 {
            return Err(Error::Config("reduced multinomial needs k ≥ 2".into()));
        }
        Ok(MultinomialReduced {
            trials: self.trials,
            categories: self.probs.len(),
        })
    }

    /// `(ln p_1, …, ln p_k)`.
    pub fn full_eta(&self) -> Vec<f64> {
        self.probs.iter().map(|p| p.ln()).collect()
    }

    /// `(ln(p_j / p_k))_{j<k}`.
    pub fn reduced_eta(&self) -> Vec<f64> {
        let last = self.probs[self.probs.len() - 1];
        self.probs[..self.probs.len() - 1]
            .iter()
            .map(|p| (p / last).ln())
            .collect()
    }

    pub fn draw(&self, rng: &mut dyn RngCore) -> Vec<f64> {
        draw_counts(self.trials, &self.probs, rng)
    }

    pub fn draws(&self, n: usize, rng: &mut dyn RngCore) -> Vec<Vec<f64>> {
        (0..n).map(|_| self.draw(rng)).collect()
    }
}

fn draw_counts(trials: u64, probs: &[f64], rng: &mut dyn RngCore) -> Vec<f64> {
    let mut counts = vec![0.0; probs.len()];
    for _ in 0..trials {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = probs.len() - 1;
        for (j, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = j;
                break;
            }
        }
        counts[chosen] += 1.0;
    }
    counts
}

fn log_base(trials: u64, x: &[f64]) -> Result<f64> {
    let n = trials as f64;
    if x.iter().any(|v| !(*v >= 0.0 && v.fract() == 0.0)) || x.iter().sum::<f64>() != n {
        return Err(Error::Domain(format!(
            "{x:?} is not a vector of non-negative counts summing to {trials}"
        )));
    }
    Ok(ln_gamma(n + 1.0) - x.iter().map(|v| ln_gamma(v + 1.0)).sum::<f64>())
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let total = log_sum_exp(logits);
    logits.iter().map(|l| (l - total).exp()).collect()
}

fn multinomial_covariance(trials: u64, probs: &[f64]) -> DMatrix<f64> {
    let p = DVector::from_column_slice(probs);
    (DMatrix::from_diagonal(&p) - &p * p.transpose()) * trials as f64
}

/// Over-parameterized multinomial: `η ∈ R^k`, `H(η) = N ln Σ exp(η_j)`.
/// `H` vanishes on `η = ln p`; its Hessian is singular along `(1,…,1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialFull {
    trials: u64,
    categories: usize,
}

impl FamilyModel for MultinomialFull {
    fn name(&self) -> String {
        format!("multinomial-full(N={}, k={})", self.trials, self.categories)
    }

    fn dim_x(&self) -> usize {
        self.categories
    }

    fn dim_eta(&self) -> usize {
        self.categories
    }

    fn parameter_names(&self) -> Vec<String> {
        (1..=self.categories).map(|j| format!("p{j}")).collect()
    }

    fn log_base_measure(&self, x: &[f64]) -> Result<f64> {
        log_base(self.trials, x)
    }

    fn sufficient_stat(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn in_natural_domain(&self, eta: &[f64]) -> bool {
        eta.len() == self.categories && eta.iter().all(|e| e.is_finite())
    }

    fn log_normalizer(&self, eta: &[f64]) -> f64 {
        self.trials as f64 * log_sum_exp(eta)
    }

    fn nat_param(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.categories || theta.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Domain(format!("invalid probabilities {theta:?}")));
        }
        Ok(theta.iter().map(|p| p.ln()).collect())
    }

    fn nat_param_inverse(&self, eta: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(eta))
    }

    /// `ln p` is injective but every `η + c(1,…,1)` maps back to the same `p`.
    fn nat_param_bijective(&self) -> bool {
        false
    }

    fn mean_map_closed(&self, eta: &[f64]) -> Option<Vec<f64>> {
        Some(
            softmax(eta)
                .iter()
                .map(|p| p * self.trials as f64)
                .collect(),
        )
    }

    fn covariance_closed(&self, eta: &[f64]) -> Option<DMatrix<f64>> {
        Some(multinomial_covariance(self.trials, &softmax(eta)))
    }

    fn attainable(&self, target: &[f64]) -> bool {
        let n = self.trials as f64;
        target.iter().all(|t| *t > 0.0) && (target.iter().sum::<f64>() - n).abs() <= 1e-9 * n
    }

    fn attainable_range(&self) -> String {
        format!("positive expected counts summing to {}", self.trials)
    }

    fn default_eta(&self) -> Vec<f64> {
        vec![0.0; self.categories]
    }

    fn support_nonnegative(&self) -> bool {
        true
    }

    fn sample(&self, eta: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        Some(draw_counts(self.trials, &softmax(eta), rng))
    }
}

/// Minimal multinomial: `η_j = ln(p_j/p_k)`, `H(η) = N ln(1 + Σ exp(η_j))`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultinomialReduced {
    trials: u64,
    categories: usize,
}

impl MultinomialReduced {
    fn probs(&self, eta: &[f64]) -> Vec<f64> {
        let mut logits = eta.to_vec();
        logits.push(0.0);
        let mut p = softmax(&logits);
        p.pop();
        p
    }
}

impl FamilyModel for MultinomialReduced {
    fn name(&self) -> String {
        format!(
            "multinomial-reduced(N={}, k={})",
            self.trials, self.categories
        )
    }

    fn dim_x(&self) -> usize {
        self.categories
    }

    fn dim_eta(&self) -> usize {
        self.categories - 1
    }

    fn parameter_names(&self) -> Vec<String> {
        (1..self.categories).map(|j| format!("p{j}")).collect()
    }

    fn log_base_measure(&self, x: &[f64]) -> Result<f64> {
        log_base(self.trials, x)
    }

    fn sufficient_stat(&self, x: &[f64]) -> Vec<f64> {
        x[..self.categories - 1].to_vec()
    }

    fn in_natural_domain(&self, eta: &[f64]) -> bool {
        eta.len() == self.categories - 1 && eta.iter().all(|e| e.is_finite())
    }

    fn log_normalizer(&self, eta: &[f64]) -> f64 {
        let mut logits = eta.to_vec();
        logits.push(0.0);
        self.trials as f64 * log_sum_exp(&logits)
    }

    fn nat_param(&self, theta: &[f64]) -> Result<Vec<f64>> {
        let rest = 1.0 - theta.iter().sum::<f64>();
        if theta.len() != self.categories - 1 || theta.iter().any(|p| !(*p > 0.0)) || !(rest > 0.0)
        {
            return Err(Error::Domain(format!("invalid probabilities {theta:?}")));
        }
        Ok(theta.iter().map(|p| (p / rest).ln()).collect())
    }

    fn nat_param_inverse(&self, eta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.probs(eta))
    }

    fn mean_map_closed(&self, eta: &[f64]) -> Option<Vec<f64>> {
        Some(
            self.probs(eta)
                .iter()
                .map(|p| p * self.trials as f64)
                .collect(),
        )
    }

    fn inverse_mean_map_closed(&self, target: &[f64]) -> Option<Vec<f64>> {
        let rest = self.trials as f64 - target.iter().sum::<f64>();
        Some(target.iter().map(|t| (t / rest).ln()).collect())
    }

    fn covariance_closed(&self, eta: &[f64]) -> Option<DMatrix<f64>> {
        Some(multinomial_covariance(self.trials, &self.probs(eta)))
    }

    fn attainable(&self, target: &[f64]) -> bool {
        target.iter().all(|t| *t > 0.0) && target.iter().sum::<f64>() < self.trials as f64
    }

    fn attainable_range(&self) -> String {
        format!("positive expected counts with sum < {}", self.trials)
    }

    fn default_eta(&self) -> Vec<f64> {
        vec![0.0; self.categories - 1]
    }

    fn support_nonnegative(&self) -> bool {
        true
    }

    fn sample(&self, eta: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let mut p = self.probs(eta);
        p.push(1.0 - p.iter().sum::<f64>());
        Some(draw_counts(self.trials, &p, rng))
    }
}
