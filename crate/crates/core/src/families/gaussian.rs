//! Independent Gaussian components with known standard deviations.
//!
//! `T(x) = x`, `η = μ/σ²`, `H(η) = σ²η²/2` per component. Everything has a
//! closed form, which makes this family a convenient oracle for the generic
//! solver; unlike Weibull its support includes negative values.

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::expfam::FamilyModel;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKnownVariance {
    sigmas: Vec<f64>,
}

pub fn gaussian_known_variance_model(sigmas: &[f64]) -> Result<GaussianKnownVariance> {
    if sigmas.is_empty() {
        return Err(Error::Config(
            "Gaussian model needs at least one component".into(),
        ));
    }
    if let Some(s) = sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
        return Err(Error::Config(format!(
            "standard deviation {s} is not positive"
        )));
    }
    Ok(GaussianKnownVariance {
        sigmas: sigmas.to_vec(),
    })
}

impl GaussianKnownVariance {
    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    fn variances(&self) -> impl Iterator<Item = f64> + '_ {
        self.sigmas.iter().map(|s| s * s)
    }
}

impl FamilyModel for GaussianKnownVariance {
    fn name(&self) -> String {
        format!("gaussian(sigma={:?})", self.sigmas)
    }

    fn dim_x(&self) -> usize {
        self.sigmas.len()
    }

    fn dim_eta(&self) -> usize {
        self.sigmas.len()
    }

    fn parameter_names(&self) -> Vec<String> {
        (1..=self.sigmas.len()).map(|j| format!("mu{j}")).collect()
    }

    fn log_base_measure(&self, x: &[f64]) -> Result<f64> {
        Ok(x.iter()
            .zip(self.variances())
            .map(|(xj, v)| -xj * xj / (2.0 * v) - 0.5 * (2.0 * std::f64::consts::PI * v).ln())
            .sum())
    }

    fn sufficient_stat(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn in_natural_domain(&self, eta: &[f64]) -> bool {
        eta.len() == self.sigmas.len() && eta.iter().all(|e| e.is_finite())
    }

    fn log_normalizer(&self, eta: &[f64]) -> f64 {
        eta.iter()
            .zip(self.variances())
            .map(|(e, v)| 0.5 * v * e * e)
            .sum()
    }

    fn nat_param(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.sigmas.len() || theta.iter().any(|m| !m.is_finite()) {
            return Err(Error::Domain(format!("invalid mean vector {theta:?}")));
        }
        Ok(theta
            .iter()
            .zip(self.variances())
            .map(|(m, v)| m / v)
            .collect())
    }

    fn nat_param_inverse(&self, eta: &[f64]) -> Result<Vec<f64>> {
        if !self.in_natural_domain(eta) {
            return Err(Error::Domain(format!("invalid natural parameter {eta:?}")));
        }
        Ok(eta
            .iter()
            .zip(self.variances())
            .map(|(e, v)| e * v)
            .collect())
    }

    fn mean_map_closed(&self, eta: &[f64]) -> Option<Vec<f64>> {
        Some(
            eta.iter()
                .zip(self.variances())
                .map(|(e, v)| v * e)
                .collect(),
        )
    }

    fn inverse_mean_map_closed(&self, target: &[f64]) -> Option<Vec<f64>> {
        Some(
            target
                .iter()
                .zip(self.variances())
                .map(|(t, v)| t / v)
                .collect(),
        )
    }

    fn covariance_closed(&self, _eta: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_diagonal(&DVector::from_iterator(
            self.sigmas.len(),
            self.variances(),
        )))
    }

    fn attainable_range(&self) -> String {
        "any finite vector".into()
    }

    fn default_eta(&self) -> Vec<f64> {
        vec![0.0; self.sigmas.len()]
    }

    fn is_separable(&self) -> bool {
        true
    }

    fn marginal(&self, j: usize) -> Option<Box<dyn FamilyModel>> {
        self.sigmas
            .get(j)
            .map(|s| Box::new(GaussianKnownVariance { sigmas: vec![*s] }) as Box<dyn FamilyModel>)
    }

    fn stat_power(&self, j: usize) -> Option<f64> {
        (j < self.sigmas.len()).then_some(1.0)
    }

    fn support_nonnegative(&self) -> bool {
        false
    }

    fn sample(&self, eta: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let means = self.nat_param_inverse(eta).ok()?;
        Some(
            means
                .iter()
                .zip(&self.sigmas)
                .map(|(m, s)| {
                    let z: f64 = StandardNormal.sample(rng);
                    m + s * z
                })
                .collect(),
        )
    }
}
