//! Concrete exponential families.

mod gaussian;
mod multinomial;
mod weibull;

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::Result;
use crate::expfam::FamilyModel;

pub use gaussian::{gaussian_known_variance_model, GaussianKnownVariance};
pub use multinomial::{
    multinomial_fixture, MultinomialFixture, MultinomialFull, MultinomialReduced,
};
pub use weibull::{weibull_log_density, weibull_model, weibull_moment, Weibull, WeibullSpec};

/// Wraps a model and hides its closed-form mean map, inverse and covariance,
/// leaving only `H`. Forces the finite-difference and Newton code paths.
pub struct NumericOnly(pub Box<dyn FamilyModel>);

impl NumericOnly {
    pub fn new<M: FamilyModel + 'static>(model: M) -> Self {
        NumericOnly(Box::new(model))
    }
}

impl FamilyModel for NumericOnly {
    fn name(&self) -> String {
        format!("numeric({})", self.0.name())
    }

    fn dim_x(&self) -> usize {
        self.0.dim_x()
    }

    fn dim_eta(&self) -> usize {
        self.0.dim_eta()
    }

    fn parameter_names(&self) -> Vec<String> {
        self.0.parameter_names()
    }

    fn log_base_measure(&self, x: &[f64]) -> Result<f64> {
        self.0.log_base_measure(x)
    }

    fn sufficient_stat(&self, x: &[f64]) -> Vec<f64> {
        self.0.sufficient_stat(x)
    }

    fn in_natural_domain(&self, eta: &[f64]) -> bool {
        self.0.in_natural_domain(eta)
    }

    fn log_normalizer(&self, eta: &[f64]) -> f64 {
        self.0.log_normalizer(eta)
    }

    fn nat_param(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.0.nat_param(theta)
    }

    fn nat_param_inverse(&self, eta: &[f64]) -> Result<Vec<f64>> {
        self.0.nat_param_inverse(eta)
    }

    fn nat_param_bijective(&self) -> bool {
        self.0.nat_param_bijective()
    }

    fn covariance_closed(&self, _eta: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    fn attainable(&self, target: &[f64]) -> bool {
        self.0.attainable(target)
    }

    fn attainable_range(&self) -> String {
        self.0.attainable_range()
    }

    fn default_eta(&self) -> Vec<f64> {
        self.0.default_eta()
    }

    fn is_separable(&self) -> bool {
        self.0.is_separable()
    }

    fn marginal(&self, j: usize) -> Option<Box<dyn FamilyModel>> {
        self.0
            .marginal(j)
            .map(|m| Box::new(NumericOnly(m)) as Box<dyn FamilyModel>)
    }

    fn stat_power(&self, j: usize) -> Option<f64> {
        self.0.stat_power(j)
    }

    fn support_nonnegative(&self) -> bool {
        self.0.support_nonnegative()
    }

    fn sample(&self, eta: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        self.0.sample(eta, rng)
    }
}
