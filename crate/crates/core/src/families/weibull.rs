//! Independent-component Weibull with fixed shapes.
//!
//! With shape `k` and scale `λ` the density `k x^(k-1) λ^(-k) exp(-(x/λ)^k)`
//! factors as `a(x) exp(η T(x) - H(η))` with
//!
//! * `ln a(x) = ln k + (k-1) ln x`
//! * `T(x) = x^k`
//! * `η = -λ^(-k)`, natural domain `η < 0`
//! * `H(η) = -ln(-η)`, so `r(η) = -1/η = λ^k` and `Var T = 1/η²`.

use nalgebra::DMatrix;
use rand::{Rng, RngCore};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::expfam::FamilyModel;

#[derive(Debug, Clone, PartialEq)]
pub struct WeibullSpec {
    pub shapes: Vec<f64>,
}

impl WeibullSpec {
    pub fn new(shapes: Vec<f64>) -> Self {
        WeibullSpec { shapes }
    }

    /// The same shape for `components` independent columns.
    pub fn uniform(shape: f64, components: usize) -> Self {
        WeibullSpec {
            shapes: vec![shape; components],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weibull {
    shapes: Vec<f64>,
}

pub fn weibull_model(spec: &WeibullSpec) -> Result<Weibull> {
    if spec.shapes.is_empty() {
        return Err(Error::Config(
            "Weibull model needs at least one component".into(),
        ));
    }
    if let Some(k) = spec.shapes.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
        return Err(Error::Config(format!("Weibull shape {k} is not positive")));
    }
    Ok(Weibull {
        shapes: spec.shapes.clone(),
    })
}

impl Weibull {
    pub fn shapes(&self) -> &[f64] {
        &self.shapes
    }
}

/// `E[X^t] = λ^t Γ(1 + t/k)`.
pub fn weibull_moment(lambda: f64, k: f64, t: f64) -> Result<f64> {
    if !(lambda > 0.0 && k > 0.0 && t >= 0.0) {
        return Err(Error::Domain(format!(
            "Weibull moment needs λ > 0, k > 0, t ≥ 0 (got λ={lambda}, k={k}, t={t})"
        )));
    }
    if t == 0.0 {
        return Ok(1.0);
    }
    Ok(lambda.powf(t) * gamma(1.0 + t / k))
}

/// Log-density of one Weibull component, written directly in `(λ, k)`.
pub fn weibull_log_density(x: f64, lambda: f64, k: f64) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    let z = x / lambda;
    k.ln() - lambda.ln() + (k - 1.0) * z.ln() - z.powf(k)
}

impl FamilyModel for Weibull {
    fn name(&self) -> String {
        format!("weibull(k={:?})", self.shapes)
    }

    fn dim_x(&self) -> usize {
        self.shapes.len()
    }

    fn dim_eta(&self) -> usize {
        self.shapes.len()
    }

    fn parameter_names(&self) -> Vec<String> {
        (1..=self.shapes.len())
            .map(|j| format!("lambda{j}"))
            .collect()
    }

    fn log_base_measure(&self, x: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (xj, k) in x.iter().zip(&self.shapes) {
            if !(*xj >= 0.0) {
                return Err(Error::Domain(format!("Weibull support is x ≥ 0, got {xj}")));
            }
            acc += k.ln();
            if *k != 1.0 {
                acc += (k - 1.0) * xj.ln();
            }
        }
        Ok(acc)
    }

    fn sufficient_stat(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.shapes)
            .map(|(xj, k)| xj.powf(*k))
            .collect()
    }

    fn in_natural_domain(&self, eta: &[f64]) -> bool {
        eta.len() == self.shapes.len() && eta.iter().all(|e| e.is_finite() && *e < 0.0)
    }

    fn log_normalizer(&self, eta: &[f64]) -> f64 {
        eta.iter().map(|e| -(-e).ln()).sum()
    }

    fn nat_param(&self, theta: &[f64]) -> Result<Vec<f64>> {
        if theta.len() != self.shapes.len() {
            return Err(Error::Domain("scale vector has the wrong length".into()));
        }
        theta
            .iter()
            .zip(&self.shapes)
            .map(|(lambda, k)| {
                if lambda.is_finite() && *lambda > 0.0 {
                    Ok(-(-k * lambda.ln()).exp())
                } else {
                    Err(Error::Domain(format!(
                        "Weibull scale {lambda} is not positive"
                    )))
                }
            })
            .collect()
    }

    fn nat_param_inverse(&self, eta: &[f64]) -> Result<Vec<f64>> {
        if !self.in_natural_domain(eta) {
            return Err(Error::Domain(format!(
                "η = {eta:?} is not strictly negative"
            )));
        }
        Ok(eta
            .iter()
            .zip(&self.shapes)
            .map(|(e, k)| (-(-e).ln() / k).exp())
            .collect())
    }

    fn mean_map_closed(&self, eta: &[f64]) -> Option<Vec<f64>> {
        Some(eta.iter().map(|e| -1.0 / e).collect())
    }

    fn inverse_mean_map_closed(&self, target: &[f64]) -> Option<Vec<f64>> {
        Some(target.iter().map(|t| -1.0 / t).collect())
    }

    fn covariance_closed(&self, eta: &[f64]) -> Option<DMatrix<f64>> {
        Some(DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            eta.len(),
            eta.iter().map(|e| 1.0 / (e * e)),
        )))
    }

    fn attainable(&self, target: &[f64]) -> bool {
        target.iter().all(|t| *t > 0.0)
    }

    fn attainable_range(&self) -> String {
        "every component of E[X^k] must be > 0".into()
    }

    fn default_eta(&self) -> Vec<f64> {
        vec![-1.0; self.shapes.len()]
    }

    fn is_separable(&self) -> bool {
        true
    }

    fn marginal(&self, j: usize) -> Option<Box<dyn FamilyModel>> {
        self.shapes
            .get(j)
            .map(|k| Box::new(Weibull { shapes: vec![*k] }) as Box<dyn FamilyModel>)
    }

    fn stat_power(&self, j: usize) -> Option<f64> {
        self.shapes.get(j).copied()
    }

    fn support_nonnegative(&self) -> bool {
        true
    }

    /// Inverse-CDF draw `λ (-ln U)^(1/k)`.
    fn sample(&self, eta: &[f64], rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        let scales = self.nat_param_inverse(eta).ok()?;
        Some(
            scales
                .iter()
                .zip(&self.shapes)
                .map(|(lambda, k)| {
                    let u: f64 = 1.0 - rng.random::<f64>();
                    lambda * (-u.ln()).powf(1.0 / k)
                })
                .collect(),
        )
    }
}
