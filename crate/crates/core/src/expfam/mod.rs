//! Minimal multivariate exponential families `a(x) exp(<η, T(x)> - H(η))`
//! and the weighted log-likelihood built on them.

mod dataset;
mod minimality;
mod solver;

use nalgebra::DMatrix;
use rand::RngCore;

use crate::error::{Error, Result};
use crate::numeric::{central_step, KahanSum};

pub use dataset::WeightedDataset;
pub use minimality::{
    check_minimality, check_minimality_from_sample, minimality_from_covariance, Minimality,
    DEFAULT_MINIMALITY_TOL,
};
pub use solver::{inverse_mean_map, MeanMapSolution, SolveMethod, SolveStrategy, SolverOptions};

/// An exponential family in natural parameters.
///
/// Only the log base measure, sufficient statistic, log-normalizer and the
/// parameter maps are mandatory. Closed forms for the mean map, its inverse
/// and the covariance of `T` are optional; the generic routines fall back to
/// finite differences of `H` and Newton iterations when they are absent.
pub trait FamilyModel: Send + Sync {
    fn name(&self) -> String;

    /// Observation dimension `k`.
    fn dim_x(&self) -> usize;

    /// Natural-parameter dimension `q`.
    fn dim_eta(&self) -> usize;

    fn parameter_names(&self) -> Vec<String> {
        (1..=self.dim_eta()).map(|j| format!("theta{j}")).collect()
    }

    /// `ln a(x)`; errors when `x` is outside the support.
    fn log_base_measure(&self, x: &[f64]) -> Result<f64>;

    fn sufficient_stat(&self, x: &[f64]) -> Vec<f64>;

    /// Whether `H(η)` is finite.
    fn in_natural_domain(&self, eta: &[f64]) -> bool;

    fn log_normalizer(&self, eta: &[f64]) -> f64;

    /// `η(θ)`.
    fn nat_param(&self, theta: &[f64]) -> Result<Vec<f64>>;

    /// `θ(η)`.
    fn nat_param_inverse(&self, eta: &[f64]) -> Result<Vec<f64>>;

    fn nat_param_bijective(&self) -> bool {
        true
    }

    /// Closed-form `r(η) = ∇H(η)`.
    fn mean_map_closed(&self, _eta: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Closed-form `r⁻¹(t)` for an attainable target.
    fn inverse_mean_map_closed(&self, _target: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Closed-form covariance of `T(X)`, i.e. the Hessian of `H`.
    fn covariance_closed(&self, _eta: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// Whether `t` lies in the range of the mean map.
    fn attainable(&self, _target: &[f64]) -> bool {
        true
    }

    fn attainable_range(&self) -> String {
        "not described by the model".into()
    }

    /// Starting point for Newton iterations derived from the target.
    fn initial_eta(&self, _target: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Any point inside the natural domain.
    fn default_eta(&self) -> Vec<f64>;

    /// Independent components: `T_j` and `H_j` depend on column `j` only.
    fn is_separable(&self) -> bool {
        false
    }

    /// Univariate model of component `j` for separable families.
    fn marginal(&self, _j: usize) -> Option<Box<dyn FamilyModel>> {
        None
    }

    /// `p` when `T_j(x) = x_j^p`.
    fn stat_power(&self, _j: usize) -> Option<f64> {
        None
    }

    fn support_nonnegative(&self) -> bool;

    /// One draw from the distribution at `η`, when the model can sample.
    fn sample(&self, _eta: &[f64], _rng: &mut dyn RngCore) -> Option<Vec<f64>> {
        None
    }
}

/// Expected sufficient statistic `E[T(X)]`, a point in `R^q`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentTarget(pub Vec<f64>);

impl MomentTarget {
    pub fn new(value: Vec<f64>) -> Result<Self> {
        if let Some(v) = value.iter().find(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "moment target entry {v} is not finite"
            )));
        }
        Ok(MomentTarget(value))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for MomentTarget {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn check_eta<M: FamilyModel + ?Sized>(model: &M, eta: &[f64]) -> Result<()> {
    if eta.len() != model.dim_eta() {
        return Err(Error::Domain(format!(
            "natural parameter has {} components, model {} expects {}",
            eta.len(),
            model.name(),
            model.dim_eta()
        )));
    }
    if !model.in_natural_domain(eta) {
        return Err(Error::Domain(format!(
            "η = {eta:?} is outside the natural domain of {}",
            model.name()
        )));
    }
    Ok(())
}

fn check_x<M: FamilyModel + ?Sized>(model: &M, x: &[f64]) -> Result<()> {
    if x.len() != model.dim_x() {
        return Err(Error::Domain(format!(
            "observation has {} components, model {} expects {}",
            x.len(),
            model.name(),
            model.dim_x()
        )));
    }
    Ok(())
}

/// `ln a(x) + <η, T(x)> - H(η)`.
pub fn log_pdf<M: FamilyModel + ?Sized>(model: &M, x: &[f64], eta: &[f64]) -> Result<f64> {
    check_eta(model, eta)?;
    check_x(model, x)?;
    let t = model.sufficient_stat(x);
    Ok(model.log_base_measure(x)? + dot(eta, &t) - model.log_normalizer(eta))
}

/// `Σ u(x_i) [ln a(x_i) + <η, T(x_i)> - H(η)]`.
pub fn log_weighted_likelihood<M: FamilyModel + ?Sized>(
    model: &M,
    data: &WeightedDataset,
    eta: &[f64],
) -> Result<f64> {
    check_eta(model, eta)?;
    let h = model.log_normalizer(eta);
    let mut acc = KahanSum::default();
    for (x, u) in data.rows().zip(data.weights()) {
        check_x(model, x)?;
        let t = model.sufficient_stat(x);
        acc.add(u * (model.log_base_measure(x)? + dot(eta, &t) - h));
    }
    Ok(acc.total())
}

/// `Σ u(x_i) (T(x_i) - r(η))`.
pub fn grad_log_weighted_likelihood<M: FamilyModel + ?Sized>(
    model: &M,
    data: &WeightedDataset,
    eta: &[f64],
) -> Result<Vec<f64>> {
    check_eta(model, eta)?;
    let r = mean_map(model, eta)?;
    let q = model.dim_eta();
    let mut sums = vec![KahanSum::default(); q];
    for (x, u) in data.rows().zip(data.weights()) {
        check_x(model, x)?;
        for (acc, t) in sums.iter_mut().zip(model.sufficient_stat(x)) {
            acc.add(u * t);
        }
    }
    let total = data.total_weight();
    Ok(sums
        .iter()
        .zip(r.iter())
        .map(|(s, rj)| s.total() - total * rj)
        .collect())
}

/// `-(Σu) K_{T,T}(η)`.
pub fn hessian_log_weighted_likelihood<M: FamilyModel + ?Sized>(
    model: &M,
    data: &WeightedDataset,
    eta: &[f64],
) -> Result<DMatrix<f64>> {
    let cov = covariance(model, eta)?;
    Ok(cov * (-data.total_weight()))
}

/// Mean map `r(η) = ∇H(η) = E[T(X)]`.
///
/// Uses the model's closed form when available, central differences of `H`
/// otherwise.
pub fn mean_map<M: FamilyModel + ?Sized>(model: &M, eta: &[f64]) -> Result<MomentTarget> {
    check_eta(model, eta)?;
    if let Some(r) = model.mean_map_closed(eta) {
        return MomentTarget::new(r);
    }
    let mut grad = Vec::with_capacity(eta.len());
    for j in 0..eta.len() {
        let h = domain_step(model, eta, j, central_step(eta[j]))?;
        let (plus, minus) = shifted(eta, j, h);
        grad.push((model.log_normalizer(&plus) - model.log_normalizer(&minus)) / (2.0 * h));
    }
    MomentTarget::new(grad)
}

/// Covariance of `T(X)` at `η`, the Hessian of `H`. Symmetrized when it comes
/// from finite differences.
pub fn covariance<M: FamilyModel + ?Sized>(model: &M, eta: &[f64]) -> Result<DMatrix<f64>> {
    check_eta(model, eta)?;
    if let Some(cov) = model.covariance_closed(eta) {
        return Ok(cov);
    }
    let q = eta.len();
    let mut jac = DMatrix::zeros(q, q);
    if model.mean_map_closed(eta).is_some() {
        for j in 0..q {
            let h = domain_step(model, eta, j, central_step(eta[j]))?;
            let (plus, minus) = shifted(eta, j, h);
            let rp = mean_map(model, &plus)?;
            let rm = mean_map(model, &minus)?;
            for i in 0..q {
                jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
            }
        }
    } else {
        let steps: Vec<f64> = (0..q)
            .map(|j| {
                domain_step(
                    model,
                    eta,
                    j,
                    f64::EPSILON.powf(0.25) * (1.0 + eta[j].abs()),
                )
            })
            .collect::<Result<_>>()?;
        let h0 = model.log_normalizer(eta);
        for i in 0..q {
            for j in i..q {
                let value = if i == j {
                    let (plus, minus) = shifted(eta, i, steps[i]);
                    (model.log_normalizer(&plus) - 2.0 * h0 + model.log_normalizer(&minus))
                        / (steps[i] * steps[i])
                } else {
                    let at = |si: f64, sj: f64| {
                        let mut e = eta.to_vec();
                        e[i] += si * steps[i];
                        e[j] += sj * steps[j];
                        model.log_normalizer(&e)
                    };
                    (at(1.0, 1.0) - at(1.0, -1.0) - at(-1.0, 1.0) + at(-1.0, -1.0))
                        / (4.0 * steps[i] * steps[j])
                };
                jac[(i, j)] = value;
                jac[(j, i)] = value;
            }
        }
    }
    let sym = (&jac + jac.transpose()) * 0.5;
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!(
            "covariance of T at η = {eta:?} is not finite"
        )));
    }
    Ok(sym)
}

/// Shrinks `h` until `η ± h e_j` both stay in the natural domain.
fn domain_step<M: FamilyModel + ?Sized>(
    model: &M,
    eta: &[f64],
    j: usize,
    mut h: f64,
) -> Result<f64> {
    for _ in 0..60 {
        let (plus, minus) = shifted(eta, j, h);
        if model.in_natural_domain(&plus) && model.in_natural_domain(&minus) {
            return Ok(h);
        }
        h *= 0.5;
    }
    Err(Error::Numeric(format!(
        "no finite-difference step fits inside the natural domain around η = {eta:?}"
    )))
}

fn shifted(eta: &[f64], j: usize, h: f64) -> (Vec<f64>, Vec<f64>) {
    let mut plus = eta.to_vec();
    let mut minus = eta.to_vec();
    plus[j] += h;
    minus[j] -= h;
    (plus, minus)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
