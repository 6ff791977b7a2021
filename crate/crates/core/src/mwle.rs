//! Maximum weighted likelihood estimation.
//!
//! The MWLE solves `r(η) = Σ u(x_i) T(x_i) / Σ u(x_i)` and maps back through
//! `η⁻¹`. The weight policy decides which mean family the estimate reduces
//! to: `u = w` with power statistics gives Hölder means, `u = w x^(β-1)` with
//! identity statistics on independent components gives Lehmer means.

use std::fmt;
use std::sync::Arc;

use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::expfam::{
    covariance, hessian_log_weighted_likelihood, inverse_mean_map, minimality_from_covariance,
    FamilyModel, Minimality, MomentTarget, SolveMethod, SolverOptions, WeightedDataset,
    DEFAULT_MINIMALITY_TOL,
};
use crate::numeric::KahanSum;

/// Data-relevance weight `w(x)`; receives a row (Hölder) or a single entry
/// (Lehmer).
pub type BaseWeight = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub enum PolicyKind {
    /// `u(x) = w(x)`.
    Holder,
    /// `u(x_{i,j}) = w(x_{i,j}) x_{i,j}^(β_j - 1)`, one weight column per
    /// component. A single exponent applies to every column.
    Lehmer { exponents: Vec<f64> },
    /// Arbitrary θ-free row weight.
    Custom(BaseWeight),
}

impl fmt::Debug for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PolicyKind::Holder => write!(f, "Holder"),
            PolicyKind::Lehmer { exponents } => write!(f, "Lehmer({exponents:?})"),
            PolicyKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct WeightPolicy {
    kind: PolicyKind,
    base: Option<BaseWeightFn>,
}

#[derive(Clone)]
struct BaseWeightFn(BaseWeight);

impl fmt::Debug for BaseWeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("<w>")
    }
}

impl WeightPolicy {
    pub fn holder() -> Self {
        WeightPolicy {
            kind: PolicyKind::Holder,
            base: None,
        }
    }

    pub fn lehmer(exponents: Vec<f64>) -> Self {
        WeightPolicy {
            kind: PolicyKind::Lehmer { exponents },
            base: None,
        }
    }

    pub fn custom<F>(u: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        WeightPolicy {
            kind: PolicyKind::Custom(Arc::new(u)),
            base: None,
        }
    }

    /// Replaces the default `w ≡ 1`.
    pub fn with_base_weight<F>(mut self, w: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        self.base = Some(BaseWeightFn(Arc::new(w)));
        self
    }

    pub fn kind(&self) -> &PolicyKind {
        &self.kind
    }

    fn base_weight(&self, x: &[f64]) -> Result<f64> {
        let w = match &self.base {
            Some(BaseWeightFn(f)) => f(x),
            None => 1.0,
        };
        if w.is_finite() && w > 0.0 {
            Ok(w)
        } else {
            Err(Error::Domain(format!(
                "base weight w({x:?}) = {w} is not positive"
            )))
        }
    }
}

/// Weights produced by a policy.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyWeights {
    /// One weight per row.
    Shared(Vec<f64>),
    /// `columns[j][i]` weights entry `x_{i,j}`.
    PerColumn(Vec<Vec<f64>>),
}

fn check_observations(observations: &[Vec<f64>]) -> Result<usize> {
    let first = observations
        .first()
        .ok_or_else(|| Error::Domain("no observations".into()))?;
    let k = first.len();
    if let Some(i) = observations.iter().position(|r| r.len() != k) {
        return Err(Error::Domain(format!(
            "row {i} does not have {k} components"
        )));
    }
    Ok(k)
}

fn lehmer_exponent(exponents: &[f64], j: usize, k: usize) -> Result<f64> {
    match exponents.len() {
        1 => Ok(exponents[0]),
        len if len == k => Ok(exponents[j]),
        len => Err(Error::Config(format!(
            "Lehmer policy has {len} exponents for {k} columns"
        ))),
    }
}

/// `ln u_{i,j}` for the Lehmer policy, column-major.
fn lehmer_log_weights(
    policy: &WeightPolicy,
    exponents: &[f64],
    observations: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let k = check_observations(observations)?;
    (0..k)
        .map(|j| {
            let beta = lehmer_exponent(exponents, j, k)?;
            if !beta.is_finite() {
                return Err(Error::Config(format!("Lehmer exponent {beta} is not finite")));
            }
            observations
                .iter()
                .enumerate()
                .map(|(i, row)| {
                    let x = row[j];
                    let w = policy.base_weight(&[x])?;
                    if !(x >= 0.0) {
                        return Err(Error::Domain(format!(
                            "Lehmer weights need non-negative data, x[{i}][{j}] = {x}"
                        )));
                    }
                    if beta == 1.0 {
                        return Ok(w.ln());
                    }
                    if x == 0.0 {
                        return Err(Error::Domain(format!(
                            "x[{i}][{j}] = 0 gives weight 0^({beta}-1), which is not a positive number"
                        )));
                    }
                    Ok(w.ln() + (beta - 1.0) * x.ln())
                })
                .collect()
        })
        .collect()
}

/// Evaluates `u` on every observation.
pub fn apply_policy(policy: &WeightPolicy, observations: &[Vec<f64>]) -> Result<PolicyWeights> {
    check_observations(observations)?;
    match &policy.kind {
        PolicyKind::Holder => Ok(PolicyWeights::Shared(
            observations
                .iter()
                .map(|row| policy.base_weight(row))
                .collect::<Result<_>>()?,
        )),
        PolicyKind::Custom(u) => Ok(PolicyWeights::Shared(
            observations
                .iter()
                .map(|row| {
                    let v = u(row) * policy.base_weight(row)?;
                    if v.is_finite() && v > 0.0 {
                        Ok(v)
                    } else {
                        Err(Error::Domain(format!("u({row:?}) = {v} is not positive")))
                    }
                })
                .collect::<Result<_>>()?,
        )),
        PolicyKind::Lehmer { exponents } => {
            let logs = lehmer_log_weights(policy, exponents, observations)?;
            let columns = logs
                .into_iter()
                .map(|col| {
                    col.into_iter()
                        .map(|l| {
                            let u = l.exp();
                            if u.is_finite() && u > 0.0 {
                                Ok(u)
                            } else {
                                Err(Error::Numeric(format!("weight exp({l}) is out of range")))
                            }
                        })
                        .collect::<Result<Vec<f64>>>()
                })
                .collect::<Result<_>>()?;
            Ok(PolicyWeights::PerColumn(columns))
        }
    }
}

/// `Σ u(x_i) T(x_i) / Σ u(x_i)` with compensated sums.
pub fn weighted_stat_mean<M: FamilyModel + ?Sized>(
    model: &M,
    data: &WeightedDataset,
) -> Result<MomentTarget> {
    let q = model.dim_eta();
    let mut sums = vec![KahanSum::default(); q];
    let mut total = KahanSum::default();
    for (x, u) in data.rows().zip(data.weights()) {
        if x.len() != model.dim_x() {
            return Err(Error::Domain(format!(
                "observation has {} components, model {} expects {}",
                x.len(),
                model.name(),
                model.dim_x()
            )));
        }
        total.add(*u);
        for (acc, t) in sums.iter_mut().zip(model.sufficient_stat(x)) {
            acc.add(u * t);
        }
    }
    let total = total.total();
    MomentTarget::new(sums.iter().map(|s| s.total() / total).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub iterations: usize,
    /// `‖r(η̂) - target‖∞`.
    pub residual: f64,
    pub hessian_min_eigenvalue: f64,
    pub hessian_max_eigenvalue: f64,
    pub minimality: Minimality,
    pub method: SolveMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub parameter_names: Vec<String>,
    pub theta_hat: Vec<f64>,
    pub eta_hat: Vec<f64>,
    pub target: MomentTarget,
    pub diagnostics: FitDiagnostics,
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub solver: SolverOptions,
    pub minimality_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            solver: SolverOptions::default(),
            minimality_tol: DEFAULT_MINIMALITY_TOL,
        }
    }
}

/// Fits `model` to `observations` under `policy`.
///
/// Lehmer policies weight each column differently, so each independent
/// component is fitted as its own univariate problem through
/// [`FamilyModel::marginal`].
pub fn fit<M: FamilyModel + ?Sized>(
    model: &M,
    observations: &[Vec<f64>],
    policy: &WeightPolicy,
    options: &FitOptions,
) -> Result<FitResult> {
    if !model.nat_param_bijective() {
        return Err(Error::Config(format!(
            "{} declares a non-bijective natural parameterization; the estimate is not identifiable",
            model.name()
        )));
    }
    let k = check_observations(observations)?;
    if k != model.dim_x() {
        return Err(Error::Domain(format!(
            "observations have {k} columns, model {} expects {}",
            model.name(),
            model.dim_x()
        )));
    }
    match &policy.kind {
        PolicyKind::Lehmer { exponents } => {
            if !model.is_separable() || model.dim_eta() != k {
                return Err(Error::Config(format!(
                    "Lehmer policies need independent components, {} is not separable",
                    model.name()
                )));
            }
            let logs = lehmer_log_weights(policy, exponents, observations)?;
            let mut parts = Vec::with_capacity(k);
            for (j, log_u) in logs.into_iter().enumerate() {
                let marginal = model.marginal(j).ok_or_else(|| {
                    Error::Config(format!(
                        "{} has no marginal for component {j}",
                        model.name()
                    ))
                })?;
                // rescaling u leaves the ratio unchanged and keeps exp() finite
                let shift = log_u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let u: Vec<f64> = log_u.iter().map(|l| (l - shift).exp()).collect();
                let column: Vec<Vec<f64>> = observations.iter().map(|row| vec![row[j]]).collect();
                let data = WeightedDataset::new(column, u)?;
                parts.push(fit_weighted(marginal.as_ref(), &data, options)?);
            }
            Ok(combine(model, parts))
        }
        _ => {
            let weights = match apply_policy(policy, observations)? {
                PolicyWeights::Shared(u) => u,
                PolicyWeights::PerColumn(_) => {
                    unreachable!("only Lehmer policies weight per column")
                }
            };
            let data = WeightedDataset::new(observations.to_vec(), weights)?;
            fit_weighted(model, &data, options)
        }
    }
}

/// MWLE for a dataset whose weights are already computed.
pub fn fit_weighted<M: FamilyModel + ?Sized>(
    model: &M,
    data: &WeightedDataset,
    options: &FitOptions,
) -> Result<FitResult> {
    if !model.nat_param_bijective() {
        return Err(Error::Config(format!(
            "{} declares a non-bijective natural parameterization",
            model.name()
        )));
    }
    let target = weighted_stat_mean(model, data)?;
    let solution = inverse_mean_map(model, &target, None, &options.solver)?;
    let theta_hat = model.nat_param_inverse(&solution.eta)?;

    let hessian = hessian_log_weighted_likelihood(model, data, &solution.eta)?;
    let eig = SymmetricEigen::new(hessian).eigenvalues;
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let minimality =
        minimality_from_covariance(&covariance(model, &solution.eta)?, options.minimality_tol);
    if let Minimality::Degenerate { direction } = &minimality {
        log::warn!(
            "{}: Hessian is degenerate at the estimate along {direction:?}; the maximum may not be unique",
            model.name()
        );
    }

    Ok(FitResult {
        parameter_names: model.parameter_names(),
        theta_hat,
        eta_hat: solution.eta,
        target,
        diagnostics: FitDiagnostics {
            iterations: solution.iterations,
            residual: solution.residual,
            hessian_min_eigenvalue: min,
            hessian_max_eigenvalue: max,
            minimality,
            method: solution.method,
        },
    })
}

fn combine<M: FamilyModel + ?Sized>(model: &M, parts: Vec<FitResult>) -> FitResult {
    let q = parts.len();
    let mut degenerate = None;
    for (j, p) in parts.iter().enumerate() {
        if !p.diagnostics.minimality.is_minimal() && degenerate.is_none() {
            let mut direction = vec![0.0; q];
            direction[j] = 1.0;
            degenerate = Some(Minimality::Degenerate { direction });
        }
    }
    let method = if parts
        .iter()
        .all(|p| p.diagnostics.method == SolveMethod::ClosedForm)
    {
        SolveMethod::ClosedForm
    } else if parts
        .iter()
        .any(|p| p.diagnostics.method == SolveMethod::Bisection)
    {
        SolveMethod::Bisection
    } else {
        SolveMethod::Newton
    };
    FitResult {
        parameter_names: model.parameter_names(),
        theta_hat: parts
            .iter()
            .flat_map(|p| p.theta_hat.iter().copied())
            .collect(),
        eta_hat: parts
            .iter()
            .flat_map(|p| p.eta_hat.iter().copied())
            .collect(),
        target: MomentTarget(
            parts
                .iter()
                .flat_map(|p| p.target.0.iter().copied())
                .collect(),
        ),
        diagnostics: FitDiagnostics {
            iterations: parts
                .iter()
                .map(|p| p.diagnostics.iterations)
                .max()
                .unwrap_or(0),
            residual: parts
                .iter()
                .map(|p| p.diagnostics.residual)
                .fold(0.0, f64::max),
            hessian_min_eigenvalue: parts
                .iter()
                .map(|p| p.diagnostics.hessian_min_eigenvalue)
                .fold(f64::INFINITY, f64::min),
            hessian_max_eigenvalue: parts
                .iter()
                .map(|p| p.diagnostics.hessian_max_eigenvalue)
                .fold(f64::NEG_INFINITY, f64::max),
            minimality: degenerate.unwrap_or(Minimality::Minimal),
            method,
        },
    }
}

/// Which mean family, if any, the MWLE of `model` under `policy` reduces to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubclassReport {
    pub is_holder_mean: bool,
    pub is_lehmer_mean: bool,
    pub reason: String,
}

/// Structural check of the model/policy pair.
///
/// Hölder form: `T_j(x) = x_j^(α_j)` and `u = w`. Lehmer form: identity
/// statistics on independent components and `u = w x^(β_j - 1)`. Both need
/// non-negative support.
pub fn subclass_form<M: FamilyModel + ?Sized>(model: &M, policy: &WeightPolicy) -> SubclassReport {
    let neither = |reason: String| SubclassReport {
        is_holder_mean: false,
        is_lehmer_mean: false,
        reason,
    };
    if !model.support_nonnegative() {
        return neither(format!(
            "{} has support on negative values, where power means and x^(β-1) weights are undefined",
            model.name()
        ));
    }
    let q = model.dim_eta();
    if q > model.dim_x() {
        return neither(format!("q = {q} exceeds k = {}", model.dim_x()));
    }
    let powers: Option<Vec<f64>> = (0..q).map(|j| model.stat_power(j)).collect();
    match (&policy.kind, powers) {
        (_, None) => neither(format!(
            "{} does not have power sufficient statistics T_j(x) = x_j^p",
            model.name()
        )),
        (PolicyKind::Custom(_), _) => {
            neither("a custom weight policy matches neither u = w nor u = w x^(β-1)".into())
        }
        (PolicyKind::Holder, Some(p)) => {
            if p.contains(&0.0) {
                return neither("a zero power makes T constant".into());
            }
            SubclassReport {
                is_holder_mean: true,
                is_lehmer_mean: false,
                reason: format!(
                    "u = w and T_j(x) = x_j^{p:?}: r_j(η̂) is the weighted Hölder mean of order {p:?} raised to that power"
                ),
            }
        }
        (PolicyKind::Lehmer { exponents }, Some(p)) => {
            if !model.is_separable() {
                neither(format!(
                    "{} does not have independent components",
                    model.name()
                ))
            } else if p.iter().any(|p| *p != 1.0) {
                neither(format!(
                    "Lehmer form needs identity statistics, {} has T_j(x) = x_j^{p:?}",
                    model.name()
                ))
            } else {
                SubclassReport {
                    is_holder_mean: false,
                    is_lehmer_mean: true,
                    reason: format!(
                        "T = identity on independent components and u = w x^(β-1) with β = {exponents:?}: r_j(η̂) is the Lehmer mean"
                    ),
                }
            }
        }
    }
}
