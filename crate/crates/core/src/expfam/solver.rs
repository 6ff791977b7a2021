//! Inversion of the mean map: find `η` with `r(η) = t`.

use nalgebra::{DMatrix, DVector};

use super::{check_eta, covariance, dot, mean_map, FamilyModel};
use crate::error::{Error, Result};
use crate::numeric::max_abs;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStrategy {
    /// Closed form when the model has one, else Newton with a bisection
    /// fallback for separable models.
    Auto,
    ClosedForm,
    Newton,
    Bisection,
}

impl std::str::FromStr for SolveStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(SolveStrategy::Auto),
            "closed" | "closed-form" => Ok(SolveStrategy::ClosedForm),
            "newton" => Ok(SolveStrategy::Newton),
            "bisection" => Ok(SolveStrategy::Bisection),
            _ => Err(Error::Config(format!("unknown solver strategy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    ClosedForm,
    Newton,
    Bisection,
}

impl std::fmt::Display for SolveMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveMethod::ClosedForm => "closed-form",
            SolveMethod::Newton => "newton",
            SolveMethod::Bisection => "bisection",
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub strategy: SolveStrategy,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// Convergence when `‖r(η) - t‖∞ ≤ tolerance · (1 + ‖t‖∞)`.
    pub tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            strategy: SolveStrategy::Auto,
            max_iterations: 200,
            max_halvings: 50,
            tolerance: 1e-10,
        }
    }
}

impl SolverOptions {
    pub fn with_strategy(strategy: SolveStrategy) -> Self {
        SolverOptions {
            strategy,
            ..SolverOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanMapSolution {
    pub eta: Vec<f64>,
    pub iterations: usize,
    /// `‖r(η) - t‖∞` at the returned point.
    pub residual: f64,
    pub method: SolveMethod,
}

/// Solves `r(η) = target` for `η`.
pub fn inverse_mean_map<M: FamilyModel + ?Sized>(
    model: &M,
    target: &[f64],
    init: Option<&[f64]>,
    options: &SolverOptions,
) -> Result<MeanMapSolution> {
    let q = model.dim_eta();
    if target.len() != q {
        return Err(Error::Domain(format!(
            "target has {} components, model {} expects {q}",
            target.len(),
            model.name()
        )));
    }
    if let Some(v) = target.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("target entry {v} is not finite")));
    }
    if !model.attainable(target) {
        return Err(Error::NoSolution {
            target: target.to_vec(),
            range: model.attainable_range(),
        });
    }
    if let Some(init) = init {
        check_eta(model, init)?;
    }

    match options.strategy {
        SolveStrategy::ClosedForm => closed_form(model, target).unwrap_or_else(|| {
            Err(Error::Config(format!(
                "{} has no closed-form inverse mean map",
                model.name()
            )))
        }),
        SolveStrategy::Newton => newton(model, target, init, options),
        SolveStrategy::Bisection => bisection(model, target, init, options),
        SolveStrategy::Auto => {
            if let Some(found) = closed_form(model, target) {
                return found;
            }
            match newton(model, target, init, options) {
                Err(err @ Error::Convergence { .. }) if model.is_separable() => {
                    log::debug!("Newton failed ({err}); retrying with bisection");
                    bisection(model, target, init, options)
                }
                other => other,
            }
        }
    }
}

fn tolerance(target: &[f64], options: &SolverOptions) -> f64 {
    options.tolerance * (1.0 + max_abs(target))
}

fn residual_of<M: FamilyModel + ?Sized>(
    model: &M,
    eta: &[f64],
    target: &[f64],
) -> Result<Vec<f64>> {
    let r = mean_map(model, eta)?;
    Ok(r.iter().zip(target).map(|(a, b)| a - b).collect())
}

fn closed_form<M: FamilyModel + ?Sized>(
    model: &M,
    target: &[f64],
) -> Option<Result<MeanMapSolution>> {
    let eta = model.inverse_mean_map_closed(target)?;
    Some((|| {
        check_eta(model, &eta)?;
        let residual = max_abs(&residual_of(model, &eta, target)?);
        Ok(MeanMapSolution {
            eta,
            iterations: 0,
            residual,
            method: SolveMethod::ClosedForm,
        })
    })())
}

fn starting_point<M: FamilyModel + ?Sized>(
    model: &M,
    target: &[f64],
    init: Option<&[f64]>,
    options: &SolverOptions,
) -> Vec<f64> {
    if let Some(init) = init {
        return init.to_vec();
    }
    if let Some(eta) = model.initial_eta(target) {
        if model.in_natural_domain(&eta) {
            return eta;
        }
    }
    let start = model.default_eta();
    if model.is_separable() {
        // a handful of bisection steps per component brings Newton into its
        // quadratic basin without paying for a full bisection solve
        let coarse = SolverOptions {
            max_iterations: 12,
            ..*options
        };
        if let Ok(eta) = bracket_and_bisect(model, target, &start, &coarse) {
            return eta;
        }
    }
    start
}

fn newton<M: FamilyModel + ?Sized>(
    model: &M,
    target: &[f64],
    init: Option<&[f64]>,
    options: &SolverOptions,
) -> Result<MeanMapSolution> {
    let tol = tolerance(target, options);
    let mut eta = starting_point(model, target, init, options);
    let mut g = residual_of(model, &eta, target)?;
    let mut norm2 = l2(&g);
    let mut converged_at: Option<usize> = None;
    let mut iterations = 0;

    while iterations < options.max_iterations {
        if max_abs(&g) <= tol && converged_at.is_none() {
            converged_at = Some(iterations);
        }
        // after convergence take a few extra full steps while they still help
        if let Some(at) = converged_at {
            if iterations >= at + 3 {
                break;
            }
        }
        iterations += 1;

        let jac = covariance(model, &eta)?;
        let step = match solve_linear(jac, &g) {
            Some(step) => step,
            None => break,
        };

        // Backtrack on the convex dual φ(η) = H(η) - <η, t>, whose gradient is
        // the residual, so the Newton step is a descent direction from any
        // start. Once φ differences drown in rounding, fall back to the
        // residual norm.
        let phi0 = dual_objective(model, &eta, target);
        let slope = -dot(&g, &step);
        let mut next = None;
        if converged_at.is_none() && phi0.is_finite() && slope < 0.0 {
            next = backtrack(
                model,
                target,
                &eta,
                &step,
                options.max_halvings,
                |scale, candidate, _| {
                    let phi = dual_objective(model, candidate, target);
                    phi.is_finite() && phi < phi0 && phi <= phi0 + 1e-4 * scale * slope
                },
            );
        }
        if next.is_none() {
            let polishing = converged_at.is_some();
            next = backtrack(
                model,
                target,
                &eta,
                &step,
                options.max_halvings,
                |scale, _, g_new| {
                    let n_new = l2(g_new);
                    if polishing {
                        n_new < norm2
                    } else {
                        n_new <= (1.0 - 1e-4 * scale) * norm2
                    }
                },
            );
        }
        let Some((candidate, g_new)) = next else {
            break;
        };
        eta = candidate;
        norm2 = l2(&g_new);
        g = g_new;
    }

    let residual = max_abs(&g);
    if residual <= tol {
        Ok(MeanMapSolution {
            eta,
            iterations,
            residual,
            method: SolveMethod::Newton,
        })
    } else {
        Err(Error::Convergence {
            iterations,
            residual,
            last: eta,
        })
    }
}

/// Halves the step `η - scale·step` until `accept(scale, candidate, residual)`
/// holds at a point of the natural domain with a finite residual.
fn backtrack<M, F>(
    model: &M,
    target: &[f64],
    eta: &[f64],
    step: &[f64],
    max_halvings: usize,
    accept: F,
) -> Option<(Vec<f64>, Vec<f64>)>
where
    M: FamilyModel + ?Sized,
    F: Fn(f64, &[f64], &[f64]) -> bool,
{
    let mut scale = 1.0;
    for _ in 0..=max_halvings {
        let candidate: Vec<f64> = eta.iter().zip(step).map(|(e, s)| e - scale * s).collect();
        if model.in_natural_domain(&candidate) {
            if let Ok(g) = residual_of(model, &candidate, target) {
                if g.iter().all(|v| v.is_finite()) && accept(scale, &candidate, &g) {
                    return Some((candidate, g));
                }
            }
        }
        scale *= 0.5;
    }
    None
}

/// `H(η) - <η, t>`: convex, minimized exactly where `r(η) = t`.
fn dual_objective<M: FamilyModel + ?Sized>(model: &M, eta: &[f64], target: &[f64]) -> f64 {
    model.log_normalizer(eta) - dot(eta, target)
}

/// Solves `J s = g`; `None` when `J` is singular.
fn solve_linear(jac: DMatrix<f64>, g: &[f64]) -> Option<Vec<f64>> {
    let rhs = DVector::from_column_slice(g);
    let step = jac.lu().solve(&rhs)?;
    if step.iter().all(|v| v.is_finite()) {
        Some(step.iter().copied().collect())
    } else {
        None
    }
}

fn bisection<M: FamilyModel + ?Sized>(
    model: &M,
    target: &[f64],
    init: Option<&[f64]>,
    options: &SolverOptions,
) -> Result<MeanMapSolution> {
    if !model.is_separable() {
        return Err(Error::Config(format!(
            "bisection needs a separable model, {} is not",
            model.name()
        )));
    }
    let start = match init {
        Some(init) => init.to_vec(),
        None => model.default_eta(),
    };
    let deep = SolverOptions {
        max_iterations: options.max_iterations.max(400),
        ..*options
    };
    let eta = bracket_and_bisect(model, target, &start, &deep)?;
    let residual = max_abs(&residual_of(model, &eta, target)?);
    if residual <= tolerance(target, options) {
        Ok(MeanMapSolution {
            eta,
            iterations: deep.max_iterations,
            residual,
            method: SolveMethod::Bisection,
        })
    } else {
        Err(Error::Convergence {
            iterations: deep.max_iterations,
            residual,
            last: eta,
        })
    }
}

/// Per-component root finding on `r_j(η_j) = t_j`, which is increasing in
/// `η_j` for separable models. Runs at most `options.max_iterations` halvings
/// per component after bracketing.
fn bracket_and_bisect<M: FamilyModel + ?Sized>(
    model: &M,
    target: &[f64],
    start: &[f64],
    options: &SolverOptions,
) -> Result<Vec<f64>> {
    let mut eta = start.to_vec();
    for j in 0..eta.len() {
        let f = |e: f64, base: &[f64]| -> Result<f64> {
            let mut probe = base.to_vec();
            probe[j] = e;
            Ok(mean_map(model, &probe)?[j] - target[j])
        };
        let base = eta.clone();
        let in_domain = |e: f64| {
            let mut probe = base.clone();
            probe[j] = e;
            model.in_natural_domain(&probe)
        };

        let mut a = eta[j];
        let fa = f(a, &base)?;
        if fa == 0.0 {
            continue;
        }
        let dir = if fa < 0.0 { 1.0 } else { -1.0 };
        let mut step = 1.0 + a.abs();
        let mut b = None;
        for _ in 0..400 {
            let mut cand = a + dir * step;
            let mut shrinks = 0;
            while !in_domain(cand) && shrinks < 200 {
                step *= 0.5;
                cand = a + dir * step;
                shrinks += 1;
            }
            if !in_domain(cand) || cand == a {
                break;
            }
            let fc = f(cand, &base)?;
            if fc.signum() != fa.signum() || fc == 0.0 {
                b = Some(cand);
                break;
            }
            a = cand;
            step *= 2.0;
        }
        let Some(mut b) = b else {
            return Err(Error::NoSolution {
                target: target.to_vec(),
                range: model.attainable_range(),
            });
        };

        // keep f(lo) < 0 < f(hi)
        let (mut lo, mut hi) = if dir > 0.0 { (a, b) } else { (b, a) };
        for _ in 0..options.max_iterations {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid, &base)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        b = if f(lo, &base)?.abs() <= f(hi, &base)?.abs() {
            lo
        } else {
            hi
        };
        eta[j] = b;
    }
    Ok(eta)
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
