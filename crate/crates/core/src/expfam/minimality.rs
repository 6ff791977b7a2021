use nalgebra::{DMatrix, SymmetricEigen};
use rand::rngs::StdRng;
use rand::SeedableRng;

use super::{check_eta, FamilyModel};
use crate::error::{Error, Result};

pub const DEFAULT_MINIMALITY_TOL: f64 = 1e-8;

/// Whether the components of `T` are affinely independent.
#[derive(Debug, Clone, PartialEq)]
pub enum Minimality {
    Minimal,
    /// `Σ y_j T_j(X)` is (numerically) constant along the unit vector `y`.
    Degenerate {
        direction: Vec<f64>,
    },
}

impl Minimality {
    pub fn is_minimal(&self) -> bool {
        matches!(self, Minimality::Minimal)
    }
}

impl std::fmt::Display for Minimality {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Minimality::Minimal => write!(f, "minimal"),
            Minimality::Degenerate { direction } => write!(f, "degenerate along {direction:?}"),
        }
    }
}

/// Verdict from a covariance matrix of `T`.
///
/// The matrix is first rescaled to a correlation matrix so that components
/// on very different scales do not mask each other; it is degenerate when the
/// smallest correlation eigenvalue is at most `rel_tol` times the largest, or
/// when some component has no variance at all. The reported direction is
/// mapped back to the original coordinates.
pub fn minimality_from_covariance(cov: &DMatrix<f64>, rel_tol: f64) -> Minimality {
    let q = cov.nrows();
    let diag: Vec<f64> = (0..q).map(|i| cov[(i, i)]).collect();
    if let Some(i) = diag.iter().position(|d| !(d.is_finite() && *d > 0.0)) {
        let mut direction = vec![0.0; q];
        direction[i] = 1.0;
        return Minimality::Degenerate { direction };
    }
    let scale: Vec<f64> = diag.iter().map(|d| d.sqrt().recip()).collect();
    let corr = DMatrix::from_fn(q, q, |i, j| cov[(i, j)] * scale[i] * scale[j]);
    let eig = SymmetricEigen::new(corr);
    let (imin, min) =
        eig.eigenvalues
            .iter()
            .copied()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, v)| if v < acc.1 { (i, v) } else { acc },
            );
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    if max > 0.0 && min > rel_tol * max {
        return Minimality::Minimal;
    }
    let mut direction: Vec<f64> = eig
        .eigenvectors
        .column(imin)
        .iter()
        .zip(&scale)
        .map(|(z, s)| z * s)
        .collect();
    let norm = direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sign = if direction.iter().sum::<f64>() < 0.0 {
        -1.0
    } else {
        1.0
    };
    for v in &mut direction {
        *v *= sign / norm;
    }
    Minimality::Degenerate { direction }
}

/// Estimates the covariance of `T(X)` from `n_samples` draws of the model at
/// `η` and reports whether it is full rank.
pub fn check_minimality<M: FamilyModel + ?Sized>(
    model: &M,
    eta: &[f64],
    n_samples: usize,
    seed: u64,
    rel_tol: f64,
) -> Result<Minimality> {
    check_eta(model, eta)?;
    let q = model.dim_eta();
    if n_samples < q + 1 {
        return Err(Error::Domain(format!(
            "need at least {} samples to estimate a {q}x{q} covariance, got {n_samples}",
            q + 1
        )));
    }
    let mut rng = StdRng::seed_from_u64(seed);
    let mut xs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let x = model.sample(eta, &mut rng).ok_or_else(|| {
            Error::Config(format!(
                "{} cannot sample; supply a representative sample instead",
                model.name()
            ))
        })?;
        xs.push(x);
    }
    check_minimality_from_sample(model, &xs, rel_tol)
}

/// Same verdict from a caller-supplied sample of observations.
pub fn check_minimality_from_sample<M: FamilyModel + ?Sized>(
    model: &M,
    xs: &[Vec<f64>],
    rel_tol: f64,
) -> Result<Minimality> {
    let q = model.dim_eta();
    if xs.len() < q + 1 {
        return Err(Error::Domain(format!(
            "need at least {} samples, got {}",
            q + 1,
            xs.len()
        )));
    }
    let stats: Vec<Vec<f64>> = xs.iter().map(|x| model.sufficient_stat(x)).collect();
    let n = stats.len() as f64;
    let mean: Vec<f64> = (0..q)
        .map(|j| stats.iter().map(|t| t[j]).sum::<f64>() / n)
        .collect();
    let mut cov = DMatrix::zeros(q, q);
    for t in &stats {
        for i in 0..q {
            for j in 0..q {
                cov[(i, j)] += (t[i] - mean[i]) * (t[j] - mean[j]);
            }
        }
    }
    cov /= n - 1.0;
    Ok(minimality_from_covariance(&cov, rel_tol))
}
