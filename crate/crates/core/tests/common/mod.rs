//! Independent oracles shared by the integration tests: naive means,
//! finite-difference derivatives, adaptive quadrature and random instances.
//! Nothing here calls into the code under test.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|a - b| / max(|a|, |b|, 1)`: relative above unit scale, absolute below.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Plain relative error `|a - b| / |b|`.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Log-uniform values in `[lo, hi]`.
pub fn log_uniform(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|_| rng.random_range(a..=b).exp()).collect()
}

/// Values on unit scale, `[0.1, 10]`.
pub fn unit_scale(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    log_uniform(rng, n, 0.1, 10.0)
}

pub fn weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(0.2..5.0)).collect()
}

/// `(Σ w x^α / Σ w)^(1/α)`, the geometric mean at `α = 0`; direct formula.
pub fn naive_holder(alpha: f64, xs: &[f64], ws: &[f64]) -> f64 {
    let sw: f64 = ws.iter().sum();
    if alpha == 0.0 {
        (xs.iter().zip(ws).map(|(x, w)| w * x.ln()).sum::<f64>() / sw).exp()
    } else {
        (xs.iter()
            .zip(ws)
            .map(|(x, w)| w * x.powf(alpha))
            .sum::<f64>()
            / sw)
            .powf(1.0 / alpha)
    }
}

/// `Σ w x^α / Σ w x^(α-1)`; direct formula.
pub fn naive_lehmer(alpha: f64, xs: &[f64], ws: &[f64]) -> f64 {
    let num: f64 = xs.iter().zip(ws).map(|(x, w)| w * x.powf(alpha)).sum();
    let den: f64 = xs
        .iter()
        .zip(ws)
        .map(|(x, w)| w * x.powf(alpha - 1.0))
        .sum();
    num / den
}

/// `ln Σ w x^p` with the largest term factored out.
pub fn log_power_sum(p: f64, xs: &[f64], ws: &[f64]) -> f64 {
    let terms: Vec<f64> = xs
        .iter()
        .zip(ws)
        .map(|(x, w)| w.ln() + p * x.ln())
        .collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Hölder mean for extreme orders, through [`log_power_sum`].
pub fn log_domain_holder(alpha: f64, xs: &[f64], ws: &[f64]) -> f64 {
    let lw = ws.iter().sum::<f64>().ln();
    ((log_power_sum(alpha, xs, ws) - lw) / alpha).exp()
}

/// Lehmer mean for extreme orders, through [`log_power_sum`].
pub fn log_domain_lehmer(alpha: f64, xs: &[f64], ws: &[f64]) -> f64 {
    (log_power_sum(alpha, xs, ws) - log_power_sum(alpha - 1.0, xs, ws)).exp()
}

pub fn arithmetic(xs: &[f64], ws: &[f64]) -> f64 {
    xs.iter().zip(ws).map(|(x, w)| w * x).sum::<f64>() / ws.iter().sum::<f64>()
}

pub fn harmonic(xs: &[f64], ws: &[f64]) -> f64 {
    ws.iter().sum::<f64>() / xs.iter().zip(ws).map(|(x, w)| w / x).sum::<f64>()
}

/// Fourth-order central difference of `f` along coordinate `j`.
pub fn fd_partial(f: &dyn Fn(&[f64]) -> f64, x: &[f64], j: usize, h: f64) -> f64 {
    let at = |d: f64| {
        let mut y = x.to_vec();
        y[j] += d;
        f(&y)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

pub fn fd_gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len()).map(|j| fd_partial(f, x, j, h)).collect()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    // split first so that narrow peaks are not missed by the initial samples
    let pieces = 64;
    let width = (b - a) / pieces as f64;
    (0..pieces)
        .map(|i| {
            let (lo, hi) = (a + i as f64 * width, a + (i + 1) as f64 * width);
            let (fa, fm, fb) = (f(lo), f(0.5 * (lo + hi)), f(hi));
            let whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
            simpson_step(f, lo, hi, fa, fm, fb, whole, tol / pieces as f64, 40)
        })
        .sum()
}

/// `∫_0^upper f(x) dx` through `x = s²`, which removes `x^(-1/2)`-type
/// singularities at the origin.
pub fn integrate_from_zero(f: &dyn Fn(f64) -> f64, upper: f64, tol: f64) -> f64 {
    // 2 s f(s²) stays finite as s → 0; evaluate the endpoint just inside
    let g = |s: f64| {
        let s = s.max(1e-12);
        2.0 * s * f(s * s)
    };
    integrate(&g, 0.0, upper.sqrt(), tol)
}

/// Weibull density written directly from its textbook form.
pub fn weibull_pdf(x: f64, lambda: f64, k: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let z = x / lambda;
    k / lambda * z.powf(k - 1.0) * (-z.powf(k)).exp()
}

/// `Γ(x)` by the Lanczos approximation (g = 7, n = 9), accurate to ~1e-15
/// for `x > 0.5`.
pub fn gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x));
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(x + 0.5) * (-t).exp() * a
}

/// Angle between two vectors, in radians, ignoring orientation.
pub fn angle(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot.abs() / (na * nb)).min(1.0).acos()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Path to a bundled fixture.
pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests")
        .join("fixtures")
        .join(name)
}
