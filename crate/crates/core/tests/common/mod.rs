//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// `sf2 * exp(-|a - b|^2 / l2)` evaluated through nalgebra.
pub fn se_kernel(sf2: f64, l2: f64, a: &[f64], b: &[f64]) -> f64 {
    let d = DVector::from_column_slice(a) - DVector::from_column_slice(b);
    let rho = d.norm();
    sf2 * (-(rho * rho) / l2).exp()
}

/// Index of the closest point, first one on ties.
pub fn brute_nearest(points: &[Vec<f64>], z: &[f64]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        let d = (DVector::from_column_slice(p) - DVector::from_column_slice(z)).norm();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Textbook GPR posterior at `z_star` conditioned on the training set
/// `(xs, ys)` with noise `s2`, through the full Gram matrix.
pub fn full_gpr(
    sf2: f64,
    l2: f64,
    s2: f64,
    prior: f64,
    xs: &[Vec<f64>],
    ys: &[f64],
    z_star: &[f64],
) -> (f64, f64) {
    let n = xs.len();
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            gram[(i, j)] = se_kernel(sf2, l2, &xs[i], &xs[j]) + if i == j { s2 } else { 0.0 };
        }
    }
    let kstar = DVector::from_iterator(n, xs.iter().map(|x| se_kernel(sf2, l2, z_star, x)));
    let resid = DVector::from_iterator(n, ys.iter().map(|y| y - prior));
    let inv = gram.try_inverse().expect("invertible Gram matrix");
    let mean = prior + (kstar.transpose() * &inv * resid)[(0, 0)];
    let var = se_kernel(sf2, l2, z_star, z_star) - (kstar.transpose() * &inv * &kstar)[(0, 0)];
    (mean, var)
}

/// Product-of-experts aggregate variance `1 / mean(1 / v_i)`.
pub fn poe_var(vars: &[f64]) -> f64 {
    let n = vars.len() as f64;
    n / vars.iter().map(|v| 1.0 / v).sum::<f64>()
}

/// Product-of-experts aggregate mean.
pub fn poe_mean(means: &[f64], vars: &[f64]) -> f64 {
    let w: f64 = vars.iter().map(|v| 1.0 / v).sum();
    means.iter().zip(vars).map(|(m, v)| m / v).sum::<f64>() / w
}

/// The `sigma_f^2` admissibility inequality, written out directly.
pub struct SigmaFCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub c: f64,
    pub psi: Vec<f64>,
    pub holds: bool,
}

pub fn sigma_f_inequality(sf2: f64, noise: &[f64]) -> SigmaFCheck {
    let n = noise.len() as f64;
    let psi: Vec<f64> = noise.iter().map(|s| sf2 / (sf2 + s)).collect();
    let chi: Vec<f64> = noise.iter().map(|s| 1.0 / s + 1.0 / sf2).collect();
    let mu_chi = chi.iter().sum::<f64>() / n;
    let c = (chi.iter().zip(&psi).map(|(x, p)| x * p).sum::<f64>() / n) / mu_chi;
    let sigma_chi_sq: f64 = chi.iter().map(|x| (x + mu_chi).powi(2)).sum();
    let eps = psi
        .iter()
        .map(|p| c * sf2 - p)
        .filter(|g| *g > 0.0)
        .fold(f64::INFINITY, f64::min);
    let lhs = sigma_chi_sq / (mu_chi * mu_chi * eps);
    let min = noise.iter().copied().fold(f64::INFINITY, f64::min);
    let max = noise.iter().copied().fold(0.0, f64::max);
    let rhs = min / max;
    SigmaFCheck {
        lhs,
        rhs,
        c,
        psi,
        holds: sf2 >= 1.0 && eps.is_finite() && lhs <= rhs,
    }
}

pub fn config_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs")
        .join(name)
}
