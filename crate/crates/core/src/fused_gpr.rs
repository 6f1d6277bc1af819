//! Fusion of an agent's local prediction with its global estimate.
//!
//! For each test point the agent picks the nearest common point where the
//! global estimate is strictly more certain than its own, treats the two
//! locations as jointly Gaussian with the surrogate cross-covariance
//! `g(z*, t) k(z*, z_agg)`, swaps in the global marginal at `z_agg` and
//! marginalises `z_agg` out again.

use serde::Serialize;

use crate::distributed_gpr::GlobalPrediction;
use crate::kernel::{FusionConstants, Kernel};
use crate::{distance, Error, Result};

/// Common points where both global variances are strictly below the local
/// variance. Returned as indices into the common point list.
pub fn select_active(local_var_agg: &[f64], global: &GlobalPrediction) -> Result<Vec<usize>> {
    let m = local_var_agg.len();
    for v in [&global.var_hat, &global.var_ave, &global.mu_hat] {
        if v.len() != m {
            return Err(Error::LengthMismatch {
                what: "global prediction",
                expected: m,
                got: v.len(),
            });
        }
    }
    Ok((0..m)
        .filter(|&k| global.var_hat[k] < local_var_agg[k] && global.var_ave[k] < local_var_agg[k])
        .collect())
}

/// `g = min(var_star, var_agg) * max(0, c - psi_i) / sigma_f^4`.
pub fn g_factor(
    k: &Kernel,
    consts: &FusionConstants,
    agent: usize,
    var_star: f64,
    var_agg: f64,
) -> f64 {
    let gate = consts.gate(agent).max(0.0);
    var_star.min(var_agg) * gate / (k.sigma_f_sq * k.sigma_f_sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FusionTrace {
    /// Index of the chosen common point.
    pub z_agg: usize,
    pub g: f64,
    pub v: f64,
    pub mu_prime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FusedPoint {
    pub mean: f64,
    pub variance: f64,
    pub trace: Option<FusionTrace>,
}

/// Local predictions of one agent at the test point and on the common set.
#[derive(Debug, Clone, Copy)]
pub struct LocalView<'a> {
    pub mean_star: f64,
    pub var_star: f64,
    pub mean_agg: &'a [f64],
    pub var_agg: &'a [f64],
}

/// Fused mean and variance at `z_star` given a non-empty active set.
#[allow(clippy::too_many_arguments)]
pub fn fuse_point(
    z_star: &[f64],
    z_agg: &[Vec<f64>],
    active: &[usize],
    local: LocalView<'_>,
    global: &GlobalPrediction,
    k: &Kernel,
    consts: &FusionConstants,
    agent: usize,
) -> Result<FusedPoint> {
    let mut best: Option<(usize, f64)> = None;
    for &idx in active {
        let rho = distance(z_star, &z_agg[idx]);
        match best {
            Some((_, b)) if rho >= b => {}
            _ => best = Some((idx, rho)),
        }
    }
    let (a, rho) = best.ok_or(Error::EmptyActiveSet)?;
    Ok(fuse_with(a, rho, local, global, k, consts, agent))
}

#[inline]
fn fuse_with(
    a: usize,
    rho: f64,
    local: LocalView<'_>,
    global: &GlobalPrediction,
    k: &Kernel,
    consts: &FusionConstants,
    agent: usize,
) -> FusedPoint {
    let var_agg = local.var_agg[a];
    let g = g_factor(k, consts, agent, local.var_star, var_agg);
    let g_star = g * k.kappa(rho);
    let v = g_star / var_agg;
    let mu_prime = global.mu_hat[a] - local.mean_agg[a];
    FusedPoint {
        mean: v * mu_prime + local.mean_star,
        variance: local.var_star + v * v * (global.var_hat[a] - var_agg),
        trace: Some(FusionTrace {
            z_agg: a,
            g,
            v,
            mu_prime,
        }),
    }
}

/// Fused predictions of one agent over the whole test set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusedPrediction {
    pub mu_tilde: Vec<f64>,
    pub var_tilde: Vec<f64>,
    pub active_set: Vec<usize>,
    /// Per test point; empty when the active set is empty.
    pub traces: Vec<FusionTrace>,
}

impl FusedPrediction {
    /// Test points whose variance strictly decreased.
    pub fn improvements(&self, local_var: &[f64]) -> usize {
        self.var_tilde
            .iter()
            .zip(local_var)
            .filter(|(f, l)| f < l)
            .count()
    }
}

/// Runs the fusion over every test point. `agg_index[k]` is the position of
/// common point `k` within `z_star`.
#[allow(clippy::too_many_arguments)]
pub fn fuse(
    z_star: &[Vec<f64>],
    agg_index: &[usize],
    local_mean: &[f64],
    local_var: &[f64],
    global: &GlobalPrediction,
    k: &Kernel,
    consts: &FusionConstants,
    agent: usize,
) -> Result<FusedPrediction> {
    let n = z_star.len();
    if local_mean.len() != n || local_var.len() != n {
        return Err(Error::LengthMismatch {
            what: "local predictions",
            expected: n,
            got: local_mean.len().min(local_var.len()),
        });
    }
    if let Some(&bad) = agg_index.iter().find(|&&i| i >= n) {
        return Err(Error::IndexOutOfRange {
            what: "test set",
            index: bad,
            len: n,
        });
    }
    let mean_agg: Vec<f64> = agg_index.iter().map(|&i| local_mean[i]).collect();
    let var_agg: Vec<f64> = agg_index.iter().map(|&i| local_var[i]).collect();
    let active = select_active(&var_agg, global)?;
    if active.is_empty() {
        return Ok(FusedPrediction {
            mu_tilde: local_mean.to_vec(),
            var_tilde: local_var.to_vec(),
            active_set: active,
            traces: Vec::new(),
        });
    }
    let active_points: Vec<&[f64]> = active
        .iter()
        .map(|&a| z_star[agg_index[a]].as_slice())
        .collect();
    let mut mu_tilde = Vec::with_capacity(n);
    let mut var_tilde = Vec::with_capacity(n);
    let mut traces = Vec::with_capacity(n);
    for (p, z) in z_star.iter().enumerate() {
        let mut best = (0usize, f64::INFINITY);
        for (slot, q) in active_points.iter().enumerate() {
            let rho = distance(z, q);
            if rho < best.1 {
                best = (slot, rho);
            }
        }
        let local = LocalView {
            mean_star: local_mean[p],
            var_star: local_var[p],
            mean_agg: &mean_agg,
            var_agg: &var_agg,
        };
        let fp = fuse_with(active[best.0], best.1, local, global, k, consts, agent);
        mu_tilde.push(fp.mean);
        var_tilde.push(fp.variance);
        traces.push(fp.trace.expect("non-empty active set"));
    }
    Ok(FusedPrediction {
        mu_tilde,
        var_tilde,
        active_set: active,
        traces,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::NoiseProfile;

    fn consts(noise: &[f64], sigma_f_sq: f64) -> FusionConstants {
        FusionConstants::unchecked(sigma_f_sq, &NoiseProfile::new(noise.to_vec()).unwrap())
    }

    #[test]
    fn g_factor_examples() {
        let k = Kernel::squared_exponential(1.0, 0.5).unwrap();
        let homo = consts(&[0.01; 4], 1.0);
        assert_eq!(g_factor(&k, &homo, 2, 0.5, 0.9), 0.0);

        let mut fc = homo.clone();
        fc.c = fc.psi[0] + 0.1;
        let g = g_factor(&k, &fc, 0, 0.5, 0.9);
        assert!((g - 0.05).abs() < 1e-15);
        fc.c = fc.psi[0] - 0.1;
        assert_eq!(g_factor(&k, &fc, 0, 0.5, 0.9), 0.0);
    }

    #[test]
    fn select_active_is_strict() {
        let g = GlobalPrediction {
            mu_hat: vec![0.0; 3],
            var_hat: vec![0.5, 0.2, 0.2],
            var_ave: vec![0.5, 0.9, 0.3],
        };
        assert_eq!(select_active(&[0.5, 0.5, 0.5], &g).unwrap(), vec![2]);
        assert!(select_active(&[0.5, 0.5], &g).is_err());
    }

    #[test]
    fn homogeneous_fusion_is_a_noop() {
        let k = Kernel::squared_exponential(1.0, 0.5).unwrap();
        let fc = consts(&[0.01; 2], 1.0);
        let z: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.3]).collect();
        let mean = vec![0.1, 0.2, 0.3, 0.4, 0.5];
        let var = vec![0.9, 0.8, 0.7, 0.6, 0.5];
        let global = GlobalPrediction {
            mu_hat: vec![1.0, 1.0],
            var_hat: vec![0.1, 0.1],
            var_ave: vec![0.1, 0.1],
        };
        let f = fuse(&z, &[0, 4], &mean, &var, &global, &k, &fc, 1).unwrap();
        assert_eq!(f.active_set, vec![0, 1]);
        assert_eq!(f.mu_tilde, mean);
        assert_eq!(f.var_tilde, var);
        assert_eq!(f.improvements(&var), 0);
    }

    #[test]
    fn empty_active_set_returns_local() {
        let k = Kernel::squared_exponential(1.0, 0.5).unwrap();
        let fc = consts(&[0.5, 0.01], 1.0);
        let z = vec![vec![0.0], vec![1.0]];
        let global = GlobalPrediction {
            mu_hat: vec![3.0],
            var_hat: vec![0.9],
            var_ave: vec![0.2],
        };
        let f = fuse(&z, &[1], &[0.0, 0.1], &[0.5, 0.5], &global, &k, &fc, 0).unwrap();
        assert!(f.active_set.is_empty());
        assert_eq!(f.var_tilde, vec![0.5, 0.5]);
        assert!(matches!(
            fuse_point(
                &[0.0],
                &z,
                &[],
                LocalView {
                    mean_star: 0.0,
                    var_star: 0.5,
                    mean_agg: &[0.1],
                    var_agg: &[0.5]
                },
                &global,
                &k,
                &fc,
                0
            ),
            Err(Error::EmptyActiveSet)
        ));
    }

    #[test]
    fn heterogeneous_fusion_reduces_variance() {
        let k = Kernel::squared_exponential(1.0, 0.5).unwrap();
        let fc = consts(&[0.5, 0.01], 1.0);
        assert!(fc.gate(0) > 0.0);
        let z = vec![vec![0.0], vec![0.2]];
        let global = GlobalPrediction {
            mu_hat: vec![0.7],
            var_hat: vec![0.05],
            var_ave: vec![0.2],
        };
        let f = fuse(&z, &[1], &[0.0, 0.3], &[0.6, 0.4], &global, &k, &fc, 0).unwrap();
        assert_eq!(f.active_set, vec![0]);
        for (ft, lv) in f.var_tilde.iter().zip([0.6, 0.4]) {
            assert!(*ft > 0.0 && *ft < lv);
        }
        // step-by-step recomputation at z* = 0
        let g = 0.4f64.min(0.6) * fc.gate(0);
        let v = g * (-2.0f64 * 0.04).exp() / 0.4;
        assert!((f.mu_tilde[0] - (v * (0.7 - 0.3))).abs() < 1e-15);
        assert!((f.var_tilde[0] - (0.6 + v * v * (0.05 - 0.4))).abs() < 1e-15);
    }
}
