//! Quantities from the accuracy analysis: the Lipschitz constant and sup
//! norm of the latent function on the grid, and a Monte Carlo check of the
//! high-probability error bound of local GPR.

use serde::Serialize;

use super::{
    start_positions, step_trajectory, stream_rng, trajectory_stream, Grid, Latent, SimConfig,
};
use crate::kernel::{Kernel, NoiseProfile};
use crate::local_gpr::NearestTracker;
use crate::{distance, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LipschitzEstimate {
    pub ell_eta: f64,
}

/// Largest finite-difference slope over neighbouring grid points.
pub fn estimate_lipschitz(eta: impl Fn(&[f64]) -> f64, grid: &Grid) -> Result<LipschitzEstimate> {
    let pairs = grid.neighbor_pairs();
    if pairs.is_empty() {
        return Err(Error::InvalidParameter {
            name: "probe_grid",
            reason: "needs at least two neighbouring points".into(),
        });
    }
    let pts = grid.points();
    let values: Vec<f64> = pts.iter().map(|z| eta(z)).collect();
    let ell_eta = pairs
        .iter()
        .map(|&(a, b)| (values[a] - values[b]).abs() / distance(&pts[a], &pts[b]))
        .fold(0.0, f64::max);
    Ok(LipschitzEstimate { ell_eta })
}

/// `max |eta|` over the grid.
pub fn sup_norm(eta: impl Fn(&[f64]) -> f64, grid: &Grid) -> f64 {
    grid.points()
        .iter()
        .map(|z| eta(z).abs())
        .fold(0.0, f64::max)
}

/// Sample inputs each agent would collect under `cfg`, duplicates removed.
pub fn sample_geometry(cfg: &SimConfig) -> Result<Vec<Vec<Vec<f64>>>> {
    cfg.check()?;
    let n = cfg.agents;
    let mut rngs: Vec<_> = (0..n)
        .map(|i| stream_rng(cfg.seed, trajectory_stream(i)))
        .collect();
    let starts = start_positions(cfg, &mut rngs);
    let rounds = cfg.freeze_after.map_or(cfg.rounds, |f| f.min(cfg.rounds));
    Ok(starts
        .into_iter()
        .zip(rngs.iter_mut())
        .map(|(mut pos, rng)| {
            let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(rounds);
            for t in 1..=rounds {
                if t > 1 {
                    pos = step_trajectory(&pos, rng, &cfg.motion, &cfg.domain);
                }
                if !inputs.contains(&pos) {
                    inputs.push(pos.clone());
                }
            }
            inputs
        })
        .collect())
}

/// Fixed sample geometry for the Monte Carlo check; only the observation
/// noise is redrawn between realizations.
#[derive(Debug, Clone)]
pub struct ChebyshevSetup {
    pub kernel: Kernel,
    pub noise: NoiseProfile,
    pub latent: Latent,
    pub grid: Grid,
    /// Per-agent sample inputs.
    pub geometry: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChebyshevReport {
    pub realizations: usize,
    /// `(agent, test point, realization)` triples checked.
    pub samples: usize,
    pub violations: usize,
    pub rate: f64,
    /// `sigma_e_max^2 / epsilon^2`.
    pub chebyshev_bound: f64,
    /// Three binomial standard deviations at the bound, over the
    /// realizations.
    pub margin: f64,
    pub ell_eta: f64,
    pub eta_sup: f64,
    pub passed: bool,
}

/// Fraction of `(agent, z*)` pairs where the zero-prior local mean violates
/// `|mu - eta(z*)| <= (1 - kappa(d)/(sigma_f^2 + sigma_e^2)) |eta| + l d + epsilon`
/// with `d` the agent's grid dispersion.
pub fn check_error_probability_bound(
    setup: &ChebyshevSetup,
    epsilon: f64,
    realizations: usize,
    seed: u64,
) -> Result<ChebyshevReport> {
    let sigma_e_max = setup.noise.sigma_e_max_sq().sqrt();
    if !(epsilon > sigma_e_max) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must exceed the largest noise deviation {sigma_e_max}, got {epsilon}"),
        });
    }
    if realizations == 0 {
        return Err(Error::InvalidParameter {
            name: "realizations",
            reason: "must be at least 1".into(),
        });
    }
    if setup.geometry.len() != setup.noise.n_agents() {
        return Err(Error::LengthMismatch {
            what: "sample geometry",
            expected: setup.noise.n_agents(),
            got: setup.geometry.len(),
        });
    }
    let k = &setup.kernel;
    let eta = |z: &[f64]| setup.latent.eval(z);
    let ell = estimate_lipschitz(eta, &setup.grid)?.ell_eta;
    let sup = sup_norm(eta, &setup.grid);
    let truth: Vec<f64> = setup.grid.points().iter().map(|z| eta(z)).collect();

    struct Prepared {
        nearest: Vec<(usize, f64)>,
        clean: Vec<f64>,
        noise_sd: f64,
        denom: f64,
        bound: f64,
    }
    let prepared = setup
        .geometry
        .iter()
        .enumerate()
        .map(|(i, inputs)| {
            let mut tr = NearestTracker::new(setup.grid.points().to_vec());
            for z in inputs {
                tr.insert(z);
            }
            let d = tr.dispersion().ok_or(Error::EmptyDataset)?;
            let s2 = setup.noise.variances()[i];
            let denom = k.kappa(0.0) + s2;
            Ok(Prepared {
                nearest: (0..truth.len())
                    .map(|p| tr.nearest(p).expect("non-empty"))
                    .collect(),
                clean: inputs.iter().map(|z| eta(z)).collect(),
                noise_sd: s2.sqrt(),
                denom,
                bound: (1.0 - k.kappa(d) / denom) * sup + ell * d + epsilon,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut violations = 0usize;
    let mut samples = 0usize;
    for r in 0..realizations {
        let mut rng = stream_rng(seed, r as u64);
        for a in &prepared {
            let y: Vec<f64> = a
                .clean
                .iter()
                .map(|c| {
                    c + a.noise_sd
                        * rand::Rng::sample::<f64, _>(&mut rng, rand_distr::StandardNormal)
                })
                .collect();
            for (p, &(idx, rho)) in a.nearest.iter().enumerate() {
                let mu = k.kappa(rho) / a.denom * y[idx];
                samples += 1;
                if (mu - truth[p]).abs() > a.bound {
                    violations += 1;
                }
            }
        }
    }
    let rate = violations as f64 / samples as f64;
    let chebyshev_bound = setup.noise.sigma_e_max_sq() / (epsilon * epsilon);
    let pb = chebyshev_bound.min(1.0);
    let margin = 3.0 * (pb * (1.0 - pb) / realizations as f64).sqrt();
    Ok(ChebyshevReport {
        realizations,
        samples,
        violations,
        rate,
        chebyshev_bound,
        margin,
        ell_eta: ell,
        eta_sup: sup,
        passed: rate <= chebyshev_bound + margin,
    })
}
