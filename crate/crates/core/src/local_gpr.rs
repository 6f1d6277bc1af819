//! Per-agent streaming datasets and nearest-neighbor GPR.
//!
//! Each test point is predicted from the single closest training sample,
//! which makes a prediction `O(t)` in the dataset size and keeps the
//! variance a closed-form function of the nearest distance:
//! `sigma_f^2 - kappa(rho)^2 / (sigma_f^2 + sigma_e^2)`.

use serde::Serialize;

use crate::kernel::Kernel;
use crate::{check_dim, distance, Error, Result};

/// Append-only dataset of one agent. Inputs are unique.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentDataset {
    agent_id: usize,
    dim: usize,
    noise_var: f64,
    inputs: Vec<Vec<f64>>,
    outputs: Vec<f64>,
}

impl AgentDataset {
    pub fn new(agent_id: usize, dim: usize, noise_var: f64) -> Result<Self> {
        if !(noise_var >= 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "noise_var",
                reason: format!("must be finite and non-negative, got {noise_var}"),
            });
        }
        Ok(Self {
            agent_id,
            dim,
            noise_var,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn agent_id(&self) -> usize {
        self.agent_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    /// Appends a sample; exact duplicates of an existing input are rejected.
    pub fn append(&mut self, z: Vec<f64>, y: f64) -> Result<()> {
        check_dim(self.dim, z.len())?;
        if self.inputs.iter().any(|x| x == &z) {
            return Err(Error::RepetitiveSample(z));
        }
        self.inputs.push(z);
        self.outputs.push(y);
        Ok(())
    }

    /// Nearest stored input to `z_star`, earliest insertion on ties.
    /// Returns the index and the distance.
    pub fn nearest_index(&self, z_star: &[f64]) -> Result<(usize, f64)> {
        check_dim(self.dim, z_star.len())?;
        nearest_in(&self.inputs, z_star).ok_or(Error::EmptyDataset)
    }

    /// Element of the projection of `z_star` onto the inputs, with its output.
    pub fn nearest(&self, z_star: &[f64]) -> Result<(&[f64], f64)> {
        let (i, _) = self.nearest_index(z_star)?;
        Ok((&self.inputs[i], self.outputs[i]))
    }

    pub fn predict(
        &self,
        k: &Kernel,
        z_star: &[f64],
        prior_mean: impl Fn(&[f64]) -> f64,
    ) -> Result<LocalPrediction> {
        let (i, _) = self.nearest_index(z_star)?;
        Ok(predict_from_sample(
            k,
            z_star,
            &self.inputs[i],
            self.outputs[i],
            self.noise_var,
            &prior_mean,
        ))
    }

    /// Grid approximation of the dispersion: the largest distance from a
    /// probe point to its nearest input.
    pub fn dispersion(&self, probe_grid: &[Vec<f64>]) -> Result<f64> {
        if probe_grid.is_empty() {
            return Err(Error::InvalidParameter {
                name: "probe_grid",
                reason: "must contain at least one point".into(),
            });
        }
        let mut d: f64 = 0.0;
        for p in probe_grid {
            let (_, rho) = self.nearest_index(p)?;
            d = d.max(rho);
        }
        Ok(d)
    }
}

pub(crate) fn nearest_in(points: &[Vec<f64>], z: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, p) in points.iter().enumerate() {
        let rho = distance(p, z);
        match best {
            Some((_, b)) if rho >= b => {}
            _ => best = Some((i, rho)),
        }
    }
    best
}

/// Nearest-neighbor GPR output at one test point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalPrediction {
    pub mean: f64,
    pub variance: f64,
    /// The training input the prediction conditions on.
    pub nearest: Vec<f64>,
}

/// GPR conditioned on the single sample `(z_n, y_n)`.
pub fn predict_from_sample(
    k: &Kernel,
    z_star: &[f64],
    z_n: &[f64],
    y_n: f64,
    noise_var: f64,
    prior_mean: &dyn Fn(&[f64]) -> f64,
) -> LocalPrediction {
    let (mean, variance) = nn_posterior(
        k,
        distance(z_star, z_n),
        prior_mean(z_star),
        prior_mean(z_n),
        y_n,
        noise_var,
    );
    LocalPrediction {
        mean,
        variance,
        nearest: z_n.to_vec(),
    }
}

/// Posterior mean and variance from a sample at distance `rho`.
#[inline]
pub fn nn_posterior(
    k: &Kernel,
    rho: f64,
    prior_star: f64,
    prior_n: f64,
    y_n: f64,
    noise_var: f64,
) -> (f64, f64) {
    let k_sn = k.kappa(rho);
    let k_nn = k.kappa(0.0) + noise_var;
    let mean = prior_star + k_sn / k_nn * (y_n - prior_n);
    let variance = k.kappa(0.0) - k_sn * k_sn / k_nn;
    (mean, variance)
}

/// Incremental nearest-neighbor index over a fixed set of probe points.
///
/// Every inserted sample updates the per-probe nearest candidate in
/// `O(|probes|)`; a strictly-closer rule keeps the earliest insertion on
/// ties, so lookups agree with [`AgentDataset::nearest_index`] run over the
/// samples in insertion order.
#[derive(Debug, Clone)]
pub struct NearestTracker {
    probes: Vec<Vec<f64>>,
    best: Vec<Option<(usize, f64)>>,
    count: usize,
}

impl NearestTracker {
    pub fn new(probes: Vec<Vec<f64>>) -> Self {
        let best = vec![None; probes.len()];
        Self {
            probes,
            best,
            count: 0,
        }
    }

    /// Registers the next sample; its index is the number of samples seen so
    /// far.
    pub fn insert(&mut self, z: &[f64]) -> usize {
        let idx = self.count;
        for (p, slot) in self.probes.iter().zip(self.best.iter_mut()) {
            let rho = distance(p, z);
            match slot {
                Some((_, b)) if rho >= *b => {}
                _ => *slot = Some((idx, rho)),
            }
        }
        self.count += 1;
        idx
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn probes(&self) -> &[Vec<f64>] {
        &self.probes
    }

    /// `(sample index, distance)` of the nearest sample to probe `p`.
    pub fn nearest(&self, p: usize) -> Option<(usize, f64)> {
        self.best[p]
    }

    /// Largest nearest distance over the probes.
    pub fn dispersion(&self) -> Option<f64> {
        self.best
            .iter()
            .map(|b| b.map(|(_, d)| d))
            .try_fold(0.0f64, |acc, d| d.map(|d| acc.max(d)))
    }
}
