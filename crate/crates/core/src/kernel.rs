//! Stationary kernels, noise profiles and the fusion constants.
//!
//! The fusion step needs per-agent constants `psi`, `chi` and the network
//! constant `c`, which depend only on the prior variance `sigma_f^2` and the
//! observation-noise variances of all agents. Agents learn the latter by
//! flooding ([`distributed_exchange_noise`]), each picks the smallest
//! `sigma_f^2` that satisfies the fusion condition ([`select_sigma_f`]), and
//! the network agrees on the largest pick with [`max_consensus`].

use serde::{Deserialize, Serialize};

use crate::netgraph::GraphSchedule;
use crate::{check_dim, distance, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KernelForm {
    #[default]
    SquaredExponential,
}

/// Stationary kernel `k(z, z') = kappa(|z - z'|)` with `kappa(0) = sigma_f^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    #[serde(default)]
    pub form: KernelForm,
    pub sigma_f_sq: f64,
    /// Squared lengthscale `l^2` in `sigma_f^2 exp(-r^2 / l^2)`.
    pub lengthscale_sq: f64,
}

impl Kernel {
    pub fn squared_exponential(sigma_f_sq: f64, lengthscale_sq: f64) -> Result<Self> {
        let k = Self {
            form: KernelForm::SquaredExponential,
            sigma_f_sq,
            lengthscale_sq,
        };
        k.check()?;
        Ok(k)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.sigma_f_sq > 0.0 && self.sigma_f_sq.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "sigma_f_sq",
                reason: format!("must be positive and finite, got {}", self.sigma_f_sq),
            });
        }
        if !(self.lengthscale_sq > 0.0 && self.lengthscale_sq.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "lengthscale_sq",
                reason: format!("must be positive and finite, got {}", self.lengthscale_sq),
            });
        }
        Ok(())
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale_sq.sqrt()
    }

    /// Same kernel with a different prior variance.
    pub fn with_sigma_f_sq(&self, sigma_f_sq: f64) -> Self {
        Self {
            sigma_f_sq,
            ..*self
        }
    }

    /// `kappa(rho)`.
    #[inline]
    pub fn kappa(&self, rho: f64) -> f64 {
        match self.form {
            KernelForm::SquaredExponential => {
                self.sigma_f_sq * (-(rho * rho) / self.lengthscale_sq).exp()
            }
        }
    }

    /// `k(z, z2)`.
    pub fn eval(&self, z: &[f64], z2: &[f64]) -> Result<f64> {
        check_dim(z.len(), z2.len())?;
        Ok(self.kappa(distance(z, z2)))
    }
}

/// Observation-noise variances, one per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NoiseRepr", into = "NoiseRepr")]
pub struct NoiseProfile {
    variances: Vec<f64>,
    min: f64,
    max: f64,
}

#[derive(Serialize, Deserialize)]
struct NoiseRepr {
    variances: Vec<f64>,
}

impl TryFrom<NoiseRepr> for NoiseProfile {
    type Error = Error;
    fn try_from(r: NoiseRepr) -> Result<Self> {
        NoiseProfile::new(r.variances)
    }
}

impl From<NoiseProfile> for NoiseRepr {
    fn from(p: NoiseProfile) -> Self {
        NoiseRepr {
            variances: p.variances,
        }
    }
}

impl NoiseProfile {
    pub fn new(variances: Vec<f64>) -> Result<Self> {
        if variances.is_empty() {
            return Err(Error::InvalidParameter {
                name: "noise variances",
                reason: "at least one agent is required".into(),
            });
        }
        if let Some(v) = variances.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter {
                name: "noise variances",
                reason: format!("every variance must be positive and finite, got {v}"),
            });
        }
        let min = variances.iter().copied().fold(f64::INFINITY, f64::min);
        let max = variances.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            variances,
            min,
            max,
        })
    }

    pub fn homogeneous(n: usize, variance: f64) -> Result<Self> {
        Self::new(vec![variance; n])
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn n_agents(&self) -> usize {
        self.variances.len()
    }

    pub fn sigma_e_min_sq(&self) -> f64 {
        self.min
    }

    pub fn sigma_e_max_sq(&self) -> f64 {
        self.max
    }
}

/// Constants gating the fusion correction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FusionConstants {
    pub sigma_f_sq: f64,
    /// `sigma_f^2 / (sigma_f^2 + sigma_e_i^2)`.
    pub psi: Vec<f64>,
    /// `1/sigma_e_i^2 + 1/sigma_f^2`.
    pub chi: Vec<f64>,
    pub mu_chi: f64,
    /// `sum_i (chi_i + mu_chi)^2`.
    pub sigma_chi_sq: f64,
    /// `chi`-weighted mean of `psi`.
    pub c: f64,
    /// `min_{i in V+} (c sigma_f^2 - psi_i)`; `None` when `V+` is empty.
    pub eps_plus: Option<f64>,
    /// Agents with `c sigma_f^2 - psi_i > 0`.
    pub v_plus: Vec<usize>,
}

impl FusionConstants {
    /// Constants without the admissibility preconditions (`sigma_f^2 >= 1`,
    /// non-empty `V+`). The fusion step only needs `c` and `psi`, so a run
    /// with a fixed `sigma_f^2` uses this.
    pub fn unchecked(sigma_f_sq: f64, noise: &NoiseProfile) -> Self {
        let raw = raw_constants(sigma_f_sq, noise);
        Self {
            sigma_f_sq,
            psi: raw.psi,
            chi: raw.chi,
            mu_chi: raw.mu_chi,
            sigma_chi_sq: raw.sigma_chi_sq,
            c: raw.c,
            eps_plus: raw.eps_plus,
            v_plus: raw.v_plus,
        }
    }

    /// `c - psi_i`, the gate of agent `i`'s correction.
    pub fn gate(&self, agent: usize) -> f64 {
        self.c - self.psi[agent]
    }
}

struct RawConstants {
    psi: Vec<f64>,
    chi: Vec<f64>,
    mu_chi: f64,
    sigma_chi_sq: f64,
    c: f64,
    v_plus: Vec<usize>,
    eps_plus: Option<f64>,
}

fn raw_constants(sigma_f_sq: f64, noise: &NoiseProfile) -> RawConstants {
    let n = noise.n_agents() as f64;
    let psi: Vec<f64> = noise
        .variances()
        .iter()
        .map(|s| sigma_f_sq / (sigma_f_sq + s))
        .collect();
    let chi: Vec<f64> = noise
        .variances()
        .iter()
        .map(|s| 1.0 / s + 1.0 / sigma_f_sq)
        .collect();
    let chi_sum: f64 = chi.iter().sum();
    let mu_chi = chi_sum / n;
    let sigma_chi_sq = chi.iter().map(|x| (x + mu_chi) * (x + mu_chi)).sum();
    // c = mu_chi^{-1} (1/n) sum_j chi_j psi_j, written as a weighted mean
    // centred on psi_0 so identical agents give c == psi exactly.
    let psi0 = psi[0];
    let c = psi0
        + chi
            .iter()
            .zip(&psi)
            .map(|(x, p)| x * (p - psi0))
            .sum::<f64>()
            / chi_sum;
    let v_plus: Vec<usize> = psi
        .iter()
        .enumerate()
        .filter(|(_, p)| c * sigma_f_sq - **p > 0.0)
        .map(|(i, _)| i)
        .collect();
    let eps_plus = v_plus
        .iter()
        .map(|&i| c * sigma_f_sq - psi[i])
        .reduce(f64::min);
    RawConstants {
        psi,
        chi,
        mu_chi,
        sigma_chi_sq,
        c,
        v_plus,
        eps_plus,
    }
}

pub fn compute_fusion_constants(sigma_f_sq: f64, noise: &NoiseProfile) -> Result<FusionConstants> {
    if !(sigma_f_sq >= 1.0 && sigma_f_sq.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "sigma_f_sq",
            reason: format!("must be finite and at least 1, got {sigma_f_sq}"),
        });
    }
    let fc = FusionConstants::unchecked(sigma_f_sq, noise);
    if fc.eps_plus.is_none() {
        return Err(Error::EmptyPositiveSet { sigma_f_sq });
    }
    Ok(fc)
}

/// Both sides of the `sigma_f^2` admissibility inequality
/// `sigma_chi^2 / (mu_chi^2 eps_+) <= sigma_e_min^2 / sigma_e_max^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SigmaFCondition {
    pub sigma_f_sq: f64,
    /// Infinite when no agent has a positive gap.
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

pub fn sigma_f_condition(sigma_f_sq: f64, noise: &NoiseProfile) -> SigmaFCondition {
    let raw = raw_constants(sigma_f_sq, noise);
    let lhs = match raw.eps_plus {
        Some(eps) => raw.sigma_chi_sq / (raw.mu_chi * raw.mu_chi * eps),
        None => f64::INFINITY,
    };
    let rhs = noise.sigma_e_min_sq() / noise.sigma_e_max_sq();
    SigmaFCondition {
        sigma_f_sq,
        lhs,
        rhs,
        satisfied: sigma_f_sq >= 1.0 && lhs <= rhs,
    }
}

pub const MAX_DOUBLINGS: u32 = 64;
const BISECTION_REL_TOL: f64 = 1e-6;

/// Smallest `sigma_f^2 >= start` satisfying the admissibility inequality,
/// found by doubling then bisection to `1e-6` relative width. The returned
/// value always satisfies the inequality.
pub fn select_sigma_f(noise: &NoiseProfile, start: f64) -> Result<f64> {
    if !(start >= 1.0 && start.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "start",
            reason: format!("must be finite and at least 1, got {start}"),
        });
    }
    let ok = |s: f64| sigma_f_condition(s, noise).satisfied;
    if ok(start) {
        return Ok(start);
    }
    let mut lo = start;
    let mut hi = start;
    let mut found = false;
    for _ in 0..MAX_DOUBLINGS {
        hi *= 2.0;
        if ok(hi) {
            found = true;
            break;
        }
        lo = hi;
    }
    if !found {
        return Err(Error::SigmaFSearchExhausted {
            doublings: MAX_DOUBLINGS,
        });
    }
    while (hi - lo) > BISECTION_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Outcome of flooding every agent's value through the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Exchange {
    /// `known[i][j]` is agent `i`'s copy of agent `j`'s value.
    pub known: Vec<Vec<f64>>,
    /// Rounds until every agent knew every value.
    pub rounds: usize,
}

fn round_cap(graphs: &GraphSchedule) -> usize {
    let n = graphs.n_agents();
    let window = graphs.connectivity_window().unwrap_or(graphs.period());
    (n * window).max(1)
}

/// Floodset exchange: each synchronous round, every agent forwards all
/// `(id, value)` pairs it knows to the agents that listen to it at that
/// step. Round `r` uses `A(r)`.
pub fn distributed_exchange_noise(
    graphs: &GraphSchedule,
    local_values: &[f64],
) -> Result<Exchange> {
    let n = graphs.n_agents();
    if local_values.len() != n {
        return Err(Error::LengthMismatch {
            what: "local values",
            expected: n,
            got: local_values.len(),
        });
    }
    let mut known: Vec<Vec<Option<f64>>> = (0..n)
        .map(|i| {
            let mut row = vec![None; n];
            row[i] = Some(local_values[i]);
            row
        })
        .collect();
    let complete = |k: &[Vec<Option<f64>>]| k.iter().all(|row| row.iter().all(Option::is_some));
    let cap = round_cap(graphs);
    let mut rounds = 0;
    while !complete(&known) && rounds < cap {
        let a = graphs.at(rounds);
        let snapshot = known.clone();
        for (i, row) in known.iter_mut().enumerate() {
            for (j, msg) in snapshot.iter().enumerate() {
                if i != j && a.get(i, j) != 0.0 {
                    for (slot, v) in row.iter_mut().zip(msg) {
                        if slot.is_none() {
                            *slot = *v;
                        }
                    }
                }
            }
        }
        rounds += 1;
    }
    let incomplete: Vec<usize> = known
        .iter()
        .enumerate()
        .filter(|(_, row)| row.iter().any(Option::is_none))
        .map(|(i, _)| i)
        .collect();
    if !incomplete.is_empty() {
        return Err(Error::Unreachable {
            agents: incomplete,
            rounds,
        });
    }
    Ok(Exchange {
        known: known
            .into_iter()
            .map(|row| row.into_iter().map(|v| v.expect("complete")).collect())
            .collect(),
        rounds,
    })
}

/// Max consensus: each round every agent takes the maximum over itself and
/// its in-neighbours at that step.
pub fn max_consensus(graphs: &GraphSchedule, local_values: &[f64]) -> Result<Vec<f64>> {
    let n = graphs.n_agents();
    if local_values.len() != n {
        return Err(Error::LengthMismatch {
            what: "local values",
            expected: n,
            got: local_values.len(),
        });
    }
    let global = local_values
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut x = local_values.to_vec();
    let cap = round_cap(graphs);
    for r in 0..cap {
        let a = graphs.at(r);
        let prev = x.clone();
        for (i, xi) in x.iter_mut().enumerate() {
            for (j, pj) in prev.iter().enumerate() {
                if a.get(i, j) != 0.0 && *pj > *xi {
                    *xi = *pj;
                }
            }
        }
    }
    let stale: Vec<usize> = x
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != global)
        .map(|(i, _)| i)
        .collect();
    if !stale.is_empty() {
        return Err(Error::Unreachable {
            agents: stale,
            rounds: cap,
        });
    }
    Ok(x)
}

/// Network-wide `sigma_f^2` selection: flood the noise variances, let each
/// agent select locally, then agree on the maximum.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkSigmaF {
    pub per_agent: Vec<f64>,
    pub agreed: Vec<f64>,
    pub flood_rounds: usize,
    pub condition: SigmaFCondition,
}

pub fn select_sigma_f_distributed(
    graphs: &GraphSchedule,
    noise: &NoiseProfile,
    start: f64,
) -> Result<NetworkSigmaF> {
    let exchange = distributed_exchange_noise(graphs, noise.variances())?;
    let per_agent = exchange
        .known
        .iter()
        .map(|vals| select_sigma_f(&NoiseProfile::new(vals.clone())?, start))
        .collect::<Result<Vec<_>>>()?;
    let agreed = max_consensus(graphs, &per_agent)?;
    let condition = sigma_f_condition(agreed[0], noise);
    Ok(NetworkSigmaF {
        per_agent,
        agreed,
        flood_rounds: exchange.rounds,
        condition,
    })
}
