//! Synchronous multi-agent experiment harness.
//!
//! Each round every agent moves, takes one noisy sample of the latent
//! function, predicts on the test grid, runs one consensus step on the
//! common points against its neighbours' previous-round states and fuses
//! the result. A centralized nearest-neighbor GPR over the pooled samples
//! runs alongside as the baseline.
//!
//! Agents are processed in parallel within a round; every agent owns its
//! random streams and accumulators, so results do not depend on the thread
//! count.

mod config;
mod grid;
mod theory;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::consensus::{
    fodac_step, init_state, sum_preservation_residual, ConsensusState, RoundInput, Signals,
};
use crate::distributed_gpr::{read_global, GlobalPrediction};
use crate::fused_gpr::{fuse, FusedPrediction};
use crate::kernel::{
    compute_fusion_constants, select_sigma_f_distributed, FusionConstants, Kernel,
};
use crate::local_gpr::{nn_posterior, AgentDataset, NearestTracker};
use crate::{Error, Result};

pub use config::{
    Boundary, Domain, GridConfig, KernelConfig, Latent, MotionConfig, MotionKind, SigmaFMode,
    SimConfig,
};
pub use grid::Grid;
pub use theory::{
    check_error_probability_bound, estimate_lipschitz, sample_geometry, sup_norm, ChebyshevReport,
    ChebyshevSetup, LipschitzEstimate,
};

/// One step of an agent's trajectory.
pub fn step_trajectory<R: Rng + ?Sized>(
    pos: &[f64],
    rng: &mut R,
    motion: &MotionConfig,
    domain: &Domain,
) -> Vec<f64> {
    let bounds = domain.lower.iter().zip(&domain.upper);
    match motion.kind {
        MotionKind::Uniform => bounds.map(|(lo, hi)| rng.random_range(*lo..=*hi)).collect(),
        MotionKind::Brownian => {
            let sd = motion.step_variance.sqrt();
            pos.iter()
                .zip(bounds)
                .map(|(x, (lo, hi))| {
                    let step: f64 = rng.sample(StandardNormal);
                    let y = x + sd * step;
                    match motion.boundary {
                        Boundary::Clamp => y.clamp(*lo, *hi),
                        Boundary::Reflect => reflect(y, *lo, *hi),
                    }
                })
                .collect()
        }
    }
}

fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let w = hi - lo;
    let mut y = (x - lo).rem_euclid(2.0 * w);
    if y > w {
        y = 2.0 * w - y;
    }
    lo + y
}

/// `eta(pos) + e` with `e ~ N(0, noise_var)`.
pub fn observe<R: Rng + ?Sized>(eta: &Latent, pos: &[f64], noise_var: f64, rng: &mut R) -> f64 {
    let e: f64 = rng.sample(StandardNormal);
    eta.eval(pos) + noise_var.sqrt() * e
}

/// Random stream `stream` of the master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Trajectory stream of agent `i`.
pub fn trajectory_stream(i: usize) -> u64 {
    2 * i as u64 + 1
}

/// Observation-noise stream of agent `i`.
pub fn noise_stream(i: usize) -> u64 {
    2 * i as u64 + 2
}

/// Start positions: from the config, or uniform draws from each agent's
/// trajectory stream.
pub(crate) fn start_positions(cfg: &SimConfig, rngs: &mut [ChaCha8Rng]) -> Vec<Vec<f64>> {
    match &cfg.motion.start {
        Some(s) => s.clone(),
        None => rngs
            .iter_mut()
            .map(|rng| {
                cfg.domain
                    .lower
                    .iter()
                    .zip(&cfg.domain.upper)
                    .map(|(lo, hi)| rng.random_range(*lo..=*hi))
                    .collect()
            })
            .collect(),
    }
}

/// Per-agent metrics for one round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub t: usize,
    pub agent: usize,
    pub err_local: f64,
    pub err_fused: f64,
    pub err_central: f64,
    pub var_local_avg: f64,
    pub var_fused_avg: f64,
    pub dispersion: f64,
    /// Largest relative gap between summed consensus states and summed
    /// reference signals over the whole network.
    pub consensus_residual: f64,
    /// Size of the active common set.
    pub active: usize,
    /// Test points whose variance strictly decreased under fusion.
    pub improved: usize,
    /// Test points violating `0 < fused variance <= local variance`.
    pub variance_violations: usize,
    pub samples: usize,
}

/// Everything an agent produced in one round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgentRound {
    pub local_mean: Vec<f64>,
    pub local_var: Vec<f64>,
    pub global: GlobalPrediction,
    pub fused: FusedPrediction,
    pub dispersion: f64,
    pub samples: usize,
}

/// Centralized nearest-neighbor GPR over the pooled samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralPrediction {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub dispersion: f64,
}

/// View handed to a [`RoundObserver`] after each round.
#[derive(Debug, Clone, Copy)]
pub struct RoundSnapshot<'a> {
    pub t: usize,
    pub grid: &'a Grid,
    /// Latent function on the test grid.
    pub eta: &'a [f64],
    pub agents: &'a [AgentRound],
    pub states: &'a [ConsensusState],
    pub central: &'a CentralPrediction,
    pub metrics: &'a [MetricsRow],
    pub kernel: &'a Kernel,
    pub constants: &'a FusionConstants,
}

pub trait RoundObserver {
    fn on_round(&mut self, snap: &RoundSnapshot<'_>);
}

impl<F: FnMut(&RoundSnapshot<'_>)> RoundObserver for F {
    fn on_round(&mut self, snap: &RoundSnapshot<'_>) {
        self(snap)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimOutput {
    pub metrics: Vec<MetricsRow>,
    pub final_agents: Vec<AgentRound>,
    pub central: CentralPrediction,
    #[serde(skip)]
    pub grid: Grid,
    pub eta: Vec<f64>,
    pub sigma_f_sq: f64,
    pub constants: FusionConstants,
    /// Samples dropped because their input was already in the dataset.
    pub duplicates_skipped: usize,
}

impl SimOutput {
    pub fn rows_for(&self, agent: usize) -> impl Iterator<Item = &MetricsRow> {
        self.metrics.iter().filter(move |r| r.agent == agent)
    }
}

/// Fresh sample (if any) plus local mean and variance on the grid.
type LocalRound = (Option<(Vec<f64>, f64)>, Vec<f64>, Vec<f64>);

struct Agent {
    id: usize,
    pos: Vec<f64>,
    traj_rng: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    data: AgentDataset,
    tracker: NearestTracker,
    skipped: usize,
}

impl Agent {
    /// Moves (after the first round), samples and appends. Returns the new
    /// sample when it was accepted.
    fn sample(&mut self, t: usize, cfg: &SimConfig) -> Option<(Vec<f64>, f64)> {
        if t > 1 {
            self.pos = step_trajectory(&self.pos, &mut self.traj_rng, &cfg.motion, &cfg.domain);
        }
        let y = observe(
            &cfg.latent,
            &self.pos,
            self.data.noise_var(),
            &mut self.noise_rng,
        );
        match self.data.append(self.pos.clone(), y) {
            Ok(()) => {
                self.tracker.insert(&self.pos);
                Some((self.pos.clone(), y))
            }
            Err(_) => {
                self.skipped += 1;
                None
            }
        }
    }

    fn predict(&self, k: &Kernel, prior: f64) -> (Vec<f64>, Vec<f64>) {
        predict_grid(
            &self.tracker,
            self.data.outputs(),
            |_| self.data.noise_var(),
            k,
            prior,
        )
    }
}

fn predict_grid(
    tracker: &NearestTracker,
    outputs: &[f64],
    noise_of: impl Fn(usize) -> f64,
    k: &Kernel,
    prior: f64,
) -> (Vec<f64>, Vec<f64>) {
    let m = tracker.probes().len();
    let mut mean = Vec::with_capacity(m);
    let mut var = Vec::with_capacity(m);
    for p in 0..m {
        match tracker.nearest(p) {
            Some((idx, rho)) => {
                let (mu, v) = nn_posterior(k, rho, prior, prior, outputs[idx], noise_of(idx));
                mean.push(mu);
                var.push(v);
            }
            None => {
                mean.push(prior);
                var.push(k.kappa(0.0));
            }
        }
    }
    (mean, var)
}

fn mean_abs_err(pred: &[f64], truth: &[f64]) -> f64 {
    pred.iter()
        .zip(truth)
        .map(|(p, e)| (p - e).abs())
        .sum::<f64>()
        / truth.len() as f64
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// The prior variance and fusion constants a config runs with.
pub fn resolve_sigma_f(cfg: &SimConfig) -> Result<(Kernel, FusionConstants)> {
    let base = cfg.kernel.kernel()?;
    match cfg.kernel.sigma_f_mode {
        SigmaFMode::Fixed => Ok((
            base,
            FusionConstants::unchecked(base.sigma_f_sq, &cfg.noise),
        )),
        SigmaFMode::Selected => {
            let sel =
                select_sigma_f_distributed(&cfg.schedule, &cfg.noise, base.sigma_f_sq.max(1.0))?;
            let s = sel.agreed[0];
            Ok((
                base.with_sigma_f_sq(s),
                compute_fusion_constants(s, &cfg.noise)?,
            ))
        }
    }
}

pub fn run(cfg: &SimConfig) -> Result<SimOutput> {
    run_with_observer(cfg, &mut |_: &RoundSnapshot<'_>| {})
}

pub fn run_with_observer(cfg: &SimConfig, observer: &mut dyn RoundObserver) -> Result<SimOutput> {
    cfg.check()?;
    let report = cfg.schedule.validate();
    if !report.ok {
        let msgs: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::InvalidSchedule(msgs.join("; ")));
    }
    let (k, consts) = resolve_sigma_f(cfg)?;
    let grid = Grid::new(&cfg.domain, &cfg.grid)?;
    let eta: Vec<f64> = grid.points().iter().map(|z| cfg.latent.eval(z)).collect();
    let agg = grid.agg_index().to_vec();
    let n = cfg.agents;
    let dim = cfg.domain.dim();
    let prior = cfg.prior_mean;

    let mut traj: Vec<ChaCha8Rng> = (0..n)
        .map(|i| stream_rng(cfg.seed, trajectory_stream(i)))
        .collect();
    let starts = start_positions(cfg, &mut traj);
    let mut agents = Vec::with_capacity(n);
    for (i, (pos, traj_rng)) in starts.into_iter().zip(traj).enumerate() {
        agents.push(Agent {
            id: i,
            pos,
            traj_rng,
            noise_rng: stream_rng(cfg.seed, noise_stream(i)),
            data: AgentDataset::new(i, dim, cfg.noise.variances()[i])?,
            tracker: NearestTracker::new(grid.points().to_vec()),
            skipped: 0,
        });
    }

    let prior_signals =
        Signals::from_predictions(&vec![prior; agg.len()], &vec![k.kappa(0.0); agg.len()])?;
    let mut states: Vec<ConsensusState> = (0..n)
        .map(|_| init_state(agg.len(), k.sigma_f_sq, &prior_signals))
        .collect::<Result<_>>()?;

    let mut pooled = NearestTracker::new(grid.points().to_vec());
    let mut pooled_y: Vec<f64> = Vec::new();
    let mut pooled_noise: Vec<f64> = Vec::new();

    let mut metrics = Vec::with_capacity(cfg.rounds * n);
    let mut last_rounds: Vec<AgentRound> = Vec::new();
    let mut central = CentralPrediction {
        mean: Vec::new(),
        var: Vec::new(),
        dispersion: f64::INFINITY,
    };

    for t in 1..=cfg.rounds {
        let sampling = cfg.freeze_after.is_none_or(|f| t <= f);
        let locals: Vec<LocalRound> = agents
            .par_iter_mut()
            .map(|a| {
                let s = if sampling { a.sample(t, cfg) } else { None };
                let (m, v) = a.predict(&k, prior);
                (s, m, v)
            })
            .collect();

        for (i, (s, _, _)) in locals.iter().enumerate() {
            if let Some((z, y)) = s {
                pooled.insert(z);
                pooled_y.push(*y);
                pooled_noise.push(cfg.noise.variances()[i]);
            }
        }
        let (cm, cv) = predict_grid(&pooled, &pooled_y, |idx| pooled_noise[idx], &k, prior);
        central = CentralPrediction {
            mean: cm,
            var: cv,
            dispersion: pooled.dispersion().unwrap_or(f64::INFINITY),
        };

        let a_prev = cfg.schedule.at(t - 1);
        let next: Vec<ConsensusState> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (_, m, v) = &locals[i];
                let am: Vec<f64> = agg.iter().map(|&p| m[p]).collect();
                let av: Vec<f64> = agg.iter().map(|&p| v[p]).collect();
                let input = RoundInput {
                    neighbors: (0..n)
                        .filter(|&j| j != i && a_prev.get(i, j) != 0.0)
                        .map(|j| (a_prev.get(i, j), &states[j].vectors))
                        .collect(),
                    new_r: Signals::from_predictions(&am, &av)?,
                };
                fodac_step(&states[i], &input, a_prev.get(i, i))
            })
            .collect::<Result<_>>()?;
        states = next;
        let residual = sum_preservation_residual(&states);

        let rounds: Vec<AgentRound> = locals
            .into_par_iter()
            .zip(agents.par_iter())
            .zip(states.par_iter())
            .map(|(((_, m, v), a), st)| {
                let global = read_global(st)?;
                let fused = fuse(grid.points(), &agg, &m, &v, &global, &k, &consts, a.id)?;
                Ok(AgentRound {
                    local_mean: m,
                    local_var: v,
                    global,
                    fused,
                    dispersion: a.tracker.dispersion().unwrap_or(f64::INFINITY),
                    samples: a.data.len(),
                })
            })
            .collect::<Result<_>>()?;

        let err_central = mean_abs_err(&central.mean, &eta);
        let start = metrics.len();
        for (i, r) in rounds.iter().enumerate() {
            let violations = r
                .fused
                .var_tilde
                .iter()
                .zip(&r.local_var)
                .filter(|(f, l)| !(**f > 0.0 && f <= l))
                .count();
            metrics.push(MetricsRow {
                t,
                agent: i,
                err_local: mean_abs_err(&r.local_mean, &eta),
                err_fused: mean_abs_err(&r.fused.mu_tilde, &eta),
                err_central,
                var_local_avg: mean(&r.local_var),
                var_fused_avg: mean(&r.fused.var_tilde),
                dispersion: r.dispersion,
                consensus_residual: residual,
                active: r.fused.active_set.len(),
                improved: r.fused.improvements(&r.local_var),
                variance_violations: violations,
                samples: r.samples,
            });
        }
        observer.on_round(&RoundSnapshot {
            t,
            grid: &grid,
            eta: &eta,
            agents: &rounds,
            states: &states,
            central: &central,
            metrics: &metrics[start..],
            kernel: &k,
            constants: &consts,
        });
        last_rounds = rounds;
    }

    Ok(SimOutput {
        metrics,
        final_agents: last_rounds,
        central,
        grid,
        eta,
        sigma_f_sq: k.sigma_f_sq,
        constants: consts,
        duplicates_skipped: agents.iter().map(|a| a.skipped).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netgraph::GraphSchedule;

    fn small(seed: u64) -> SimConfig {
        let mut cfg = SimConfig::four_robot_default(seed);
        cfg.rounds = 12;
        cfg.grid.per_axis = 10;
        cfg
    }

    #[test]
    fn zero_variance_motion_stays_put() {
        let motion = MotionConfig {
            kind: MotionKind::Brownian,
            step_variance: 0.0,
            boundary: Boundary::Clamp,
            start: None,
        };
        let dom = SimConfig::four_robot_default(0).domain;
        let mut rng = stream_rng(1, 0);
        assert_eq!(
            step_trajectory(&[3.0, 4.0], &mut rng, &motion, &dom),
            vec![3.0, 4.0]
        );
    }

    #[test]
    fn clamp_and_reflect_stay_in_domain() {
        let dom = SimConfig::four_robot_default(0).domain;
        let mut motion = MotionConfig {
            kind: MotionKind::Brownian,
            step_variance: 1e6,
            boundary: Boundary::Clamp,
            start: None,
        };
        let mut rng = stream_rng(2, 0);
        let mut corner_hits = 0;
        for _ in 0..200 {
            let p = step_trajectory(&[0.0, 0.0], &mut rng, &motion, &dom);
            assert!(dom.contains(&p));
            corner_hits += (p == vec![0.0, 0.0]) as usize;
        }
        assert!(corner_hits > 0);
        motion.boundary = Boundary::Reflect;
        for _ in 0..200 {
            assert!(dom.contains(&step_trajectory(&[0.0, 0.0], &mut rng, &motion, &dom)));
        }
        assert_eq!(reflect(-1.0, 0.0, 10.0), 1.0);
        assert_eq!(reflect(12.0, 0.0, 10.0), 8.0);
        assert_eq!(reflect(21.0, 0.0, 10.0), 1.0);
    }

    #[test]
    fn trajectories_are_reproducible() {
        let cfg = SimConfig::four_robot_default(0);
        let walk = |seed| {
            let mut rng = stream_rng(seed, trajectory_stream(0));
            let mut p = vec![5.0, 5.0];
            for _ in 0..50 {
                p = step_trajectory(&p, &mut rng, &cfg.motion, &cfg.domain);
            }
            p
        };
        assert_eq!(walk(9), walk(9));
        assert_ne!(walk(9), walk(10));
    }

    #[test]
    fn noiseless_observation_is_exact() {
        let mut rng = stream_rng(3, 0);
        assert_eq!(observe(&Latent::SinCos, &[0.0, 0.0], 0.0, &mut rng), 1.0);
    }

    #[test]
    fn observation_mean_matches_latent() {
        let mut rng = stream_rng(4, 0);
        let n = 20_000;
        let sum: f64 = (0..n)
            .map(|_| observe(&Latent::SinCos, &[0.0, 0.0], 0.01, &mut rng))
            .sum();
        let m = sum / n as f64;
        assert!((m - 1.0).abs() < 3.0 * 0.1 / (n as f64).sqrt());
    }

    #[test]
    fn run_emits_one_row_per_agent_and_round() {
        let out = run(&small(1)).unwrap();
        assert_eq!(out.metrics.len(), 48);
        assert!(out
            .metrics
            .iter()
            .all(|r| r.err_local.is_finite() && r.dispersion.is_finite()));
        assert!(out.metrics.iter().all(|r| r.variance_violations == 0));
        assert!(out.metrics.iter().all(|r| r.consensus_residual < 1e-9));
        for r in out.metrics.iter().filter(|r| r.t == 12) {
            assert!(out.central.dispersion <= r.dispersion);
        }
    }

    #[test]
    fn single_agent_fusion_is_local() {
        let mut cfg = small(2);
        cfg.agents = 1;
        cfg.noise = crate::kernel::NoiseProfile::homogeneous(1, 0.01).unwrap();
        cfg.schedule = GraphSchedule::complete(1);
        let out = run(&cfg).unwrap();
        for r in &out.metrics {
            assert_eq!(r.err_fused, r.err_local);
            assert_eq!(r.var_fused_avg, r.var_local_avg);
        }
    }

    #[test]
    fn rejects_invalid_schedule() {
        let mut cfg = small(3);
        cfg.schedule = GraphSchedule::constant(crate::netgraph::Matrix::identity(4));
        assert!(matches!(run(&cfg), Err(Error::InvalidSchedule(_))));
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let cfg = small(5);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap();
        let a = one.install(|| run(&cfg)).unwrap();
        let b = four.install(|| run(&cfg)).unwrap();
        assert_eq!(a.metrics, b.metrics);
    }
}
