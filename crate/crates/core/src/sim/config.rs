use serde::{Deserialize, Serialize};

use crate::kernel::{Kernel, KernelForm, NoiseProfile};
use crate::netgraph::GraphSchedule;
use crate::{Error, Result};

/// Experiment description, usually read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub agents: usize,
    /// Number of rounds `T`.
    pub rounds: usize,
    pub seed: u64,
    /// Constant prior mean of the latent function.
    #[serde(default)]
    pub prior_mean: f64,
    pub domain: Domain,
    #[serde(default)]
    pub latent: Latent,
    pub kernel: KernelConfig,
    pub noise: NoiseProfile,
    pub grid: GridConfig,
    pub motion: MotionConfig,
    pub schedule: GraphSchedule,
    /// Agents stop sampling after this round; consensus keeps running.
    #[serde(default)]
    pub freeze_after: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Domain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Domain {
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.dim()
            && z.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (lo, hi))| *lo <= *x && *x <= *hi)
    }
}

/// Latent function `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Latent {
    /// `sin(z_1) + cos(z_2)`.
    #[default]
    SinCos,
    Constant {
        value: f64,
    },
    /// `w . z`.
    Linear {
        weights: Vec<f64>,
    },
}

impl Latent {
    pub fn eval(&self, z: &[f64]) -> f64 {
        match self {
            Latent::SinCos => z[0].sin() + z[1].cos(),
            Latent::Constant { value } => *value,
            Latent::Linear { weights } => weights.iter().zip(z).map(|(w, x)| w * x).sum(),
        }
    }

    fn check(&self, dim: usize) -> Result<()> {
        match self {
            Latent::SinCos if dim != 2 => Err(Error::Config(format!(
                "sin-cos latent needs a 2-d domain, got {dim}"
            ))),
            Latent::Linear { weights } if weights.len() != dim => Err(Error::Config(format!(
                "linear latent has {} weights for a {dim}-d domain",
                weights.len()
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaFMode {
    /// Use `kernel.sigma_f_sq` as given.
    #[default]
    Fixed,
    /// Run the distributed selection starting from `max(1, kernel.sigma_f_sq)`.
    Selected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    #[serde(default)]
    pub form: KernelForm,
    pub sigma_f_sq: f64,
    pub lengthscale_sq: f64,
    #[serde(default)]
    pub sigma_f_mode: SigmaFMode,
}

impl KernelConfig {
    pub fn kernel(&self) -> Result<Kernel> {
        let k = Kernel {
            form: self.form,
            sigma_f_sq: self.sigma_f_sq,
            lengthscale_sq: self.lengthscale_sq,
        };
        k.check()?;
        Ok(k)
    }
}

/// Test grid with `per_axis` points per axis (endpoints included); the common
/// points keep every `agg_stride`-th index along each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub per_axis: usize,
    pub agg_stride: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MotionKind {
    /// Gaussian increments with covariance `step_variance * I`.
    #[default]
    Brownian,
    /// Independent uniform positions in the domain every round.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    #[default]
    Clamp,
    Reflect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionConfig {
    #[serde(default)]
    pub kind: MotionKind,
    #[serde(default = "one")]
    pub step_variance: f64,
    #[serde(default)]
    pub boundary: Boundary,
    /// Start positions, one per agent; uniform in the domain when absent.
    #[serde(default)]
    pub start: Option<Vec<Vec<f64>>>,
}

fn one() -> f64 {
    1.0
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Structural consistency. The schedule's network assumptions are checked
    /// separately by [`GraphSchedule::validate`].
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.agents == 0 {
            return bad("agents must be at least 1".into());
        }
        if self.rounds == 0 {
            return bad("rounds must be at least 1".into());
        }
        if self.noise.n_agents() != self.agents {
            return bad(format!(
                "{} noise variances for {} agents",
                self.noise.n_agents(),
                self.agents
            ));
        }
        if self.schedule.n_agents() != self.agents {
            return bad(format!(
                "schedule is for {} agents, config has {}",
                self.schedule.n_agents(),
                self.agents
            ));
        }
        let d = self.domain.dim();
        if d == 0 || self.domain.upper.len() != d {
            return bad("domain bounds must be non-empty and of equal length".into());
        }
        for (lo, hi) in self.domain.lower.iter().zip(&self.domain.upper) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("domain interval [{lo}, {hi}] is not a finite box"));
            }
        }
        self.latent.check(d)?;
        self.kernel.kernel()?;
        if !self.prior_mean.is_finite() {
            return bad("prior_mean must be finite".into());
        }
        if self.grid.per_axis < 2 || self.grid.agg_stride == 0 {
            return bad("grid needs per_axis >= 2 and agg_stride >= 1".into());
        }
        if !(self.motion.step_variance >= 0.0 && self.motion.step_variance.is_finite()) {
            return bad("motion.step_variance must be finite and non-negative".into());
        }
        if let Some(start) = &self.motion.start {
            if start.len() != self.agents {
                return bad(format!(
                    "{} start positions for {} agents",
                    start.len(),
                    self.agents
                ));
            }
            if let Some(p) = start.iter().find(|p| !self.domain.contains(p)) {
                return bad(format!("start position {p:?} lies outside the domain"));
            }
        }
        Ok(())
    }

    /// Four agents on `[0, 10]^2`, a 40x40 test grid with every other point
    /// common, unit Brownian steps, noise variance 0.01, the kernel
    /// `exp(-2 |z - z'|^2)` and the alternating ring/pairing schedule.
    pub fn four_robot_default(seed: u64) -> Self {
        SimConfig {
            agents: 4,
            rounds: 100,
            seed,
            prior_mean: 0.0,
            domain: Domain {
                lower: vec![0.0, 0.0],
                upper: vec![10.0, 10.0],
            },
            latent: Latent::SinCos,
            kernel: KernelConfig {
                form: KernelForm::SquaredExponential,
                sigma_f_sq: 1.0,
                lengthscale_sq: 0.5,
                sigma_f_mode: SigmaFMode::Fixed,
            },
            noise: NoiseProfile::homogeneous(4, 0.01).expect("positive variance"),
            grid: GridConfig {
                per_axis: 40,
                agg_stride: 2,
            },
            motion: MotionConfig {
                kind: MotionKind::Brownian,
                step_variance: 1.0,
                boundary: Boundary::Clamp,
                start: None,
            },
            schedule: GraphSchedule::four_robot_alternating(),
            freeze_after: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = SimConfig::four_robot_default(7);
        cfg.check().unwrap();
        let text = cfg.to_toml().unwrap();
        assert_eq!(SimConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_inconsistent_configs() {
        let mut cfg = SimConfig::four_robot_default(0);
        cfg.agents = 3;
        assert!(cfg.check().is_err());

        let mut cfg = SimConfig::four_robot_default(0);
        cfg.rounds = 0;
        assert!(cfg.check().is_err());

        let mut cfg = SimConfig::four_robot_default(0);
        cfg.motion.start = Some(vec![vec![11.0, 0.0]; 4]);
        assert!(cfg.check().is_err());

        assert!(SimConfig::from_toml("agents = 4\nbogus = 1").is_err());
    }

    #[test]
    fn latent_functions() {
        assert_eq!(Latent::SinCos.eval(&[0.0, 0.0]), 1.0);
        assert_eq!(Latent::Constant { value: 2.5 }.eval(&[3.0, 1.0]), 2.5);
        let lin = Latent::Linear {
            weights: vec![1.0, 0.0],
        };
        assert_eq!(lin.eval(&[3.0, 1.0]), 3.0);
    }
}
