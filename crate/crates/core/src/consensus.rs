//! First-order dynamic average consensus over the common point set.
//!
//! Each agent keeps three vectors indexed by the common points:
//! `theta` tracks the network average of `mean / var`, `xi` the average of
//! `1 / var` and `lambda` the average of `var`. One round is
//!
//! ```text
//! x_i(t) = x_i(t-1) + sum_{j != i} a_ij(t-1) (x_j(t-1) - x_i(t-1)) + r_i(t) - r_i(t-1)
//! ```
//!
//! With a column-stochastic `A` the network sum of each state equals the sum
//! of the current reference signals at every round.

use serde::Serialize;

use crate::{Error, Result};

/// Tolerance on the weight row handed to [`fodac_step`].
pub const WEIGHT_ROW_TOL: f64 = 1e-9;

/// Reference signals on the common points, built from local predictions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Signals {
    pub theta: Vec<f64>,
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl Signals {
    /// `r_theta = mean / var`, `r_xi = 1 / var`, `r_lambda = var`.
    pub fn from_predictions(means: &[f64], variances: &[f64]) -> Result<Self> {
        if means.len() != variances.len() {
            return Err(Error::LengthMismatch {
                what: "predictions",
                expected: means.len(),
                got: variances.len(),
            });
        }
        if let Some((index, &value)) = variances.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
            return Err(Error::NonPositiveVariance { index, value });
        }
        Ok(Self {
            theta: means.iter().zip(variances).map(|(m, v)| m / v).collect(),
            xi: variances.iter().map(|v| 1.0 / v).collect(),
            lambda: variances.to_vec(),
        })
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    fn check_len(&self, expected: usize) -> Result<()> {
        for v in [&self.theta, &self.xi, &self.lambda] {
            if v.len() != expected {
                return Err(Error::LengthMismatch {
                    what: "reference signal",
                    expected,
                    got: v.len(),
                });
            }
        }
        Ok(())
    }
}

/// The vectors an agent broadcasts each round.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusVectors {
    pub theta: Vec<f64>,
    pub xi: Vec<f64>,
    pub lambda: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsensusState {
    pub vectors: ConsensusVectors,
    /// Reference signals of the previous round.
    pub prev: Signals,
}

impl ConsensusState {
    pub fn len(&self) -> usize {
        self.vectors.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.xi.is_empty()
    }
}

/// Messages received in one round: `(a_ij(t-1), state of j at t-1)` for
/// every in-neighbour `j`, plus the agent's fresh reference signals.
#[derive(Debug, Clone)]
pub struct RoundInput<'a> {
    pub neighbors: Vec<(f64, &'a ConsensusVectors)>,
    pub new_r: Signals,
}

/// State before the first round.
///
/// `xi` starts at zero with a zero signal one step before the start, and
/// the start signal `1/sigma_f^2` is injected immediately, so
/// `xi(0) = 1/sigma_f^2`. `theta` and `lambda` start at their reference
/// signals computed from `first`, the prior-only predictions.
pub fn init_state(z_agg_size: usize, sigma_f_sq: f64, first: &Signals) -> Result<ConsensusState> {
    if !(sigma_f_sq > 0.0 && sigma_f_sq.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "sigma_f_sq",
            reason: format!("must be positive and finite, got {sigma_f_sq}"),
        });
    }
    first.check_len(z_agg_size)?;
    let r_xi0 = vec![1.0 / sigma_f_sq; z_agg_size];
    let mut xi = vec![0.0; z_agg_size];
    // r_xi(0) - r_xi(-1) with r_xi(-1) = 0
    for (x, r) in xi.iter_mut().zip(&r_xi0) {
        *x += r;
    }
    Ok(ConsensusState {
        vectors: ConsensusVectors {
            theta: first.theta.clone(),
            xi,
            lambda: first.lambda.clone(),
        },
        prev: Signals {
            theta: first.theta.clone(),
            xi: r_xi0,
            lambda: first.lambda.clone(),
        },
    })
}

/// One synchronous round for one agent. `self_weight` is `a_ii(t-1)`.
pub fn fodac_step(
    state: &ConsensusState,
    input: &RoundInput<'_>,
    self_weight: f64,
) -> Result<ConsensusState> {
    let m = state.len();
    input.new_r.check_len(m)?;
    let sum = self_weight + input.neighbors.iter().map(|(w, _)| w).sum::<f64>();
    if (sum - 1.0).abs() > WEIGHT_ROW_TOL {
        return Err(Error::WeightRowNotStochastic { sum });
    }
    for (_, nb) in &input.neighbors {
        for v in [&nb.theta, &nb.xi, &nb.lambda] {
            if v.len() != m {
                return Err(Error::LengthMismatch {
                    what: "neighbor state",
                    expected: m,
                    got: v.len(),
                });
            }
        }
    }

    let mix = |own: &[f64], pick: fn(&ConsensusVectors) -> &[f64], r_new: &[f64], r_old: &[f64]| {
        let mut out = own.to_vec();
        for (w, nb) in &input.neighbors {
            for (o, (x_j, x_i)) in out.iter_mut().zip(pick(nb).iter().zip(own)) {
                *o += w * (x_j - x_i);
            }
        }
        for (o, (rn, ro)) in out.iter_mut().zip(r_new.iter().zip(r_old)) {
            *o += rn - ro;
        }
        out
    };

    let v = &state.vectors;
    let r = &input.new_r;
    Ok(ConsensusState {
        vectors: ConsensusVectors {
            theta: mix(&v.theta, |c| &c.theta, &r.theta, &state.prev.theta),
            xi: mix(&v.xi, |c| &c.xi, &r.xi, &state.prev.xi),
            lambda: mix(&v.lambda, |c| &c.lambda, &r.lambda, &state.prev.lambda),
        },
        prev: r.clone(),
    })
}

/// Largest relative gap `|sum_i x_i - sum_i r_i| / |sum_i r_i|` over the
/// common points and the three tracked quantities.
pub fn sum_preservation_residual(states: &[ConsensusState]) -> f64 {
    if states.is_empty() {
        return 0.0;
    }
    let m = states[0].len();
    let mut worst: f64 = 0.0;
    type Pick = fn(&ConsensusState) -> (&[f64], &[f64]);
    let picks: [Pick; 3] = [
        |s| (&s.vectors.theta, &s.prev.theta),
        |s| (&s.vectors.xi, &s.prev.xi),
        |s| (&s.vectors.lambda, &s.prev.lambda),
    ];
    for pick in picks {
        for k in 0..m {
            let (mut sx, mut sr) = (0.0, 0.0);
            for s in states {
                let (x, r) = pick(s);
                sx += x[k];
                sr += r[k];
            }
            let scale = sr.abs().max(f64::MIN_POSITIVE);
            worst = worst.max((sx - sr).abs() / scale);
        }
    }
    worst
}

/// Upper envelope `2 sigma_f^4 (1 - zeta)^(t/(nb-1) - 1) delta` for the
/// distance between tracked and aggregated variances when the signals have
/// stopped changing. `t` counts rounds since the signals froze, `delta` is
/// the spread of `xi` across agents at the first such round.
pub fn tracking_envelope(
    sigma_f_sq: f64,
    zeta: f64,
    n: usize,
    b: usize,
    t: usize,
    delta: f64,
) -> f64 {
    let steps = (n * b).saturating_sub(1).max(1) as f64;
    2.0 * sigma_f_sq * sigma_f_sq * (1.0 - zeta).powf(t as f64 / steps - 1.0) * delta
}

/// Spread `max_i xi_i - min_i xi_i`, maximised over the common points.
pub fn xi_spread(states: &[ConsensusState]) -> f64 {
    if states.is_empty() {
        return 0.0;
    }
    (0..states[0].len())
        .map(|k| {
            let (lo, hi) = states
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    (lo.min(s.vectors.xi[k]), hi.max(s.vectors.xi[k]))
                });
            hi - lo
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prior_signals(m: usize, sigma_f_sq: f64) -> Signals {
        Signals::from_predictions(&vec![0.0; m], &vec![sigma_f_sq; m]).unwrap()
    }

    #[test]
    fn init_prior_only() {
        let s = init_state(3, 1.0, &prior_signals(3, 1.0)).unwrap();
        assert_eq!(s.vectors.xi, vec![1.0; 3]);
        assert_eq!(s.vectors.theta, vec![0.0; 3]);
        assert_eq!(s.vectors.lambda, vec![1.0; 3]);
        assert_eq!(s.prev.xi, vec![1.0; 3]);

        let a = init_state(2, 2.0, &prior_signals(2, 2.0)).unwrap();
        let b = init_state(2, 2.0, &prior_signals(2, 2.0)).unwrap();
        assert_eq!(a, b);

        let e = init_state(0, 1.0, &prior_signals(0, 1.0)).unwrap();
        assert!(e.is_empty());
        assert!(init_state(1, 0.0, &prior_signals(1, 1.0)).is_err());
        assert!(init_state(2, 1.0, &prior_signals(1, 1.0)).is_err());
    }

    #[test]
    fn one_step_averaging() {
        let mk = |theta: f64| ConsensusState {
            vectors: ConsensusVectors {
                theta: vec![theta],
                xi: vec![1.0],
                lambda: vec![1.0],
            },
            prev: Signals {
                theta: vec![theta],
                xi: vec![1.0],
                lambda: vec![1.0],
            },
        };
        let s0 = mk(0.0);
        let s1 = mk(2.0);
        let in0 = RoundInput {
            neighbors: vec![(0.5, &s1.vectors)],
            new_r: s0.prev.clone(),
        };
        let in1 = RoundInput {
            neighbors: vec![(0.5, &s0.vectors)],
            new_r: s1.prev.clone(),
        };
        let n0 = fodac_step(&s0, &in0, 0.5).unwrap();
        let n1 = fodac_step(&s1, &in1, 0.5).unwrap();
        assert_eq!(n0.vectors.theta, vec![1.0]);
        assert_eq!(n1.vectors.theta, vec![1.0]);
    }

    #[test]
    fn single_agent_tracks_its_signal() {
        let mut s = init_state(2, 1.0, &prior_signals(2, 1.0)).unwrap();
        for k in 1..20 {
            let var = 1.0 / (1.0 + k as f64);
            let r = Signals::from_predictions(&[k as f64, -1.0], &[var, var]).unwrap();
            s = fodac_step(
                &s,
                &RoundInput {
                    neighbors: vec![],
                    new_r: r.clone(),
                },
                1.0,
            )
            .unwrap();
            for (x, y) in s.vectors.xi.iter().zip(&r.xi) {
                assert!((x - y).abs() < 1e-12);
            }
            for (x, y) in s.vectors.theta.iter().zip(&r.theta) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_rows_and_lengths() {
        let s = init_state(2, 1.0, &prior_signals(2, 1.0)).unwrap();
        let r = prior_signals(2, 1.0);
        let bad = RoundInput {
            neighbors: vec![(0.3, &s.vectors)],
            new_r: r.clone(),
        };
        assert!(matches!(
            fodac_step(&s, &bad, 0.5),
            Err(Error::WeightRowNotStochastic { .. })
        ));
        let short = RoundInput {
            neighbors: vec![],
            new_r: prior_signals(1, 1.0),
        };
        assert!(matches!(
            fodac_step(&s, &short, 1.0),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(Signals::from_predictions(&[0.0], &[0.0]).is_err());
    }

    #[test]
    fn envelope_shape() {
        let e1 = tracking_envelope(1.0, 0.5, 2, 1, 1, 1.0);
        assert_eq!(e1, 2.0);
        let e3 = tracking_envelope(1.0, 0.5, 2, 1, 3, 1.0);
        assert_eq!(e3, 0.5);
    }
}
