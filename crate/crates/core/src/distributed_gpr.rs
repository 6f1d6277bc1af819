//! Global predictions read off the consensus state, and the centralized
//! product-of-experts aggregate they track.

use serde::Serialize;

use crate::consensus::ConsensusState;
use crate::{Error, Result};

/// One agent's estimate of the network aggregate on the common points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalPrediction {
    pub mu_hat: Vec<f64>,
    pub var_hat: Vec<f64>,
    /// Tracked average of the local variances.
    pub var_ave: Vec<f64>,
}

/// `var_hat = 1/xi`, `mu_hat = var_hat * theta`, `var_ave = lambda`.
pub fn read_global(state: &ConsensusState) -> Result<GlobalPrediction> {
    let v = &state.vectors;
    if let Some((index, &value)) = v.xi.iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
        return Err(Error::DegenerateConsensus { index, value });
    }
    let var_hat: Vec<f64> = v.xi.iter().map(|x| 1.0 / x).collect();
    let mu_hat = var_hat.iter().zip(&v.theta).map(|(s, t)| s * t).collect();
    Ok(GlobalPrediction {
        mu_hat,
        var_hat,
        var_ave: v.lambda.clone(),
    })
}

/// Product-of-experts aggregate of `n` local `(mean, variance)` pairs:
/// the aggregate precision is the average precision and the mean is the
/// precision-weighted average.
pub fn poe_aggregate(local: &[(f64, f64)]) -> Result<(f64, f64)> {
    if local.is_empty() {
        return Err(Error::InvalidParameter {
            name: "local_predictions",
            reason: "need at least one expert".into(),
        });
    }
    if let Some((index, &(_, value))) = local.iter().enumerate().find(|(_, (_, v))| !(*v > 0.0)) {
        return Err(Error::NonPositiveVariance { index, value });
    }
    let n = local.len() as f64;
    let precision = local.iter().map(|(_, v)| 1.0 / v).sum::<f64>() / n;
    let var = 1.0 / precision;
    let weighted: f64 = local.iter().map(|(m, v)| m / v).sum();
    Ok((var / n * weighted, var))
}
