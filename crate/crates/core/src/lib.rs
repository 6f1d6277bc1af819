//! Resource-aware distributed Gaussian process regression (RaDGPR).
//!
//! A network of agents, connected by a time-varying balanced communication
//! graph, learns a common latent function from streaming noisy samples.
//! Every round each agent
//!
//! 1. appends its new sample and runs nearest-neighbor GPR on the test set
//!    ([`local_gpr`]),
//! 2. tracks the network-wide product-of-experts aggregate on a sparse common
//!    subset with first-order dynamic average consensus ([`consensus`],
//!    [`distributed_gpr`]),
//! 3. fuses the global estimate back into its local prediction
//!    ([`fused_gpr`]).
//!
//! Graph schedules are validated by [`netgraph`], kernel hyperparameters and
//! the fusion constants live in [`kernel`], and [`sim`] drives complete
//! multi-agent experiments. [`cli`] wraps the experiment harness behind a
//! TOML configuration file.
//!
//! The `examples/` directory of this crate holds one runnable program per
//! capability.

// `!(x > 0.0)` is how NaN gets rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod consensus;
pub mod distributed_gpr;
mod error;
pub mod fused_gpr;
pub mod kernel;
pub mod local_gpr;
pub mod netgraph;
pub mod sim;

pub use error::{Error, Result};

/// Euclidean distance between two points of equal dimension.
///
/// Callers are expected to have checked dimensions; extra coordinates of the
/// longer slice are ignored.
#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
