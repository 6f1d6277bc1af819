//! Monte Carlo check of the probabilistic error bound for local prediction,
//! together with the Lipschitz estimate it relies on.

use radgpr::kernel::Kernel;
use radgpr::sim::{
    check_error_probability_bound, estimate_lipschitz, sample_geometry, ChebyshevSetup, Grid,
    SimConfig,
};

fn main() -> radgpr::Result<()> {
    let mut cfg = SimConfig::four_robot_default(5);
    cfg.rounds = 60;
    cfg.grid.per_axis = 20;
    let grid = Grid::new(&cfg.domain, &cfg.grid)?;
    let latent = cfg.latent.clone();
    let lip = estimate_lipschitz(|z| latent.eval(z), &grid)?;
    println!("Lipschitz estimate {:.4}", lip.ell_eta);

    let setup = ChebyshevSetup {
        kernel: Kernel::squared_exponential(1.0, 0.5)?,
        noise: cfg.noise.clone(),
        latent: cfg.latent.clone(),
        grid,
        geometry: sample_geometry(&cfg)?,
    };
    for eps in [0.15, 0.3, 0.6] {
        let r = check_error_probability_bound(&setup, eps, 200, 11)?;
        println!(
            "epsilon {eps}: violation rate {:.4} vs bound {:.4} (+{:.4}) over {} checks -> {}",
            r.rate,
            r.chebyshev_bound,
            r.margin,
            r.samples,
            if r.passed { "ok" } else { "exceeded" }
        );
    }
    Ok(())
}
