//! Nearest-neighbor GPR for one agent compared with the true function.

use radgpr::kernel::Kernel;
use radgpr::local_gpr::AgentDataset;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> radgpr::Result<()> {
    let eta = |z: &[f64]| z[0].sin() + z[1].cos();
    let k = Kernel::squared_exponential(1.0, 0.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut data = AgentDataset::new(0, 2, 0.01)?;
    for _ in 0..200 {
        let z = vec![rng.random_range(0.0..4.0), rng.random_range(0.0..4.0)];
        let y = eta(&z) + 0.1 * (rng.random::<f64>() - 0.5);
        data.append(z, y)?;
    }
    for z in [[1.0, 1.0], [2.5, 0.3], [3.9, 3.9], [6.0, 6.0]] {
        let p = data.predict(&k, &z, |_| 0.0)?;
        println!(
            "z={z:?} mean={:+.4} var={:.4} truth={:+.4} nearest={:?}",
            p.mean,
            p.variance,
            eta(&z),
            p.nearest
        );
    }
    Ok(())
}
