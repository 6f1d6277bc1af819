//! One fusion step for a noisy agent next to three accurate ones. The
//! selected prior variance is large here, so the gains are small but strict.

use radgpr::distributed_gpr::GlobalPrediction;
use radgpr::fused_gpr::fuse;
use radgpr::kernel::{compute_fusion_constants, select_sigma_f, Kernel, NoiseProfile};

fn main() -> radgpr::Result<()> {
    let noise = NoiseProfile::new(vec![0.5, 0.01, 0.01, 0.01])?;
    let sf2 = select_sigma_f(&noise, 1.0)?;
    let k = Kernel::squared_exponential(sf2, 0.5)?;
    let consts = compute_fusion_constants(sf2, &noise)?;

    // test points on a line; every other one is shared by the network
    let z: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64 * 0.25, 0.0]).collect();
    let agg = [0, 2, 4, 6, 8];
    let local_mean = vec![0.3; z.len()];
    let local_var = vec![0.6 * sf2; z.len()];
    let global = GlobalPrediction {
        mu_hat: vec![0.1; agg.len()],
        var_hat: vec![0.02 * sf2; agg.len()],
        var_ave: vec![0.2 * sf2; agg.len()],
    };

    let f = fuse(&z, &agg, &local_mean, &local_var, &global, &k, &consts, 0)?;
    println!("active common points: {:?}", f.active_set);
    for (i, p) in z.iter().enumerate() {
        println!(
            "z={:.2} mean {:.6} -> {:.6}  variance {:.4} reduced by {:.3e}",
            p[0],
            local_mean[i],
            f.mu_tilde[i],
            local_var[i],
            local_var[i] - f.var_tilde[i]
        );
    }
    println!(
        "{} of {} points improved",
        f.improvements(&local_var),
        z.len()
    );
    Ok(())
}
