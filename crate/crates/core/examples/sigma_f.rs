//! Picks the prior variance for a noise profile, centrally and over the
//! network, and prints the fusion constants it implies.

use radgpr::kernel::{
    compute_fusion_constants, select_sigma_f, select_sigma_f_distributed, NoiseProfile,
};
use radgpr::netgraph::GraphSchedule;

fn main() -> radgpr::Result<()> {
    let noise = NoiseProfile::new(vec![0.5, 0.01, 0.01, 0.01])?;
    let central = select_sigma_f(&noise, 1.0)?;
    let net = select_sigma_f_distributed(&GraphSchedule::four_robot_alternating(), &noise, 1.0)?;
    println!("centralized sigma_f^2 = {central}");
    println!("per agent             = {:?}", net.per_agent);
    println!(
        "agreed after {} flood rounds: {:?}",
        net.flood_rounds, net.agreed
    );
    println!(
        "condition lhs {} <= rhs {}",
        net.condition.lhs, net.condition.rhs
    );

    let consts = compute_fusion_constants(net.agreed[0], &noise)?;
    for i in 0..noise.n_agents() {
        println!(
            "agent {i}: psi = {:.6}, gate c - psi = {:+.3e}",
            consts.psi[i],
            consts.gate(i)
        );
    }
    Ok(())
}
