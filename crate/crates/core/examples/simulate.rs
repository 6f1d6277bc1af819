//! Full four-robot run with a per-round progress line.
//!
//! `cargo run --release --example simulate -- [rounds]`

use radgpr::sim::{self, RoundSnapshot, SimConfig};

fn main() -> radgpr::Result<()> {
    let mut cfg = SimConfig::four_robot_default(1);
    if let Some(r) = std::env::args().nth(1) {
        cfg.rounds = r.parse().expect("rounds must be an integer");
    }
    let mut progress = |s: &RoundSnapshot<'_>| {
        if s.t.is_multiple_of(10) || s.t == 1 {
            let m = &s.metrics[0];
            println!(
                "t={:3} agent0 err local {:.4} fused {:.4} central {:.4} dispersion {:.3}",
                s.t, m.err_local, m.err_fused, m.err_central, m.dispersion
            );
        }
    };
    let out = sim::run_with_observer(&cfg, &mut progress)?;
    for i in 0..cfg.agents {
        let last = out.rows_for(i).last().expect("at least one round");
        println!(
            "agent {i}: {} samples, mean local variance {:.4}, fused {:.4}",
            last.samples, last.var_local_avg, last.var_fused_avg
        );
    }
    println!("duplicates skipped: {}", out.duplicates_skipped);
    Ok(())
}
