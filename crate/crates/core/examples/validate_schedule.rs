//! Checks a few communication schedules against the network requirements.

use radgpr::netgraph::{GraphSchedule, Matrix};

fn report(name: &str, s: &GraphSchedule) {
    let r = s.validate();
    println!(
        "{name}: ok={} period={} alpha={} b={:?} zeta={:?}",
        r.ok, r.period, r.alpha, r.b, r.zeta
    );
    for v in &r.violations {
        println!("  {v}");
    }
}

fn main() -> radgpr::Result<()> {
    report("ring/pairing", &GraphSchedule::four_robot_alternating());
    report("complete", &GraphSchedule::complete(5));
    report("identity", &GraphSchedule::constant(Matrix::identity(3)));
    let lopsided = Matrix::from_rows(vec![vec![0.5, 0.5], vec![0.0, 1.0]])?;
    report("lopsided", &GraphSchedule::constant(lopsided));
    Ok(())
}
