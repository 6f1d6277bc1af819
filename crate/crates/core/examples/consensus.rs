//! Dynamic average consensus on a lazy ring: every agent tracks the
//! product-of-experts aggregate of signals that keep changing.

use radgpr::consensus::{fodac_step, init_state, xi_spread, RoundInput, Signals};
use radgpr::distributed_gpr::{poe_aggregate, read_global};
use radgpr::netgraph::{GraphSchedule, Matrix};

fn main() -> radgpr::Result<()> {
    let n = 5;
    let mut rows = vec![vec![0.0; n]; n];
    for (i, row) in rows.iter_mut().enumerate() {
        row[i] = 0.6;
        row[(i + 1) % n] = 0.2;
        row[(i + n - 1) % n] = 0.2;
    }
    let graphs = GraphSchedule::constant(Matrix::from_rows(rows)?);
    let signal = |i: usize, t: usize| {
        let mean = (i as f64) + (t as f64 * 0.05).sin();
        let var = 0.1 + 0.05 * i as f64;
        (mean, var)
    };

    let prior = Signals::from_predictions(&[0.0], &[1.0])?;
    let mut states: Vec<_> = (0..n)
        .map(|_| init_state(1, 1.0, &prior))
        .collect::<Result<_, _>>()?;
    for t in 1..=60 {
        let a = graphs.at(t - 1);
        let next = (0..n)
            .map(|i| {
                let (m, v) = signal(i, t);
                let input = RoundInput {
                    neighbors: (0..n)
                        .filter(|&j| j != i && a.get(i, j) > 0.0)
                        .map(|j| (a.get(i, j), &states[j].vectors))
                        .collect(),
                    new_r: Signals::from_predictions(&[m], &[v])?,
                };
                fodac_step(&states[i], &input, a.get(i, i))
            })
            .collect::<Result<Vec<_>, _>>()?;
        states = next;
        if t % 10 == 0 {
            let truth: Vec<_> = (0..n).map(|i| signal(i, t)).collect();
            let (mu, var) = poe_aggregate(&truth)?;
            let g = read_global(&states[0])?;
            println!(
                "t={t:2} agent0 mu={:+.5} var={:.5}  exact mu={mu:+.5} var={var:.5}  xi spread={:.2e}",
                g.mu_hat[0],
                g.var_hat[0],
                xi_spread(&states)
            );
        }
    }
    Ok(())
}
