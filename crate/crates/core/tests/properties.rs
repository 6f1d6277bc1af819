mod common;

use common::{brute_nearest, poe_var, sigma_f_inequality};
use proptest::prelude::*;
use radgpr::consensus::{fodac_step, init_state, sum_preservation_residual, RoundInput, Signals};
use radgpr::distributed_gpr::{poe_aggregate, GlobalPrediction};
use radgpr::fused_gpr::fuse;
use radgpr::kernel::{
    compute_fusion_constants, select_sigma_f, FusionConstants, Kernel, NoiseProfile,
};
use radgpr::local_gpr::{nn_posterior, AgentDataset, NearestTracker};
use radgpr::netgraph::Matrix;

fn kernel() -> impl Strategy<Value = Kernel> {
    (0.5f64..5.0, 0.05f64..5.0).prop_map(|(s, l)| Kernel::squared_exponential(s, l).unwrap())
}

/// Doubly stochastic matrix as a convex combination of permutations.
fn doubly_stochastic(n: usize) -> impl Strategy<Value = Matrix> {
    proptest::collection::vec(
        (
            Just(()).prop_perturb(move |_, mut rng| {
                let mut p: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    p.swap(i, rng.random_range(0..=i));
                }
                p
            }),
            0.05f64..1.0,
        ),
        1..4,
    )
    .prop_map(move |perms| {
        let total: f64 = perms.iter().map(|(_, w)| w).sum();
        let mut rows = vec![vec![0.0; n]; n];
        for (p, w) in &perms {
            for (i, &j) in p.iter().enumerate() {
                rows[i][j] += w / total;
            }
        }
        Matrix::from_rows(rows).unwrap()
    })
}

proptest! {
    #[test]
    fn variance_grows_with_distance(k in kernel(), noise in 1e-4f64..2.0, a in 0.0f64..5.0, b in 0.0f64..5.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (_, v_lo) = nn_posterior(&k, lo, 0.0, 0.0, 1.0, noise);
        let (_, v_hi) = nn_posterior(&k, hi, 0.0, 0.0, 1.0, noise);
        prop_assert!(v_lo <= v_hi);
        let s = k.sigma_f_sq;
        prop_assert!(s * noise / (s + noise) <= v_lo * (1.0 + 1e-12));
        prop_assert!(v_hi <= s);
    }

    #[test]
    fn tracker_agrees_with_linear_scan(
        pts in proptest::collection::vec((0i32..6, 0i32..6), 1..40),
        probes in proptest::collection::vec((0i32..6, 0i32..6), 1..10),
    ) {
        let mut uniq: Vec<Vec<f64>> = Vec::new();
        for (x, y) in pts {
            let p = vec![x as f64, y as f64];
            if !uniq.contains(&p) {
                uniq.push(p);
            }
        }
        let probes: Vec<Vec<f64>> = probes.into_iter().map(|(x, y)| vec![x as f64 + 0.5, y as f64]).collect();
        let mut tr = NearestTracker::new(probes.clone());
        let mut ds = AgentDataset::new(0, 2, 0.1).unwrap();
        for p in &uniq {
            tr.insert(p);
            ds.append(p.clone(), 0.0).unwrap();
        }
        for (i, p) in probes.iter().enumerate() {
            let (idx, _) = tr.nearest(i).unwrap();
            prop_assert_eq!(idx, brute_nearest(&uniq, p));
            prop_assert_eq!(idx, ds.nearest_index(p).unwrap().0);
        }
        prop_assert_eq!(tr.dispersion().unwrap(), ds.dispersion(&probes).unwrap());
    }

    #[test]
    fn fodac_preserves_sums(
        a in doubly_stochastic(4),
        signals in proptest::collection::vec(proptest::collection::vec((-2.0f64..2.0, 0.01f64..1.0), 4), 1..12),
    ) {
        let m = 3;
        let prior = Signals::from_predictions(&[0.0; 3], &[1.0; 3]).unwrap();
        let mut states: Vec<_> = (0..4).map(|_| init_state(m, 1.0, &prior).unwrap()).collect();
        prop_assert!(sum_preservation_residual(&states) < 1e-12);
        for round in &signals {
            let next: Vec<_> = (0..4).map(|i| {
                let (mu, var) = round[i];
                let input = RoundInput {
                    neighbors: (0..4).filter(|&j| j != i && a.get(i, j) != 0.0)
                        .map(|j| (a.get(i, j), &states[j].vectors)).collect(),
                    new_r: Signals::from_predictions(&[mu, -mu, 0.5 * mu], &[var, var * 0.5, 1.0]).unwrap(),
                };
                fodac_step(&states[i], &input, a.get(i, i)).unwrap()
            }).collect();
            states = next;
            for k in 0..m {
                let sx: f64 = states.iter().map(|st| st.vectors.xi[k]).sum();
                let sr: f64 = states.iter().map(|st| st.prev.xi[k]).sum();
                prop_assert!((sx - sr).abs() <= 1e-9 * sr.abs());
                let lx: f64 = states.iter().map(|st| st.vectors.lambda[k]).sum();
                let lr: f64 = states.iter().map(|st| st.prev.lambda[k]).sum();
                prop_assert!((lx - lr).abs() <= 1e-9 * lr.abs());
                // theta sums can cancel to near zero, so scale by the absolute sum
                let tx: f64 = states.iter().map(|st| st.vectors.theta[k]).sum();
                let tr: f64 = states.iter().map(|st| st.prev.theta[k]).sum();
                let scale: f64 = states.iter().map(|st| st.prev.theta[k].abs()).sum();
                prop_assert!((tx - tr).abs() <= 1e-9 * scale.max(1e-300));
            }
        }
    }

    /// The aggregate variance is a harmonic mean: it lies between the
    /// smallest local variance and the arithmetic mean tracked by lambda.
    #[test]
    fn poe_variance_is_below_the_average(items in proptest::collection::vec((-3.0f64..3.0, 1e-3f64..5.0), 1..10)) {
        let (mu, var) = poe_aggregate(&items).unwrap();
        let vars: Vec<f64> = items.iter().map(|x| x.1).collect();
        let mean_var = vars.iter().sum::<f64>() / vars.len() as f64;
        let min_var = vars.iter().copied().fold(f64::INFINITY, f64::min);
        let max_var = vars.iter().copied().fold(0.0, f64::max);
        prop_assert!(var <= mean_var * (1.0 + 1e-12));
        prop_assert!(min_var * (1.0 - 1e-12) <= var && var <= max_var * (1.0 + 1e-12));
        prop_assert!((var - poe_var(&vars)).abs() <= 1e-12 * var);
        let lo = items.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
        let hi = items.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-12 <= mu && mu <= hi + 1e-12);
    }

    #[test]
    fn fused_variance_is_positive_and_never_larger(
        noise in proptest::collection::vec(1e-3f64..1.0, 2..6),
        l2 in 0.05f64..3.0,
        agent_pick in 0usize..6,
        local in proptest::collection::vec((-2.0f64..2.0, 0.01f64..1.0), 12),
        global in proptest::collection::vec((-2.0f64..2.0, 0.0f64..1.2, 0.0f64..1.2), 4),
    ) {
        let profile = NoiseProfile::new(noise.clone()).unwrap();
        let agent = agent_pick % noise.len();
        let sf2 = select_sigma_f(&profile, 1.0);
        prop_assume!(sf2.is_ok());
        let sf2 = sf2.unwrap();
        let k = Kernel::squared_exponential(sf2, l2).unwrap();
        let consts = compute_fusion_constants(sf2, &profile).unwrap();
        let points: Vec<Vec<f64>> = (0..12).map(|i| vec![(i % 4) as f64 * 0.3, (i / 4) as f64 * 0.3]).collect();
        let agg = [0usize, 3, 8, 11];
        let mean: Vec<f64> = local.iter().map(|x| x.0).collect();
        let var: Vec<f64> = local.iter().map(|x| x.1 * sf2).collect();
        let g = GlobalPrediction {
            mu_hat: global.iter().map(|x| x.0).collect(),
            var_hat: global.iter().zip(&agg).map(|(x, &p)| (x.1 * var[p]).max(1e-6)).collect(),
            var_ave: global.iter().zip(&agg).map(|(x, &p)| x.2 * var[p]).collect(),
        };
        let f = fuse(&points, &agg, &mean, &var, &g, &k, &consts, agent).unwrap();
        for (ft, lt) in f.var_tilde.iter().zip(&var) {
            prop_assert!(*ft > 0.0);
            prop_assert!(ft <= lt);
        }
        if f.active_set.is_empty() {
            prop_assert_eq!(&f.mu_tilde, &mean);
            prop_assert_eq!(&f.var_tilde, &var);
        }
    }

    #[test]
    fn selected_sigma_f_satisfies_the_condition(noise in proptest::collection::vec(1e-3f64..2.0, 1..7)) {
        let profile = NoiseProfile::new(noise.clone()).unwrap();
        if let Ok(sf2) = select_sigma_f(&profile, 1.0) {
            prop_assert!(sigma_f_inequality(sf2, &noise).holds);
        }
    }

    #[test]
    fn homogeneous_profiles_give_c_equal_psi(n in 1usize..9, v in 1e-4f64..10.0, sf2 in 0.1f64..100.0) {
        let fc = FusionConstants::unchecked(sf2, &NoiseProfile::homogeneous(n, v).unwrap());
        for p in &fc.psi {
            prop_assert_eq!(*p, fc.c);
        }
    }
}
