mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use bsmrmr::dist::std_normal;
use bsmrmr::gibbs::{beta_parameters, edge_inclusion_prob};
use bsmrmr::synth::{generate_dataset, SimulationScenario};
use bsmrmr::{
    run_chain, FixedParameters, GroupStructure, Hyperparameters, MixedResponseDataset, ModelState, RngStream, Sampler,
    SpdMatrix,
};
use common::dataset;

fn state_strategy() -> impl Strategy<Value = (u64, Vec<f64>, Vec<f64>, Vec<f64>, f64, f64, f64)> {
    (
        any::<u64>(),
        prop::collection::vec(-3.0f64..3.0, 4 * 3),
        prop::collection::vec(prop_oneof![Just(0.0), 0.0f64..4.0], 4),
        prop::collection::vec(-1.5f64..1.5, 9),
        0.0f64..=1.0,
        0.0f64..=1.0,
        1e-3f64..50.0,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn conditional_probabilities_stay_in_unit_interval(
        (seed, b, tau, a, pi1, pi2, st2) in state_strategy()
    ) {
        let data = dataset(10, &[2, 2], (1, 1, 1), seed % 50);
        let h = Hyperparameters::defaults_for(3);
        let mut s = ModelState::initial(&data, &h);
        s.b_tilde = DMatrix::from_row_slice(4, 3, &b);
        s.tau = DVector::from_vec(tau);
        let a = DMatrix::from_row_slice(3, 3, &a);
        s.omega = SpdMatrix::new(&a * a.transpose() + DMatrix::identity(3, 3) * 0.05).unwrap();
        s.pi1 = pi1;
        s.pi2 = pi2;
        s.sigma_tau2 = st2;
        let mut rng = RngStream::new(seed, 0);
        s.xi = DMatrix::from_fn(10, 3, |_, _| 3.0 * std_normal(&mut rng));
        let sampler = Sampler::new(&data, &h, FixedParameters::default(), &s).unwrap();
        for g in 0..2 {
            let p = sampler.compute_group_inclusion_prob(g, &s).unwrap();
            prop_assert!((0.0..=1.0).contains(&p), "group {g}: {p}");
        }
        for r in 0..4 {
            let (p, mu, var) = sampler.tau_conditional(r, &s);
            prop_assert!((0.0..=1.0).contains(&p), "row {r}: {p}");
            prop_assert!(mu.is_finite() && var > 0.0);
        }
        let w = s.omega.as_matrix()[(0, 1)];
        let e = edge_inclusion_prob(w, pi1, h.sigma0, h.sigma1);
        prop_assert!((0.0..=1.0).contains(&e));
    }
}

#[test]
fn beta_parameters_equal_brute_force_counts_every_sweep() {
    let data = dataset(30, &[1, 2, 1, 3], (2, 1, 1), 21);
    let h = Hyperparameters {
        n_burnin: 50,
        ..Hyperparameters::defaults_for(4)
    };
    let mut s = ModelState::initial(&data, &h);
    let mut sampler = Sampler::new(&data, &h, FixedParameters::default(), &s).unwrap();
    let mut rng = RngStream::new(22, 0);
    let groups = &data.groups;
    for sweep in 0..300 {
        sampler.sweep(&mut s, sweep, &mut rng).unwrap();
        let mut excluded = 0.0;
        for g in 0..groups.n_groups() {
            if groups.range(g).all(|r| s.b_tilde.row(r).iter().all(|v| *v == 0.0)) {
                excluded += 1.0;
            }
        }
        let tau_zero = s.tau.iter().filter(|t| **t == 0.0).count() as f64;
        let mut edges = 0.0;
        for i in 0..4 {
            for j in i + 1..4 {
                edges += f64::from(s.edge_ind[(i, j)]);
            }
        }
        let expect = [
            (h.a1 + excluded, h.a2 + 4.0 - excluded),
            (h.a3 + tau_zero, h.a4 + 7.0 - tau_zero),
            (h.a5 + edges, h.a6 + 6.0 - edges),
        ];
        assert_eq!(beta_parameters(&s, &h), expect, "sweep {sweep}");
    }
}

/// Continuous responses `XB + ε`, groups of two predictors.
fn linear_data(n: usize, b: &DMatrix<f64>, noise_sd: f64, seed: u64) -> MixedResponseDataset {
    let mut rng = RngStream::new(seed, 0);
    let p = b.nrows();
    let x = DMatrix::from_fn(n, p, |_, _| std_normal(&mut rng));
    let u = &x * b + DMatrix::from_fn(n, b.ncols(), |_, _| noise_sd * std_normal(&mut rng));
    MixedResponseDataset::new(
        x,
        u,
        DMatrix::zeros(n, 0),
        DMatrix::zeros(n, 0),
        GroupStructure::new(vec![2; p / 2]).unwrap(),
    )
    .unwrap()
}

#[test]
fn strong_signal_groups_are_always_selected() {
    let b = DMatrix::from_row_slice(
        6,
        3,
        &[
            3.0, -2.0, 2.5, //
            -2.5, 3.0, 2.0, //
            0.0, 0.0, 0.0, //
            0.0, 0.0, 0.0, //
            2.0, 2.5, -3.0, //
            3.0, -2.0, 2.0,
        ],
    );
    let data = linear_data(200, &b, 0.1, 23);
    let h = Hyperparameters {
        n_iter: 600,
        n_burnin: 200,
        ..Hyperparameters::defaults_for(3)
    };
    let chain = run_chain(&data, &h, &FixedParameters::default(), RngStream::new(24, 0)).unwrap();
    for g in [0, 2] {
        let hits = chain
            .draws
            .iter()
            .filter(|d| (2 * g..2 * g + 2).any(|r| d.b.row(r).iter().any(|v| *v != 0.0)))
            .count();
        assert!(
            hits as f64 >= 0.95 * chain.len() as f64,
            "group {g}: {hits}/{}",
            chain.len()
        );
    }
    let med = chain.median_b().unwrap();
    assert!((&med - &b).abs().max() < 0.2, "{med}");
}

#[test]
fn noise_only_data_gives_sparse_median() {
    let data = dataset(100, &[2, 2, 2], (1, 1, 1), 25);
    let h = Hyperparameters {
        n_iter: 1500,
        n_burnin: 500,
        ..Hyperparameters::defaults_for(3)
    };
    let chain = run_chain(&data, &h, &FixedParameters::default(), RngStream::new(26, 0)).unwrap();
    let med = chain.median_b().unwrap();
    let zeros = med.iter().filter(|v| **v == 0.0).count();
    assert!(
        zeros as f64 >= 0.95 * med.len() as f64,
        "{zeros} of {} zero: {med}",
        med.len()
    );
}

#[test]
fn em_scale_settles_on_simulated_data() {
    // long segments keep the Monte Carlo noise of each update below the tolerance
    let scenario = SimulationScenario::standard(1, 1, 5).unwrap();
    let sim = generate_dataset(&scenario, &mut RngStream::new(5, 3)).unwrap();
    let data = &sim.train;
    let h = Hyperparameters {
        n_iter: 20_001,
        n_burnin: 20_000,
        em_interval: 2000,
        ..Hyperparameters::defaults_for(data.q())
    };
    let mut s = ModelState::initial(data, &h);
    let mut sampler = Sampler::new(data, &h, FixedParameters::default(), &s).unwrap();
    let mut rng = RngStream::new(6, 0);
    let mut trajectory = Vec::new();
    for sweep in 0..h.n_burnin {
        sampler.sweep(&mut s, sweep, &mut rng).unwrap();
        if (sweep + 1) % h.em_interval == 0 {
            trajectory.push(s.d);
        }
    }
    assert_eq!(trajectory.len(), 10);
    for w in trajectory[7..].windows(2) {
        assert!(((w[1] - w[0]) / w[0]).abs() < 0.05, "{trajectory:?}");
    }
}

#[test]
fn chain_is_reproducible_and_respects_support() {
    let data = dataset(40, &[1, 2, 1], (1, 1, 1), 29);
    let h = Hyperparameters {
        n_iter: 200,
        n_burnin: 50,
        ..Hyperparameters::defaults_for(3)
    };
    let a = run_chain(&data, &h, &FixedParameters::default(), RngStream::new(30, 2)).unwrap();
    let b = run_chain(&data, &h, &FixedParameters::default(), RngStream::new(30, 2)).unwrap();
    let c = run_chain(&data, &h, &FixedParameters::default(), RngStream::new(30, 3)).unwrap();
    assert_eq!(a.digest(), b.digest());
    assert_ne!(a.digest(), c.digest());
    assert_eq!(a.len(), 150);
    for d in &a.draws {
        assert!(d.pi1 > 0.0 && d.pi1 < 1.0 && d.sigma_tau2 > 0.0);
        assert!(SpdMatrix::new(d.omega.clone()).is_ok());
        assert!(d.sigma2_gauss.iter().all(|v| *v > 0.0));
    }
}
