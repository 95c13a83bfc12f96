use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use syncltv::graph::{
    left_fixed_vector, random_block_interconnection, random_connected, validate_interconnection,
};
use syncltv::ltv::MatrixFunction;
use syncltv::scenarios::{random_spsd, random_spsd_process, SpsdMode};
use syncltv::sim::{
    consensus_point, simulate_consensus_continuous, simulate_consensus_discrete, SimOptions,
};
use syncltv::stability::{kron_apply, stability_bound};
use syncltv::{LyapunovCertificate, TimeKind, Trajectory};

fn kind_strategy() -> impl Strategy<Value = TimeKind> {
    prop_oneof![Just(TimeKind::Continuous), Just(TimeKind::Discrete)]
}

fn sym_eigs(m: &DMatrix<f64>) -> DVector<f64> {
    m.clone().symmetric_eigen().eigenvalues
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_interconnections_are_valid(p in 2usize..7, seed in any::<u64>(), kind in kind_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected(p, kind, &mut rng);
        let m = g.entries();
        let target = match kind {
            TimeKind::Continuous => 0.0,
            TimeKind::Discrete => 1.0,
        };
        for i in 0..p {
            prop_assert!((m.row(i).sum() - target).abs() < 1e-9);
            for j in 0..p {
                if i != j || kind == TimeKind::Discrete {
                    prop_assert!(m[(i, j)] >= 0.0);
                }
            }
        }
        prop_assert!(g.is_connected());
        prop_assert!(validate_interconnection(m, kind).is_ok());

        let r = left_fixed_vector(&g).unwrap();
        let r = r.as_vector();
        prop_assert!(r.iter().all(|&v| v >= 0.0));
        prop_assert!((r.sum() - 1.0).abs() < 1e-12);
        let fixed = r.transpose() * g.coupling();
        prop_assert!(fixed.norm() < 1e-9, "rᵀ(Γ or Λ - I) = {fixed}");
    }

    #[test]
    fn lyapunov_certificate_is_positive(p in 2usize..6, seed in any::<u64>(), kind in kind_strategy()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected(p, kind, &mut rng);
        let cert = LyapunovCertificate::for_interconnection(&g).unwrap();
        prop_assert!((&cert.omega - cert.omega.transpose()).norm() < 1e-9);
        prop_assert!(cert.sigma_min > 0.0);
        prop_assert!(cert.residual < 1e-8 * cert.omega.norm().max(1.0));
        let x = DVector::from_fn(2 * p, |i, _| ((i as f64 + seed as f64 % 7.0) * 1.3).sin());
        let xbar = cert.consensus_stack(&x).unwrap();
        prop_assert!(cert.energy(&x, &xbar).unwrap() >= -1e-12);
        prop_assert!(cert.energy(&xbar, &xbar).unwrap().abs() < 1e-24);
    }

    #[test]
    fn block_interconnections_have_a_growth_bound(p in 1usize..7, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_block_interconnection(p, TimeKind::Continuous, &mut rng);
        let alpha = stability_bound(&g).unwrap();
        prop_assert!(alpha >= 1.0 && alpha.is_finite());
    }

    #[test]
    fn kron_apply_matches_dense_product(
        (ar, ac, br, bc) in (1usize..4, 1usize..4, 1usize..4, 1usize..4),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DMatrix::from_fn(ar, ac, |_, _| rng.random_range(-2.0..2.0));
        let b = DMatrix::from_fn(br, bc, |_, _| rng.random_range(-2.0..2.0));
        let v = DVector::from_fn(ac * bc, |_, _| rng.random_range(-2.0..2.0));
        let fast = kron_apply(&a, &b, &v).unwrap();
        let dense = a.kronecker(&b) * &v;
        prop_assert!((fast - dense).norm() < 1e-12);
    }

    #[test]
    fn spsd_samples_lie_in_the_unit_ball(n in 1usize..6, seed in any::<u64>(), general in any::<bool>()) {
        let mode = if general { SpsdMode::General } else { SpsdMode::Projection };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let q = random_spsd(n, mode, &mut rng);
        prop_assert_eq!(&q, &q.transpose());
        let e = sym_eigs(&q);
        prop_assert!(e.min() >= -1e-10);
        prop_assert!(e.max() <= 1.0 + 1e-9);
        if !general {
            prop_assert!((&q * &q - &q).norm() < 1e-9);
        }
    }

    #[test]
    fn spsd_process_is_reproducible(n in 1usize..4, seed in any::<u64>()) {
        let a = random_spsd_process(n, SpsdMode::General, seed, 5, 0.5).unwrap();
        let b = random_spsd_process(n, SpsdMode::General, seed, 5, 0.5).unwrap();
        for t in [0.0, 0.7, 1.2, 2.49] {
            prop_assert_eq!(a.eval(t).unwrap(), b.eval(t).unwrap());
        }
    }

    #[test]
    fn trajectory_csv_round_trips(p in 1usize..4, n in 1usize..4, len in 1usize..20, seed in any::<u64>()) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut traj = Trajectory::new(p, n, Default::default());
        traj.meta.scenario = "prop".into();
        traj.meta.step = 0.125;
        traj.meta.seed = Some(seed);
        for k in 0..len {
            let x = DVector::from_fn(n * p, |_, _| rng.random_range(-1e3..1e3) * rng.random::<f64>());
            traj.push(k as f64 * 0.1 + rng.random::<f64>() * 1e-3, x).unwrap();
        }
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        prop_assert_eq!(back.times, traj.times);
        prop_assert_eq!(back.states, traj.states);
        prop_assert_eq!(back.meta, traj.meta);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn consensus_energy_never_increases(p in 2usize..5, seed in any::<u64>(), kind in kind_strategy()) {
        use rand::Rng;
        let n = 2;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_connected(p, kind, &mut rng);
        let cert = LyapunovCertificate::for_interconnection(&g).unwrap();
        let q = random_spsd_process(n, SpsdMode::General, seed, 20, 1.0).unwrap().shared();
        let x0 = DVector::from_fn(n * p, |_, _| rng.random_range(-1.0..1.0));
        let opts = SimOptions::with_step(1e-2).every(10);
        let traj = match kind {
            TimeKind::Continuous => simulate_consensus_continuous(&g.clone().into(), q.as_ref(), &x0, 20.0, &opts),
            TimeKind::Discrete => simulate_consensus_discrete(&g.clone().into(), q.as_ref(), &x0, 20, &opts),
        }
        .unwrap();
        let xbar = consensus_point(&g, &x0).unwrap();
        let stack = DVector::from_fn(n * p, |k, _| xbar[k % n]);
        let v: Vec<f64> = traj.states.iter().map(|x| cert.energy(x, &stack).unwrap()).collect();
        let tol = 1e-9 * v[0].max(1e-300);
        for w in v.windows(2) {
            prop_assert!(w[1] <= w[0] + tol, "V rose from {} to {}", w[0], w[1]);
        }
        // the weighted mean is invariant
        let last = traj.states.last().unwrap();
        prop_assert!((consensus_point(&g, last).unwrap() - &xbar).norm() < 1e-9);
    }
}
