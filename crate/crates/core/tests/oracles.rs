use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use syncltv::graph::random_connected;
use syncltv::ltv::MatrixFunction;
use syncltv::scenarios::{
    by_name, neg2_scenario, random_consensus_scenario, random_spsd_process, Neg2Schedule, Outcome,
    ScenarioParams, SpsdMode,
};
use syncltv::sim::consensus_point;
use syncltv::stability::consensus_ball_radius;
use syncltv::{LyapunovCertificate, TimeKind};

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(TAU) - PI
}

#[test]
fn neg2_state_tracks_the_rotating_line() {
    // with x₂ = 0, ẋ₁ = -u uᵀ x₁ keeps the angle between x₁ and u fixed,
    // so x₁ turns at the line's rate and shrinks at rate sin²ε
    let k_max = 3;
    let sched = Neg2Schedule::new(k_max).unwrap();
    let sc = neg2_scenario(k_max).unwrap().with_step(1e-2);
    let opts = sc.options().every(50);
    let (traj, _) = sc.simulate(&opts).unwrap();
    assert!(traj.len() > 100);
    let mut checked = 0;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        let angle = x[1].atan2(x[0]);
        assert!(
            wrap(angle - sched.tracked_angle(*t)).abs() < 1e-8,
            "t = {t}"
        );
        // closed-form radius
        let mut log_r = 0.0;
        for k in 1..=k_max {
            let (a, b) = (sched.taus[k - 1], sched.taus[k]);
            let e = sched.eps[k - 1];
            log_r -= e.sin().powi(2) * (t.min(b) - a).max(0.0);
        }
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        assert!((r / log_r.exp() - 1.0).abs() < 1e-8, "t = {t}: {r}");
        assert_eq!((x[2], x[3]), (0.0, 0.0));
        checked += 1;
    }
    assert_eq!(checked, traj.len());
    let end: f64 = sched.eps[..k_max].iter().map(|e| -TAU * e.tan()).sum();
    let last = traj.states.last().unwrap();
    assert!(((last[0].hypot(last[1])) / end.exp() - 1.0).abs() < 1e-8);
}

#[test]
fn harmonic_ring_of_three_synchronizes_by_t100() {
    let params = ScenarioParams {
        p: Some(3),
        horizon: Some(100.0),
        ..Default::default()
    };
    let run = by_name("harmonic", &params).unwrap().run().unwrap();
    assert!(run.report.synchronized);
    assert_eq!(run.observed, Outcome::Exponential);
    assert!(run.report.rate_estimate.unwrap() > 0.0);
}

#[test]
fn harmonic_pair_follows_a_unit_rate_rotation() {
    let params = ScenarioParams {
        p: Some(2),
        horizon: Some(60.0),
        ..Default::default()
    };
    let sc = by_name("harmonic", &params).unwrap();
    let run = sc.run().unwrap();
    let g = match &sc.dynamics {
        syncltv::scenarios::Dynamics::Coupled { coupling, .. } => coupling.matrices()[0].clone(),
        _ => unreachable!(),
    };
    let mean0 = consensus_point(&g, &sc.x0).unwrap();
    let t = *run.trajectory.times.last().unwrap();
    // A = [[0, 1], [-1, 0]] gives Φ(t, 0) = [[cos t, sin t], [-sin t, cos t]]
    let phi = DMatrix::from_row_slice(2, 2, &[t.cos(), t.sin(), -t.sin(), t.cos()]);
    let target = phi * mean0;
    let last = run.trajectory.state_matrix(run.trajectory.len() - 1);
    for i in 0..2 {
        assert!((last.column(i) - &target).norm() < 1e-6, "system {i}");
    }
}

#[test]
fn consensus_stays_in_the_ball() {
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = 4;
        let n = 2;
        let g = random_connected(p, TimeKind::Continuous, &mut rng);
        let q = random_spsd_process(n, SpsdMode::General, seed, 40, 1.0)
            .unwrap()
            .shared();
        let x0 = DVector::from_fn(n * p, |i, _| (i as f64 * 0.9 + seed as f64).cos());
        let sc = random_consensus_scenario(g.clone(), q, x0.clone(), 40.0).unwrap();
        let cert = LyapunovCertificate::for_interconnection(&g).unwrap();
        let radius = consensus_ball_radius(&cert, &x0).unwrap();
        let centre = consensus_point(&g, &x0).unwrap();
        let (traj, _) = sc.simulate(&sc.options().every(1)).unwrap();
        for i in 0..traj.len() {
            let x = traj.state_matrix(i);
            for j in 0..p {
                let d = (x.column(j) - &centre).norm();
                assert!(
                    d <= radius * (1.0 + 1e-9),
                    "seed {seed}, t {}, system {j}: {d} > {radius}",
                    traj.times[i]
                );
            }
        }
    }
}

#[test]
fn projection_line_is_a_rank_one_projector() {
    let sched = Neg2Schedule::new(4).unwrap();
    let line = sched.projection();
    for t in [0.0, 3.0, 20.0, sched.taus[2] + 1.0, sched.taus[4]] {
        let q = line.eval(t).unwrap();
        assert!((&q * &q - &q).norm() < 1e-12);
        assert!((q.trace() - 1.0).abs() < 1e-12);
    }
    assert!(line.eval(sched.taus[4] + 5.0).is_err());
}
