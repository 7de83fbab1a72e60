use std::f64::consts::PI;

use combnn::pendulum::*;
use proptest::prelude::*;

fn small(arch: ArchKind) -> AgentConfig {
    AgentConfig {
        arch,
        width: 12,
        members: 3,
        batch_size: 16,
        warmup: 32,
        target_update: 50,
        ..AgentConfig::new(arch)
    }
}

fn tr(theta: f64, theta_dot: f64, action: usize, reward: f64) -> Transition {
    Transition {
        state: PendulumState::new(theta, theta_dot),
        action,
        reward,
        next: PendulumState::new(theta + 0.1, theta_dot - 0.2),
    }
}

#[test]
fn hanging_pendulum_stays_put() {
    let p = EnvParams::default();
    let mut s = PendulumState::new(PI, 0.0);
    for _ in 0..200 {
        let (n, r) = env_step(&s, 0.0, &p).unwrap();
        assert!((r + PI * PI).abs() < 1e-9);
        s = n;
    }
    assert!((s.theta - PI).abs() < 1e-9 && s.theta_dot.abs() < 1e-9);
}

#[test]
fn friction_factor_values() {
    assert_eq!(FrictionMode::Sigmoid.factor(0.0), 1.0);
    let g = |t: f64| 2.0 / (1.0 + (-t / 3.0f64).exp());
    for t in [-7.0, -1.0, 0.5, 2.0 * PI, 40.0] {
        assert!((FrictionMode::Sigmoid.factor(t) - g(t)).abs() < 1e-15);
    }
    assert!(FrictionMode::Sigmoid.factor(2.0 * PI) > 1.5);
}

#[test]
fn single_member_policy_is_deterministic() {
    let mut cfg = small(ArchKind::Relu);
    cfg.members = 1;
    let mut agent = Agent::new(cfg, 11).unwrap();
    let states: Vec<_> = (0..20).map(|i| PendulumState::new(i as f64 * 0.4 - 4.0, (i % 5) as f64 - 2.0)).collect();
    let first: Vec<usize> = states.iter().map(|s| agent.act(s)).collect();
    for _ in 0..5 {
        agent.begin_episode();
        assert_eq!(agent.active_member(), 0);
        let again: Vec<usize> = states.iter().map(|s| agent.act(s)).collect();
        assert_eq!(again, first);
    }
    for (s, &a) in states.iter().zip(&first) {
        assert_eq!(a, greedy(&agent.q_member(0, s)));
    }
}

#[test]
fn equal_q_values_pick_the_lowest_action() {
    let mut agent = Agent::new(small(ArchKind::Periodic), 5).unwrap();
    // zero output weights and final bias make every action's Q exactly 0
    let net = agent.network().clone();
    for j in 0..agent.n_members() {
        let mut p = agent.member_params(j).clone();
        for r in net.output_weight_ranges() {
            p.values[r.clone()].iter_mut().for_each(|v| *v = 0.0);
        }
        let n = p.values.len();
        p.values[n - 3..].iter_mut().for_each(|v| *v = 0.0);
        agent.set_member_params(j, p).unwrap();
    }
    let s = PendulumState::new(1.0, -0.5);
    assert_eq!(agent.q_mean(&s), vec![0.0, 0.0, 0.0]);
    for _ in 0..4 {
        agent.begin_episode();
        assert_eq!(agent.act(&s), 0);
    }
}

#[test]
fn fresh_agents_with_one_seed_act_identically() {
    let run = || {
        let mut a = Agent::new(small(ArchKind::PeriodicXTanh), 21).unwrap();
        let mut acts = Vec::new();
        for e in 0..6 {
            a.begin_episode();
            for i in 0..10 {
                acts.push(a.act(&PendulumState::new(e as f64 + 0.3 * i as f64, 1.0 - 0.2 * i as f64)));
            }
        }
        acts
    };
    assert_eq!(run(), run());
}

#[test]
fn td_targets_match_manual_bootstrap() {
    let batch = vec![tr(0.2, 0.1, 0, -1.5), tr(-2.0, 3.0, 2, -0.25), tr(7.0, -5.0, 1, 0.0)];
    let mut cfg = small(ArchKind::Relu);
    cfg.gamma = 0.0;
    let agent = Agent::new(cfg.clone(), 2).unwrap();
    assert_eq!(agent.td_targets(0, &batch), vec![-1.5, -0.25, 0.0]);

    cfg.gamma = 0.9;
    let agent = Agent::new(cfg, 2).unwrap();
    let net = agent.network();
    for j in 0..agent.n_members() {
        let y = agent.td_targets(j, &batch);
        for (t, y) in batch.iter().zip(y) {
            let q = net.forward_multi(agent.target_params(j), &[t.next.theta, t.next.theta_dot]).unwrap();
            let best = q[0].max(q[1]).max(q[2]);
            assert!((y - (t.reward + 0.9 * best)).abs() < 1e-12);
        }
    }
}

#[test]
fn zero_td_error_at_the_anchor_does_not_move_parameters() {
    let mut cfg = small(ArchKind::PeriodicXTanh);
    cfg.gamma = 0.0;
    let mut agent = Agent::new(cfg, 4).unwrap();
    let anchor = agent.member_anchor(0).clone();
    agent.set_member_params(0, anchor.clone()).unwrap();
    // rewards equal to the current predictions: every residual is zero
    let states = [(0.3, 0.0, 0), (-1.0, 2.0, 1), (4.0, -3.0, 2)];
    let batch: Vec<Transition> = states
        .iter()
        .map(|&(th, td, a)| tr(th, td, a, agent.q_member(0, &PendulumState::new(th, td))[a]))
        .collect();
    agent.update(&batch).unwrap();
    let moved: f64 = agent
        .member_params(0)
        .values
        .iter()
        .zip(&anchor.values)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(moved < 1e-12, "{moved}");
    // other members were away from their anchor and do move
    assert_ne!(agent.member_params(1), agent.target_params(1));
}

#[test]
fn update_rejects_empty_batch_and_non_finite_targets() {
    let mut agent = Agent::new(small(ArchKind::Relu), 1).unwrap();
    assert!(agent.update(&[]).is_err());
    assert!(agent.update(&[tr(0.0, 0.0, 0, f64::INFINITY)]).is_err());
}

#[test]
fn one_episode_logs_two_hundred_steps() {
    let r = train_run(&small(ArchKind::Relu), 1, 3).unwrap();
    assert_eq!(r.curve.len(), 1);
    assert_eq!(r.curve[0].steps, 200);
    assert_eq!(r.agent.replay().len(), 200);
    assert!(train_run(&small(ArchKind::Relu), 0, 3).is_err());
}

#[test]
fn replay_capacity_holds_during_training() {
    let mut cfg = small(ArchKind::Periodic);
    cfg.replay_capacity = 150;
    let r = train_run(&cfg, 2, 9).unwrap();
    assert_eq!(r.agent.replay().len(), 150);
    assert_eq!(r.agent.replay().capacity(), 150);
}

#[test]
fn identical_seeds_give_identical_curves_and_snapshots() {
    let cfg = small(ArchKind::PeriodicXTanh);
    let a = train_run(&cfg, 3, 77).unwrap();
    let b = train_run(&cfg, 3, 77).unwrap();
    assert_eq!(a.curve, b.curve);
    assert_eq!(a.agent.snapshot(), b.agent.snapshot());
    let c = train_run(&cfg, 3, 78).unwrap();
    assert_ne!(a.curve, c.curve);
}

#[test]
fn fifty_episodes_stay_finite() {
    let r = train_run(&small(ArchKind::PeriodicXTanh), 50, 7).unwrap();
    let lb = EnvParams::default().reward.lower_bound(8.0) * 200.0;
    for e in &r.curve {
        assert!(e.cumulative_reward.is_finite() && e.cumulative_reward <= 0.0 && e.cumulative_reward >= lb);
    }
    for i in 0..41 {
        for j in 0..9 {
            let s = PendulumState::new(-3.0 * PI + i as f64 * 0.15 * PI, -8.0 + 2.0 * j as f64);
            assert!(r.agent.q_mean(&s).iter().all(|q| q.is_finite()));
        }
    }
}

#[test]
fn q_slices_after_training() {
    let thetas: Vec<f64> = (0..30).map(|i| -PI + i as f64 * 2.0 * PI / 30.0).collect();
    let shifted = |k: f64| -> Vec<f64> { thetas.iter().map(|t| t + 2.0 * PI * k).collect() };
    let max_diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);

    let periodic = train_run(&small(ArchKind::Periodic), 3, 5).unwrap().agent;
    let base = periodic.qvalue_slice(&thetas, 0.0, ZERO_TORQUE);
    for k in [1.0, 2.0, -1.0] {
        assert!(max_diff(&base, &periodic.qvalue_slice(&shifted(k), 0.0, ZERO_TORQUE)) < 1e-6);
    }

    let relu = train_run(&small(ArchKind::Relu), 3, 5).unwrap().agent;
    let base = relu.qvalue_slice(&thetas, 0.0, ZERO_TORQUE);
    assert!(max_diff(&base, &relu.qvalue_slice(&shifted(1.0), 0.0, ZERO_TORQUE)) > 1e-3);

    let pxt = train_run(&small(ArchKind::PeriodicXTanh), 3, 5).unwrap().agent;
    let s0 = pxt.qvalue_slice(&thetas, 0.0, ZERO_TORQUE);
    let s1 = pxt.qvalue_slice(&shifted(1.0), 0.0, ZERO_TORQUE);
    let s2 = pxt.qvalue_slice(&shifted(2.0), 0.0, ZERO_TORQUE);
    assert!(max_diff(&s0, &s1) > 1e-3 && max_diff(&s1, &s2) > 1e-3);
}

#[test]
fn snapshot_round_trip_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let r = train_run(&small(ArchKind::Periodic), 2, 8).unwrap();
    let path = dir.path().join("agent.json");
    r.agent.snapshot().save(&path).unwrap();
    let snap = AgentSnapshot::load(&path).unwrap();
    assert_eq!(snap, r.agent.snapshot());
    let back = Agent::from_snapshot(&snap, 0).unwrap();
    let s = PendulumState::new(0.7, 1.3);
    assert_eq!(back.q_mean(&s), r.agent.q_mean(&s));
    assert_eq!(evaluate(&back, 2, 4).unwrap(), evaluate(&r.agent, 2, 4).unwrap());

    let curve = dir.path().join("curve.csv");
    write_curve_csv(&curve, &r.curve).unwrap();
    let text = std::fs::read_to_string(&curve).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("episode,cumulative_reward"));
    assert_eq!(lines.count(), 2);

    let slice = dir.path().join("slice.csv");
    write_qslice_csv(&slice, &back, &[0.0, 1.0], 0.0).unwrap();
    let text = std::fs::read_to_string(&slice).unwrap();
    assert!(text.starts_with("theta,torque,q\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn replay_never_exceeds_capacity(cap in 1usize..40, pushes in 0usize..120) {
        let mut r = ReplayBuffer::new(cap);
        for i in 0..pushes {
            r.push(tr(i as f64, 0.0, 0, 0.0));
            prop_assert!(r.len() <= cap);
        }
        prop_assert_eq!(r.len(), pushes.min(cap));
        if pushes > 0 {
            prop_assert_eq!(r.get(r.len() - 1).unwrap().state.theta, (pushes - 1) as f64);
            prop_assert_eq!(r.get(0).unwrap().state.theta, (pushes - r.len()) as f64);
        }
    }

    #[test]
    fn reward_is_bounded(theta in -50.0f64..50.0, td in -8.0f64..8.0, a in 0usize..3) {
        let p = EnvParams::default();
        let (n, r) = env_step(&PendulumState::new(theta, td), TORQUES[a], &p).unwrap();
        prop_assert!(r <= 0.0 && r >= p.reward.lower_bound(p.max_speed));
        prop_assert!(n.theta_dot.abs() <= p.max_speed);
    }

    #[test]
    fn periodic_q_is_two_pi_periodic(seed in 0u64..1000, theta in -PI..PI, td in -8.0f64..8.0, k in -3i32..4) {
        let agent = Agent::new(small(ArchKind::Periodic), seed).unwrap();
        let a = agent.q_mean(&PendulumState::new(theta, td));
        let b = agent.q_mean(&PendulumState::new(theta + 2.0 * PI * k as f64, td));
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-6 * (1.0 + x.abs()));
        }
    }
}
