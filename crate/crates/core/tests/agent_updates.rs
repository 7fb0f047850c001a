mod common;

use common::*;
use hybridrl::agent::{
    critic_loss_and_grad, critic_objective, evaluate, policy_update, q_update, CriticSet, Learner,
    LearnerConfig, MixedTargetConfig, Mode, PolicyHead,
};
use hybridrl::backbones::{value_update, BackboneSpec};
use hybridrl::data::{
    collect_offline, rollout_return, Batch, Domain, OfflineDataset, PdController, Transition,
};
use hybridrl::envs::{DynamicsPerturbation, RobotEnv, Task, TaskSpec};
use hybridrl::numcore::{Activation, ApproximatorParams, Trainable};
use hybridrl::Error;
use ndarray::Array2;
use rand::Rng;

/// Log-std maximizing the entropy of `tanh(N(0, σ²))`, by Gauss–Hermite quadrature.
const ENTROPY_ARGMAX_LOG_STD: f64 = -0.134_216_921_330_342_7;

/// Policy whose outputs ignore the state: one linear layer with zero weights.
fn constant_policy(mean: f64, log_std: f64, scale: f64, lr: f64) -> PolicyHead {
    let p = ApproximatorParams::new(vec![1, 2], Activation::Relu, vec![0.0, 0.0, mean, log_std]).unwrap();
    PolicyHead::new(Trainable::new(p, lr), 1, scale).unwrap()
}

fn constant_net(sizes: &[usize], value: f64) -> Trainable {
    let mut p = ApproximatorParams::zeros(sizes.to_vec(), Activation::Relu).unwrap();
    *p.values_mut().last_mut().unwrap() = value;
    Trainable::new(p, 1e-3)
}

/// Relu critic on `[s, a]` equal to the piecewise-linear interpolant of
/// `−(a − peak)²` on knots `peak ± k·d`; its maximum is exactly at `a = peak`.
fn hinge_quadratic_critic(peak: f64, d: f64, knots: usize) -> Trainable {
    let h = 2 * knots;
    let mut v = vec![0.0; 2 * h + h + h + 1];
    for k in 0..knots {
        let c = k as f64 * d;
        v[h + 2 * k] = 1.0;
        v[h + 2 * k + 1] = -1.0;
        v[2 * h + 2 * k] = -(peak + c);
        v[2 * h + 2 * k + 1] = peak - c;
        let slope = if k == 0 { -d } else { -2.0 * d };
        v[3 * h + 2 * k] = slope;
        v[3 * h + 2 * k + 1] = slope;
    }
    Trainable::new(
        ApproximatorParams::new(vec![2, h, 1], Activation::Relu, v).unwrap(),
        1e-3,
    )
}

#[test]
fn squashed_entropy_matches_quadrature() {
    let policy = constant_policy(0.3, -0.5, 2.0, 1e-3);
    let n = 200_000;
    let (_, lps) = policy.sample_batch(&Array2::zeros((n, 1)), &mut rng(11)).unwrap();
    let mc = -lps.iter().sum::<f64>() / n as f64;
    // Gauss–Hermite value of H(2·tanh(u)), u ~ N(0.3, e^-1).
    assert!((mc - 1.222_936_126_882_358_6).abs() < 1e-2, "{mc}");
}

#[test]
fn policy_climbs_to_critic_peak_without_entropy() {
    let q = hinge_quadratic_critic(0.3, 0.1, 24);
    let critics = CriticSet::from_parts(q.clone(), q, constant_net(&[1, 4, 1], 0.0));
    let mut r = rng(3);
    let mut policy = PolicyHead::init(1, 1, &[16, 16], 2.0, 1e-3, &mut r).unwrap();
    for _ in 0..3000 {
        let states = Array2::from_shape_simple_fn((128, 1), || r.random_range(-1.0..1.0));
        policy_update(&critics, &mut policy, 0.0, &states, &mut r).unwrap();
    }
    let probe = Array2::from_shape_vec((5, 1), vec![-1.0, -0.5, 0.0, 0.5, 1.0]).unwrap();
    for a in policy.mean_actions(&probe).unwrap() {
        assert!((a - 0.3).abs() < 0.01, "deterministic action {a}");
    }
}

#[test]
fn constant_critic_raises_log_std_toward_entropy_maximum() {
    let critics = CriticSet::from_parts(
        constant_net(&[2, 3, 1], 5.0),
        constant_net(&[2, 3, 1], 5.0),
        constant_net(&[1, 3, 1], 0.0),
    );
    let mut policy = constant_policy(0.0, -2.0, 1.0, 1e-2);
    let states = Array2::zeros((4096, 1));
    let mut r = rng(4);
    let log_std = |p: &PolicyHead| p.params().values()[3];
    let mut prev = log_std(&policy);
    for step in 1..=600 {
        policy_update(&critics, &mut policy, 1.0, &states, &mut r).unwrap();
        let now = log_std(&policy);
        if prev < ENTROPY_ARGMAX_LOG_STD - 0.1 {
            assert!(now > prev, "log-std fell from {prev} to {now} at step {step}");
        }
        prev = now;
    }
    assert!(
        (prev - ENTROPY_ARGMAX_LOG_STD).abs() < 0.05,
        "final log-std {prev}"
    );
    assert!(policy.params().values()[2].abs() < 0.1);
}

fn real_sim_pair(r_real: f64, r_sim: f64) -> (Transition, Transition) {
    let t = |r, domain| Transition {
        s: vec![0.2],
        a: vec![-0.4],
        r,
        s_next: vec![0.1],
        terminal: false,
        domain,
    };
    (t(r_real, Domain::Real), t(r_sim, Domain::Sim))
}

#[test]
fn q_update_loss_by_hand() {
    // Q ≡ 1, target critics ≡ 4, V ≡ 2, β = 0, λ = 0.5, γ = 0.99, ŵ = 3.
    let mut critics = CriticSet::from_parts(
        constant_net(&[2, 3, 1], 1.0),
        constant_net(&[2, 3, 1], 1.0),
        constant_net(&[1, 3, 1], 2.0),
    );
    for t in [&mut critics.q1_target, &mut critics.q2_target] {
        *t.values_mut().last_mut().unwrap() = 4.0;
    }
    let cfg = MixedTargetConfig {
        lambda: 0.5,
        gamma: 0.99,
        use_ratio: true,
        ..MixedTargetConfig::default()
    };
    let policy = constant_policy(0.1, -1.0, 2.0, 1e-3);
    let pair = constant_pair(logit(0.5), logit(0.75));
    let (real, sim) = real_sim_pair(1.0, 0.5);
    let before = critics.clone();
    let losses = q_update(
        &cfg,
        &mut critics,
        &policy,
        0.0,
        Some(&pair),
        &[&real],
        &[&sim],
        1.0,
        &mut rng(0),
    )
    .unwrap();
    // y_D = 1 + 0.495·2 + 0.495·4 = 3.97 and y_B = 3.47.
    let expected = (1.0_f64 - 3.97).powi(2) + 3.0 * (1.0_f64 - 3.47).powi(2);
    assert!((expected - 27.1236).abs() < 1e-12);
    assert!((losses.q1 - expected).abs() < 1e-12, "{}", losses.q1);
    assert!((losses.q2 - expected).abs() < 1e-12);
    assert_eq!(losses.ratio.unwrap().mean, 3.0);
    assert_ne!(critics.q1.params, before.q1.params);
    assert_eq!(critics.q1_target, before.q1_target);
    assert_eq!(critics.v, before.v);
}

#[test]
fn zero_weight_rows_contribute_nothing() {
    let q = net(&[3, 8, 1], 21);
    let mut r = rng(22);
    let rows = Array2::from_shape_simple_fn((5, 3), || r.random_range(-1.0..1.0));
    let offline = rows.slice(ndarray::s![..3, ..]).to_owned();
    let targets = [0.5, -1.0, 2.0, 1e6, -1e6];
    let third = 1.0 / 3.0;
    let (l_all, g_all) = critic_loss_and_grad(&q, &rows, &targets, &[third, third, third, 0.0, 0.0]).unwrap();
    let (l_off, g_off) = critic_loss_and_grad(&q, &offline, &targets[..3], &[third; 3]).unwrap();
    assert_eq!(l_all, l_off);
    assert!(max_relative_error(&g_all, &g_off, 1e-300) < 1e-14);
}

#[test]
fn empty_offline_batch_is_soft_q_learning() {
    let cfg = MixedTargetConfig {
        lambda: 0.0,
        use_ratio: false,
        ..MixedTargetConfig::default()
    };
    let mut r = rng(30);
    let critics = CriticSet::from_parts(
        Trainable::new(net(&[2, 6, 1], 31), 1e-3),
        Trainable::new(net(&[2, 6, 1], 32), 1e-3),
        Trainable::new(net(&[1, 6, 1], 33), 1e-3),
    );
    let policy = PolicyHead::new(Trainable::new(net(&[1, 6, 2], 34), 1e-3), 1, 2.0).unwrap();
    let sim: Vec<Transition> = (0..4).map(|_| transition(1, 1, Domain::Sim, &mut r)).collect();
    let sim = Batch::from_transitions(&sim.iter().collect::<Vec<_>>());
    let empty = Batch::from_transitions(&[]);
    let beta = 0.2;
    let obj = critic_objective(
        &cfg,
        &critics,
        &policy,
        beta,
        None,
        &empty,
        &sim,
        1.0,
        &mut rng(35),
    )
    .unwrap();

    let (a_next, lp) = policy.sample_batch(&sim.s_next, &mut rng(35)).unwrap();
    let q_next = critics
        .min_target(&hybridrl::data::hconcat(&sim.s_next, &a_next))
        .unwrap();
    for i in 0..4 {
        let y = sim.r[i] + cfg.gamma * (q_next[i] - beta * lp[i]);
        assert!((obj.targets[i] - y).abs() < 1e-12);
        assert_eq!(obj.row_weights[i], 0.25);
    }
    assert_eq!(obj.inputs, sim.state_action());
}

fn small_dataset(spec: &TaskSpec, n: usize) -> OfflineDataset {
    collect_offline(spec, &PdController::default(), n, &mut rng(40))
}

#[test]
fn hybrid_with_everything_off_is_sac() {
    let spec = TaskSpec::new(Task::StandingStill);
    let base = LearnerConfig {
        hidden: vec![16, 16],
        batch_size: 32,
        random_steps: 100,
        ..LearnerConfig::default()
    };
    let mut hybrid_cfg = base.clone();
    hybrid_cfg.target.lambda = 0.0;
    hybrid_cfg.target.use_ratio = false;
    hybrid_cfg.target.offline_fraction = 0.0;
    let sac_cfg = LearnerConfig {
        mode: Mode::Sac,
        ..base
    };
    let pert = DynamicsPerturbation::gravity(2.0);
    let mut hybrid = Learner::new(hybrid_cfg, spec, pert, Some(small_dataset(&spec, 500)), 9).unwrap();
    let mut sac = Learner::new(sac_cfg, spec, pert, None, 9).unwrap();
    for _ in 0..300 {
        assert_eq!(hybrid.train_step().unwrap(), sac.train_step().unwrap());
    }
    assert_eq!(hybrid.networks(), sac.networks());
}

#[test]
fn value_update_rejects_simulated_rows() {
    let mut r = rng(50);
    let q1 = net(&[2, 4, 1], 51);
    let q2 = net(&[2, 4, 1], 52);
    let mut v = Trainable::new(net(&[1, 4, 1], 53), 1e-3);
    let before = v.clone();
    let real = transition(1, 1, Domain::Real, &mut r);
    let sim = transition(1, 1, Domain::Sim, &mut r);
    let spec = BackboneSpec::Expectile { tau: 0.7 };
    let err = value_update(&mut v, &q1, &q2, &[&real, &sim], &spec).unwrap_err();
    assert!(
        matches!(
            err,
            Error::DomainContamination {
                found: Domain::Sim,
                ..
            }
        ),
        "{err}"
    );
    assert_eq!(v, before);
    assert!(value_update(&mut v, &q1, &q2, &[&real], &spec).is_ok());
    assert_ne!(v, before);

    let mut ds = OfflineDataset::new(1, 1);
    assert!(ds.push(sim).is_err());
    assert!(ds.is_empty());
}

#[test]
fn critic_update_rejects_mislabelled_rows() {
    let mut critics = CriticSet::from_parts(
        constant_net(&[2, 3, 1], 1.0),
        constant_net(&[2, 3, 1], 1.0),
        constant_net(&[1, 3, 1], 0.0),
    );
    let before = critics.clone();
    let policy = constant_policy(0.0, -1.0, 2.0, 1e-3);
    let (real, sim) = real_sim_pair(1.0, 1.0);
    let cfg = MixedTargetConfig::default();
    let mut r = rng(0);
    assert!(q_update(&cfg, &mut critics, &policy, 0.1, None, &[&sim], &[], 1.0, &mut r).is_err());
    assert!(q_update(&cfg, &mut critics, &policy, 0.1, None, &[], &[&real], 1.0, &mut r).is_err());
    assert_eq!(critics, before);
}

#[test]
fn untrained_policy_scores_far_below_controller() {
    let spec = TaskSpec::new(Task::StandingStill);
    let policy = PolicyHead::init(
        spec.state_dim(),
        1,
        &[64, 64],
        spec.torque_limit,
        1e-3,
        &mut rng(60),
    )
    .unwrap();
    let untrained = evaluate(&policy, &spec, 5, &mut rng(61)).unwrap();
    let pd = PdController::default().noiseless();
    let mut env = RobotEnv::new(spec, DynamicsPerturbation::REFERENCE);
    let mut r = rng(62);
    let mut controller = 0.0;
    for _ in 0..5 {
        controller += rollout_return(&mut env, |s, _, r| pd.act(&spec, s, r), &mut r) / 5.0;
    }
    assert!(
        controller - untrained.mean > 5000.0,
        "controller {controller} vs {}",
        untrained.mean
    );
}
