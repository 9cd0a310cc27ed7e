use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavediff::worldkit::{
    discounted_return, generate_dataset, normalize_returns, train_inverse_dynamics, Dataset, EnvKind, Environment,
    InverseDynamicsConfig, PolicySpec, ReturnNormalizer,
};

fn mean_return(env: &Environment, spec: PolicySpec) -> f64 {
    let ds = generate_dataset(env, spec, 40, 64, 5).unwrap();
    ds.episodes.iter().map(|e| e.total_reward()).sum::<f64>() / 40.0
}

#[test]
fn pointmass_constant_force_closed_form() {
    let env = Environment::new(EnvKind::PointMass2D);
    let (p0, v0, a) = ([0.3, -0.2], [0.1, 0.4], [0.5, -1.0]);
    let mut s = vec![p0[0], p0[1], v0[0], v0[1]];
    for _ in 0..10 {
        s = env.step(&s, &a).unwrap().next_state;
    }
    let (n, dt) = (10.0, env.dt);
    for k in 0..2 {
        let v = v0[k] + n * dt * a[k];
        // Σ_{j=1..n} (v0 + j·dt·a)·dt
        let p = p0[k] + n * dt * v0[k] + dt * dt * a[k] * n * (n + 1.0) / 2.0;
        assert!((s[2 + k] - v).abs() <= 1e-12);
        assert!((s[k] - p).abs() <= 1e-12);
    }
}

#[test]
fn oscillator_energy_decays_without_force() {
    let env = Environment::new(EnvKind::DampedOscillator);
    let mut s = vec![1.0, 0.0];
    let start = Environment::oscillator_energy(&s);
    for _ in 0..400 {
        s = env.step(&s, &[0.0]).unwrap().next_state;
    }
    assert!(Environment::oscillator_energy(&s) < 0.5 * start);
}

#[test]
fn expert_beats_noisy_beats_random() {
    for kind in [EnvKind::PointMass2D, EnvKind::DampedOscillator, EnvKind::Pendulum] {
        let env = Environment::new(kind);
        let e = mean_return(&env, PolicySpec::ScriptedExpert);
        let n = mean_return(&env, PolicySpec::ScriptedNoisy(0.5));
        let r = mean_return(&env, PolicySpec::Random);
        assert!(e > n && n > r, "{kind}: {e} {n} {r}");
    }
}

#[test]
fn discounted_return_matches_direct_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let rewards: Vec<f64> = (0..50).map(|_| rng.gen_range(-2.0..0.0)).collect();
    let direct: f64 = rewards.iter().enumerate().map(|(k, r)| 0.97f64.powi(k as i32) * r).sum();
    assert!((discounted_return(&rewards, 0.97).unwrap() - direct).abs() <= 1e-12);
    assert!(discounted_return(&[], 0.9).is_err());
}

#[test]
fn recorded_actions_follow_the_dynamics() {
    let env = Environment::new(EnvKind::PointMass2D);
    let ds = generate_dataset(&env, PolicySpec::ScriptedNoisy(0.5), 10, 32, 2).unwrap();
    for ep in &ds.episodes {
        for (t, a) in ep.actions.iter().enumerate() {
            for k in 0..2 {
                let implied = (ep.states[t + 1][2 + k] - ep.states[t][2 + k]) / env.dt;
                assert!((implied - a[k]).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn inverse_dynamics_fits_pointmass() {
    let env = Environment::new(EnvKind::PointMass2D);
    let ds = generate_dataset(&env, PolicySpec::ScriptedNoisy(0.5), 40, 64, 3).unwrap();
    assert!(ds.transition_count() >= 1000);
    let cfg = InverseDynamicsConfig {
        epochs: 150,
        ..Default::default()
    };
    let (model, report) = train_inverse_dynamics(&ds, &cfg).unwrap();
    assert!(report.validation_mse <= 1e-3, "{report:?}");
    let ep = &ds.episodes[0];
    for t in 0..10 {
        let a = model.predict_action(&ep.states[t], &ep.states[t + 1]).unwrap();
        for k in 0..2 {
            assert!((a[k] - ep.actions[t][k]).abs() <= 0.05);
        }
    }
}

fn small_dataset(seed: u64) -> Dataset {
    let env = Environment::new(EnvKind::DampedOscillator);
    generate_dataset(&env, PolicySpec::ScriptedNoisy(0.3), 6, 12, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn normalized_returns_lie_in_unit_interval(returns in prop::collection::vec(-100.0f64..100.0, 1..30)) {
        let norm = ReturnNormalizer::fit(&returns).unwrap();
        for r in &returns {
            let v = norm.normalize(*r);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn datasets_replay_exactly(seed in any::<u64>()) {
        let ds = small_dataset(seed);
        prop_assert!(ds.replay_error().unwrap() <= 1e-9);
        let (_, scaled) = normalize_returns(&ds).unwrap();
        prop_assert!(scaled.iter().all(|v| (0.0..=1.0).contains(v)));
        let back = Dataset::from_jsonl(&ds.to_jsonl()).unwrap();
        prop_assert_eq!(back, ds);
    }
}
