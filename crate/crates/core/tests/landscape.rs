use actlab_core::actuation::ActuationConfig;
use actlab_core::envs::EnvConfig;
use actlab_core::landscape::{compute_grid, CheckpointObjective, LandscapeConfig};
use actlab_core::ppo::{train, Checkpoint, PpoConfig, TrainSetup};
use actlab_core::rng::Stream;
use actlab_core::stats::bootstrap_std_err;
use actlab_core::{Executor, Sequential};

/// Evaluates tasks in a shuffled order, then restores index order.
struct Shuffled(u64);

impl Executor for Shuffled {
    fn map<T, F>(&self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync,
    {
        let mut order: Vec<usize> = (0..n).collect();
        Stream::new(self.0).shuffle(&mut order);
        let mut out: Vec<(usize, T)> = order.into_iter().map(|i| (i, f(i))).collect();
        out.sort_by_key(|(i, _)| *i);
        out.into_iter().map(|(_, t)| t).collect()
    }
}

fn checkpoint() -> Checkpoint {
    let ppo = PpoConfig {
        n_steps: 512,
        total_env_steps: 2048,
        checkpoint_count: 1,
        eval_episodes: 2,
        ..PpoConfig::default()
    };
    let setup = TrainSetup::new(EnvConfig::default(), ActuationConfig::torque(), ppo, 5);
    train(setup, &Sequential).unwrap().final_checkpoint
}

#[test]
fn grid_does_not_depend_on_evaluation_order() {
    let obj = CheckpointObjective::new(&checkpoint()).unwrap();
    let cfg = LandscapeConfig {
        resolution: 5,
        samples_per_cell: 200,
        ..LandscapeConfig::default()
    };
    let a = compute_grid(&Sequential, &obj, &cfg, "c").unwrap();
    let b = compute_grid(&Shuffled(1), &obj, &cfg, "c").unwrap();
    let c = compute_grid(&Shuffled(2), &obj, &cfg, "c").unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
}

#[test]
fn doubling_samples_shrinks_bootstrap_error() {
    let obj = CheckpointObjective::new(&checkpoint()).unwrap();
    let cfg = LandscapeConfig {
        resolution: 7,
        samples_per_cell: 1000,
        ..LandscapeConfig::default()
    };
    let grid_se = |samples: usize| -> Vec<f64> {
        let cfg = LandscapeConfig {
            samples_per_cell: samples,
            ..cfg.clone()
        };
        let center = obj.policy.params.clone();
        (0..cfg.resolution * cfg.resolution)
            .map(|i| {
                let returns = obj.episode_returns(&center, cfg.samples_per_cell, 100 + i as u64).unwrap();
                bootstrap_std_err(&returns, 400, i as u64)
            })
            .collect()
    };
    let small = grid_se(1000);
    let large = grid_se(2000);
    assert!(small.len() >= 30);
    let shrunk = small.iter().zip(&large).filter(|(s, l)| l < s).count();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    assert!(mean(&large) < mean(&small));
    assert!(shrunk * 3 >= small.len() * 2, "{shrunk} of {} cells", small.len());
}
