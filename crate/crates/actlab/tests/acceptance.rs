//! Acceptance suite. Each test prints one `criterion N ...: PASS|FAIL` line
//! and then asserts the same condition.
//!
//! Run with `cargo test -p actlab --test acceptance -- --nocapture` to see
//! the report lines.

use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;

use actlab::checkpoint_file::{encode, load_checkpoint};
use actlab::config::{ExperimentConfig, ModeConfig};
use actlab::pipeline::{list_checkpoints, run_dir, train_experiment, train_run};
use actlab::Threads;
use actlab_core::actuation::{
    apply_position_control, apply_velocity_control, affine_rescale, ActionBounds, ActuationConfig, ActuationKind,
    ControllerGains,
};
use actlab_core::envs::{EnvConfig, JointState, ReacherParams};
use actlab_core::gradsim::{analyze_checkpoint, analyze_run, CompareMode, GradSimConfig};
use actlab_core::landscape::{
    compute_grid, CheckpointObjective, LandscapeConfig, QuadraticObjective, Surface,
};
use actlab_core::policy::{log_prob, ActorCritic, FlatParams, NetSpec};
use actlab_core::ppo::{
    compute_gae, evaluate, ppo_loss, ppo_loss_grad, random_policy_baseline, run_episode, train, Batch, Checkpoint,
    EvalMode, LossConfig, LossTerm, PpoConfig, TrainSetup, Trainer,
};
use actlab_core::rng::{derive_seed, purpose, Stream};
use actlab_core::stats::{mean, sign_test_p, std_err, std_sample};
use actlab_core::Sequential;

fn report(n: u32, name: &str, pass: bool, started: Instant, detail: String) {
    println!(
        "criterion {n} {name}: {} ({detail}; {:.1}s)",
        if pass { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    assert!(pass, "criterion {n} {name} failed: {detail}");
}

fn scratch(name: &str) -> PathBuf {
    // per-process, so concurrent test runs never wipe each other's runs
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR"))
        .join("acceptance")
        .join(std::process::id().to_string())
        .join(name);
    if dir.exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

// ---------------------------------------------------------------------------
// Shared pendulum experiment: three modes, five seeds, 150k steps.

const PENDULUM_SEEDS: u64 = 5;

fn pendulum_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::parse("name = \"pendulum\"\nenv = { id = \"pendulum\" }\n").unwrap();
    cfg.modes = [ActuationKind::Torque, ActuationKind::Velocity, ActuationKind::Position]
        .into_iter()
        .map(ModeConfig::new)
        .collect();
    cfg.seeds = (0..PENDULUM_SEEDS).collect();
    cfg.ppo.total_env_steps = 150_000;
    cfg.resolve().unwrap()
}

struct PendulumRuns {
    root: PathBuf,
    cfg: ExperimentConfig,
    seconds: f64,
}

fn pendulum_runs() -> &'static PendulumRuns {
    static RUNS: OnceLock<PendulumRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let started = Instant::now();
        let root = scratch("pendulum");
        let cfg = pendulum_config();
        train_experiment(&Sequential, &cfg, &root, false, |_| {}).unwrap();
        PendulumRuns {
            root,
            cfg,
            seconds: started.elapsed().as_secs_f64(),
        }
    })
}

fn pendulum_checkpoints(kind: ActuationKind, seed: u64) -> Vec<PathBuf> {
    let r = pendulum_runs();
    list_checkpoints(&run_dir(&r.root, &r.cfg.name, kind, seed)).unwrap()
}

// ---------------------------------------------------------------------------
// 1. Analytic gradients against central finite differences.

fn random_instance(seed: u64) -> (ActorCritic, FlatParams, Batch, LossConfig) {
    let mut rng = Stream::new(seed);
    let obs_dim = 1 + rng.below(4);
    let act_dim = 1 + rng.below(3);
    let hidden: Vec<usize> = (0..1 + rng.below(2)).map(|_| 3 + rng.below(10)).collect();
    let net = ActorCritic::new(NetSpec {
        obs_dim,
        act_dim,
        hidden_layers: hidden,
    })
    .unwrap();
    let mut params = net.init_params(&mut rng);
    // move away from the orthogonal init so every block is generic
    for (i, p) in params.data.iter_mut().enumerate() {
        *p += 0.1 * rng.normal() + if net.log_std_range().contains(&i) { -0.5 } else { 0.0 };
    }
    let n = 8 + rng.below(24);
    let observations: Vec<f64> = (0..n * obs_dim).map(|_| rng.normal()).collect();
    let mut actions = Vec::with_capacity(n * act_dim);
    let mut old_log_probs = Vec::with_capacity(n);
    for row in 0..n {
        let (mu, ls) = net.forward_policy(&params, &observations[row * obs_dim..(row + 1) * obs_dim]).unwrap();
        let a: Vec<f64> = mu.iter().zip(&ls).map(|(m, l)| m + l.exp() * rng.normal()).collect();
        // old policy differs so that some ratios land outside the clip range
        old_log_probs.push(log_prob(&mu, &ls, &a) + 0.4 * rng.normal());
        actions.extend(a);
    }
    let batch = Batch {
        obs_dim,
        act_dim,
        observations,
        actions,
        old_log_probs,
        advantages: (0..n).map(|_| rng.normal()).collect(),
        returns: (0..n).map(|_| rng.normal()).collect(),
        old_values: (0..n).map(|_| rng.normal()).collect(),
    };
    let cfg = LossConfig {
        clip_range: 0.2,
        vf_coef: 0.5,
        ent_coef: 0.01,
    };
    (net, params, batch, cfg)
}

#[test]
fn criterion_01_gradient_correctness() {
    let started = Instant::now();
    const H: f64 = 1e-6;
    let mut worst: f64 = 0.0;
    let mut checked = 0usize;
    for seed in 0..20 {
        let (net, params, batch, cfg) = random_instance(1000 + seed);
        let (_, grads) = ppo_loss_grad(&net, &params, &batch, &cfg);
        let analytic = [
            grads.term(LossTerm::Policy, &cfg),
            grads.term(LossTerm::Value, &cfg),
            grads.term(LossTerm::Total, &cfg),
        ];
        for i in 0..params.len() {
            let mut plus = params.clone();
            plus.data[i] += H;
            let mut minus = params.clone();
            minus.data[i] -= H;
            let (lp, lm) = (ppo_loss(&net, &plus, &batch, &cfg), ppo_loss(&net, &minus, &batch, &cfg));
            let fd = [
                (lp.policy - lm.policy) / (2.0 * H),
                (lp.value - lm.value) / (2.0 * H),
                (lp.total - lm.total) / (2.0 * H),
            ];
            for (g, f) in analytic.iter().zip(fd) {
                let a = g.data[i];
                if a.abs() > 1e-8 {
                    worst = worst.max((a - f).abs() / a.abs().max(f.abs()));
                    checked += 1;
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    report(
        1,
        "gradient correctness",
        worst < 1e-4 && secs < 60.0,
        started,
        format!("max relative error {worst:.2e} over {checked} coordinates, 20 instances"),
    );
}

// ---------------------------------------------------------------------------
// 2. GAE against direct double summation.

fn gae_brute(rewards: &[f64], values: &[f64], ends: &[bool], last: f64, gamma: f64, lambda: f64) -> Vec<f64> {
    let n = rewards.len();
    let next_value = |t: usize| if ends[t] { 0.0 } else if t + 1 < n { values[t + 1] } else { last };
    let delta: Vec<f64> = (0..n).map(|t| rewards[t] + gamma * next_value(t) - values[t]).collect();
    (0..n)
        .map(|t| {
            let mut sum = 0.0;
            for k in t..n {
                sum += (gamma * lambda).powi((k - t) as i32) * delta[k];
                if ends[k] {
                    break;
                }
            }
            sum
        })
        .collect()
}

#[test]
fn criterion_02_gae_oracle() {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let mut rng = Stream::new(2000 + seed);
        let n = 5 + rng.below(16);
        let rewards: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let values: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let ends: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.15).collect();
        let last = rng.normal();
        let gamma = rng.uniform_in(0.8, 1.0);
        let lambda = rng.uniform_in(0.0, 1.0);
        let (adv, ret) = compute_gae(&rewards, &values, &ends, last, gamma, lambda);
        let oracle = gae_brute(&rewards, &values, &ends, last, gamma, lambda);
        for t in 0..n {
            worst = worst.max((adv[t] - oracle[t]).abs());
            worst = worst.max((ret[t] - (oracle[t] + values[t])).abs());
        }
    }
    report(2, "GAE oracle equivalence", worst <= 1e-12, started, format!("max abs error {worst:.2e} over 100 instances"));
}

// ---------------------------------------------------------------------------
// 3. Controller fixed points.

#[test]
fn criterion_03_controller_fixed_points() {
    let started = Instant::now();
    let bounds = ActionBounds {
        low: vec![-3.0, -1.5],
        high: vec![2.0, 4.5],
    };
    let limit = [5.0, 5.0];
    let grid = |i: usize| -1.0 + 2.0 * i as f64 / 9.0;
    let mut points = 0;
    let mut nonzero = 0;
    // velocity: action × joint angle × gain, with q̇ set to the target velocity
    for ia in 0..10 {
        for iq in 0..10 {
            for ig in 0..10 {
                let a = [grid(ia), -grid(ia)];
                let target = affine_rescale(&a, &bounds);
                let state = JointState::new(vec![3.0 * grid(iq), -grid(iq)], target);
                let gains = ControllerGains::velocity(0.1 + ig as f64);
                let tau = apply_velocity_control(&a, &state, &gains, &bounds, &limit);
                points += 1;
                nonzero += tau.iter().filter(|t| **t != 0.0).count().min(1);
            }
        }
    }
    // position: action × stiffness × damping, at the target with q̇ = 0
    for ia in 0..10 {
        for ip in 0..10 {
            for id in 0..10 {
                let a = [grid(ia), grid(9 - ia)];
                let state = JointState::new(affine_rescale(&a, &bounds), vec![0.0, 0.0]);
                let gains = ControllerGains::position(1.0 + 10.0 * ip as f64, 0.5 * id as f64);
                let tau = apply_position_control(&a, &state, &gains, &bounds, &limit);
                points += 1;
                nonzero += tau.iter().filter(|t| **t != 0.0).count().min(1);
            }
        }
    }
    report(
        3,
        "controller fixed points",
        nonzero == 0 && points == 2000,
        started,
        format!("{nonzero} nonzero outputs over {points} grid points (1000 per controller)"),
    );
}

// ---------------------------------------------------------------------------
// 4. Determinism.

fn small_setup(seed: u64) -> TrainSetup {
    let ppo = PpoConfig {
        n_steps: 512,
        total_env_steps: 8 * 512,
        checkpoint_count: 4,
        eval_episodes: 4,
        ..PpoConfig::default()
    };
    TrainSetup::new(
        EnvConfig::default(),
        ActuationConfig::new(ActuationKind::Position, ControllerGains::position(10.0, 1.0)),
        ppo,
        seed,
    )
}

#[test]
fn criterion_04_determinism() {
    let started = Instant::now();
    let root = scratch("determinism");
    let mut cfg = ExperimentConfig::parse("name = \"det\"").unwrap();
    cfg.modes = vec![ModeConfig {
        kind: ActuationKind::Position,
        gains: Some(ControllerGains::position(10.0, 1.0)),
        bounds: None,
    }];
    cfg.ppo = small_setup(0).ppo;
    cfg.landscape.resolution = 7;
    cfg.landscape.samples_per_cell = 400;
    let cfg = cfg.resolve().unwrap();

    // (a) identical runs, byte for byte on disk
    let a = train_run(&Sequential, &cfg, &cfg.modes[0], 3, &root.join("a"), false).unwrap();
    let b = train_run(&Sequential, &cfg, &cfg.modes[0], 3, &root.join("b"), false).unwrap();
    let read = |p: &Path| std::fs::read(p).unwrap();
    let mut identical = read(&a.dir.join("curves.csv")) == read(&b.dir.join("curves.csv"))
        && a.checkpoints.len() == b.checkpoints.len();
    for (x, y) in a.checkpoints.iter().zip(&b.checkpoints) {
        identical &= read(x) == read(y);
    }

    // (b) resume from the second checkpoint file
    let full = train(small_setup(3), &Sequential).unwrap();
    let mid = load_checkpoint(&a.checkpoints[1]).unwrap();
    let mut resumed = Trainer::from_checkpoint(&mid).unwrap();
    let mut later: Vec<Checkpoint> = Vec::new();
    let tail = resumed
        .run_until(&Sequential, u64::MAX, |c| {
            later.push(c);
            Ok(())
        })
        .unwrap();
    let skip = full.curve.len() - tail.len();
    let resume_ok = encode(&mid) == encode(&full.checkpoints[1])
        && tail == full.curve[skip..]
        && encode(later.last().unwrap()) == encode(&full.final_checkpoint)
        && later
            .iter()
            .zip(&full.checkpoints[2..])
            .all(|(x, y)| encode(x) == encode(y));

    // (c) worker-count invariance of landscape and gradsim outputs
    let ckpt = load_checkpoint(a.checkpoints.last().unwrap()).unwrap();
    let objective = CheckpointObjective::new(&ckpt).unwrap();
    let eight = Threads::new(8).unwrap();
    let g1 = compute_grid(&Sequential, &objective, &cfg.landscape, "c").unwrap();
    let g8 = compute_grid(&eight, &objective, &cfg.landscape, "c").unwrap();
    let gs = GradSimConfig {
        oracle_samples: 4096,
        batch_sizes: vec![64, 1024],
        n_estimates: 6,
        ..GradSimConfig::default()
    };
    let r1 = analyze_checkpoint(&Sequential, &ckpt, &gs).unwrap();
    let r8 = analyze_checkpoint(&eight, &ckpt, &gs).unwrap();
    let workers_ok = g1 == g8 && r1 == r8;

    let secs = started.elapsed().as_secs_f64();
    report(
        4,
        "determinism",
        identical && resume_ok && workers_ok && secs < 600.0,
        started,
        format!("identical runs {identical}, resume {resume_ok}, 1 vs 8 workers {workers_ok}"),
    );
}

// ---------------------------------------------------------------------------
// 5. Landscape center against the checkpoint.

#[test]
fn criterion_05_landscape_center() {
    let files = pendulum_checkpoints(ActuationKind::Torque, 0);
    let started = Instant::now();
    let picks: Vec<&PathBuf> = (0..5).map(|k| &files[(k * (files.len() - 1)) / 4]).collect();
    let cfg = LandscapeConfig {
        resolution: 3,
        ..LandscapeConfig::default()
    };
    let mut loss_err: f64 = 0.0;
    let mut z_max: f64 = 0.0;
    let mut all_within = true;
    for path in picks {
        let ckpt = load_checkpoint(path).unwrap();
        let stored = ckpt.stored_loss.unwrap();
        let objective = CheckpointObjective::new(&ckpt).unwrap();
        let grid = compute_grid(&Sequential, &objective, &cfg, &ckpt.label()).unwrap();
        let c = grid.center_index();
        loss_err = loss_err
            .max((grid.total_loss[c] - stored.total).abs())
            .max((grid.policy_loss[c] - stored.policy).abs())
            .max((grid.value_loss[c] - stored.value).abs());

        // independent estimate: different episodes, about 20k samples
        let policy = &objective.policy;
        let eval = evaluate(
            &Sequential,
            policy.context(),
            &policy.setup.env,
            &policy.actuator,
            EvalMode::Stochastic,
            100,
            derive_seed(77, &[ckpt.env_step]),
            policy.setup.ppo.gamma,
        )
        .unwrap();
        let disc: Vec<f64> = eval.episodes.iter().map(|e| e.discounted_return).collect();
        let se = (grid.reward_se[c].powi(2) + std_err(&disc).powi(2)).sqrt();
        let z = (grid.reward[c] - mean(&disc)).abs() / se;
        z_max = z_max.max(z);
        all_within &= z <= 2.0;
    }
    report(
        5,
        "landscape center consistency",
        loss_err <= 1e-10 && all_within,
        started,
        format!("max loss deviation {loss_err:.2e}, max reward z-score {z_max:.2} over 5 checkpoints"),
    );
}

// ---------------------------------------------------------------------------
// 6. Quadratic objective against the closed-form paraboloid.

#[test]
fn criterion_06_analytic_landscape() {
    let started = Instant::now();
    let net = ActorCritic::new(NetSpec {
        obs_dim: 3,
        act_dim: 1,
        hidden_layers: vec![8, 8],
    })
    .unwrap();
    let mut rng = Stream::new(6);
    let center = net.init_params(&mut rng);
    let minimum: Vec<f64> = (0..center.len()).map(|_| 0.3 * rng.normal()).collect();
    let curvature: Vec<f64> = (0..center.len()).map(|_| rng.uniform_in(0.1, 2.0)).collect();
    let objective = QuadraticObjective {
        center: center.clone(),
        minimum: minimum.clone(),
        curvature: curvature.clone(),
    };
    let cfg = LandscapeConfig {
        resolution: 31,
        samples_per_cell: 1,
        direction_seed: 12,
        ..LandscapeConfig::default()
    };
    let grid = compute_grid(&Sequential, &objective, &cfg, "quadratic").unwrap();
    // f(α, β) = f0 + bα·α + bβ·β + aa·α² + ab·αβ + bb·β², coefficients summed directly
    let (mut f0, mut b1, mut b2, mut a11, mut a12, mut a22) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..center.len() {
        let r = center.data[i] - minimum[i];
        let (u, v, k) = (grid.d1[i], grid.d2[i], curvature[i]);
        f0 += k * r * r;
        b1 += 2.0 * k * r * u;
        b2 += 2.0 * k * r * v;
        a11 += k * u * u;
        a12 += 2.0 * k * u * v;
        a22 += k * v * v;
    }
    let mut worst: f64 = 0.0;
    for row in 0..31 {
        for col in 0..31 {
            let (al, be) = (-1.0 + col as f64 / 15.0, -1.0 + row as f64 / 15.0);
            let f = f0 + b1 * al + b2 * be + a11 * al * al + a12 * al * be + a22 * be * be;
            let i = grid.index(row, col);
            worst = worst.max((grid.total_loss[i] - f).abs()).max((grid.reward[i] + f).abs());
        }
    }
    report(
        6,
        "analytic landscape oracle",
        worst <= 1e-10 && grid.valid.iter().all(|v| *v),
        started,
        format!("max abs deviation {worst:.2e} over 31x31 cells"),
    );
}

// ---------------------------------------------------------------------------
// 7. Cosine similarity grows with batch size.

#[test]
fn criterion_07_gradient_quality() {
    let files = pendulum_checkpoints(ActuationKind::Torque, 0);
    let started = Instant::now();
    let ckpt = load_checkpoint(files.last().unwrap()).unwrap();
    let mut increasing = 0;
    let mut lines = Vec::new();
    for rep in 0..10u64 {
        let cfg = GradSimConfig {
            oracle_samples: 200_000,
            batch_sizes: vec![64, 512, 4096],
            terms: vec![LossTerm::Total],
            mode: CompareMode::Oracle,
            seed: 700 + rep,
            ..GradSimConfig::default()
        };
        let recs = analyze_checkpoint(&Sequential, &ckpt, &cfg).unwrap();
        let cos: Vec<f64> = recs.iter().map(|r| r.mean_cos).collect();
        if cos.windows(2).all(|w| w[1] > w[0]) {
            increasing += 1;
        }
        lines.push(format!("{:.3}/{:.3}/{:.3}", cos[0], cos[1], cos[2]));
    }
    let p = sign_test_p(increasing, 10);
    println!("criterion 7 detail: mean cosines per repeat {}", lines.join(" "));
    let secs = started.elapsed().as_secs_f64();
    report(
        7,
        "gradient-quality statistics",
        increasing >= 9 && p < 0.05 && secs < 900.0,
        started,
        format!("strictly increasing in {increasing}/10 repeats, sign test p = {p:.4}"),
    );
}

// ---------------------------------------------------------------------------
// 8. Learning at desk scale.

#[test]
fn criterion_08_learning() {
    let runs = pendulum_runs();
    let started = Instant::now();
    let finals = |kind: ActuationKind| -> Vec<f64> {
        (0..PENDULUM_SEEDS)
            .map(|s| {
                let curve = actlab::tables::read_curves(
                    &run_dir(&runs.root, &runs.cfg.name, kind, s).join("curves.csv"),
                )
                .unwrap();
                curve.last().unwrap().mean_return
            })
            .collect()
    };
    let tc = finals(ActuationKind::Torque);
    let env = runs.cfg.env.clone();
    let act = ActuationConfig::torque().resolve(&env).unwrap();
    let baseline = random_policy_baseline(&Sequential, &env, &act, 100, 0, runs.cfg.ppo.gamma).unwrap();
    let threshold = baseline.mean_return + 5.0 * std_sample(&tc);
    let svg = std::fs::read_to_string(runs.root.join(&runs.cfg.name).join("curves.svg")).unwrap();
    let modes_plotted = ["torque", "velocity", "position"].iter().all(|m| svg.contains(m))
        && svg.matches("class=\"mean\"").count() == 3;
    let others: Vec<String> = [ActuationKind::Velocity, ActuationKind::Position]
        .into_iter()
        .map(|k| format!("{} {:.1}", k.name(), mean(&finals(k))))
        .collect();
    let total = runs.seconds + started.elapsed().as_secs_f64();
    report(
        8,
        "learning at desk scale",
        mean(&tc) >= threshold && modes_plotted && total < 1800.0,
        started,
        format!(
            "torque final {:.1} vs threshold {:.1} (random {:.1}, seed std {:.1}); {}; curves for 3 modes {}; training {:.0}s",
            mean(&tc),
            threshold,
            baseline.mean_return,
            std_sample(&tc),
            others.join(", "),
            modes_plotted,
            runs.seconds
        ),
    );
}

// ---------------------------------------------------------------------------
// 9. Large-batch training gradients agree with fresh estimates.

#[test]
fn criterion_09_large_batch_mode() {
    let started = Instant::now();
    let env = EnvConfig::JointSpaceReacher(ReacherParams::default());
    let run = |seed: u64, large: bool| {
        let mut ppo = PpoConfig {
            checkpoint_count: 5,
            eval_episodes: 5,
            eval_every: 5,
            ..PpoConfig::default()
        };
        if large {
            ppo.gradient_batch_override = Some(10_000);
            ppo.total_env_steps = 100_000;
        } else {
            ppo.total_env_steps = 10 * 2048;
        }
        let setup = TrainSetup::new(env.clone(), ActuationConfig::torque(), ppo, seed);
        let out = train(setup, &Sequential).unwrap();
        let cfg = GradSimConfig {
            batch_sizes: vec![if large { 10_000 } else { 64 }],
            n_estimates: 6,
            terms: vec![LossTerm::Total],
            mode: CompareMode::Pairwise,
            seed: 900 + seed,
            ..GradSimConfig::default()
        };
        analyze_run(&Sequential, &out.checkpoints, &cfg).unwrap()
    };
    let mut ok = true;
    let mut lines = Vec::new();
    for seed in 0..3 {
        let big = run(seed, true);
        let small = run(seed, false);
        ok &= big.len() == small.len() && !big.is_empty();
        for (b, s) in big.iter().zip(&small) {
            ok &= b.mean_cos > s.mean_cos;
            lines.push(format!("{:.3}>{:.3}", b.mean_cos, s.mean_cos));
        }
    }
    report(
        9,
        "large-batch gradient mode",
        ok,
        started,
        format!("pairwise cosines large vs 64 per checkpoint: {}", lines.join(" ")),
    );
}

// ---------------------------------------------------------------------------
// 10. Ideal position control.

#[test]
fn criterion_10_ideal_position() {
    let started = Instant::now();
    let env = EnvConfig::JointSpaceReacher(ReacherParams::default());
    let actuation = ActuationConfig::new(ActuationKind::IdealPosition, ControllerGains::default());
    let act = actuation.resolve(&env).unwrap();
    let (lo, hi) = (act.bounds.low.clone(), act.bounds.high.clone());
    let dof = lo.len();
    let scripted = |obs: &[f64]| -> Vec<f64> {
        // obs = (q, q_target, q̇, Δq)
        (0..dof).map(|j| 2.0 * (obs[dof + j] - lo[j]) / (hi[j] - lo[j]) - 1.0).collect()
    };
    let ppo = PpoConfig {
        total_env_steps: 50_000,
        ..PpoConfig::default()
    };
    let gamma = ppo.gamma;
    let episodes = ppo.eval_episodes;

    let mut zero_after_first = true;
    let mut reached = 0;
    let mut lines = Vec::new();
    for seed in 0..5u64 {
        // scripted and random policies on the evaluation episodes of this seed
        let mut scripted_returns = Vec::new();
        let mut random_returns = Vec::new();
        for i in 0..episodes as u64 {
            let reset = derive_seed(seed, &[purpose::EVAL, i, 0]);
            let ep = run_episode(&env, &act, reset, gamma, |obs, _| Ok(scripted(obs))).unwrap();
            zero_after_first &= ep.return_after_first == 0.0;
            scripted_returns.push(ep.total_return);
            let mut rng = Stream::derived(seed, &[purpose::BASELINE, i]);
            let ep = run_episode(&env, &act, reset, gamma, |_, _| {
                Ok((0..dof).map(|_| rng.uniform_in(-1.0, 1.0)).collect())
            })
            .unwrap();
            random_returns.push(ep.total_return);
        }
        let (best_possible, random) = (mean(&scripted_returns), mean(&random_returns));
        let out = train(TrainSetup::new(env.clone(), actuation.clone(), ppo.clone(), seed), &Sequential).unwrap();
        let best = out
            .curve
            .iter()
            .filter(|p| p.env_step <= 50_000)
            .map(|p| p.mean_return)
            .fold(f64::NEG_INFINITY, f64::max);
        let score = (best - random) / (best_possible - random);
        if score >= 0.9 {
            reached += 1;
        }
        lines.push(format!("seed {seed}: {best:.2} vs scripted {best_possible:.2}, random {random:.2}, score {score:.3}"));
    }
    println!("criterion 10 detail: {}", lines.join("; "));
    report(
        10,
        "ideal position control",
        zero_after_first && reached >= 3,
        started,
        format!("scripted reward exactly 0 after first step {zero_after_first}; {reached}/5 seeds reach 90% of the scripted-vs-random gap"),
    );
}

// ---------------------------------------------------------------------------
// 11. Direction seeds change the picture only slightly.

#[test]
fn criterion_11_direction_seed() {
    let files = pendulum_checkpoints(ActuationKind::Torque, 0);
    let started = Instant::now();
    let ckpt = load_checkpoint(files.last().unwrap()).unwrap();
    let objective = CheckpointObjective::new(&ckpt).unwrap();
    let base = LandscapeConfig::default();
    let a = compute_grid(&Sequential, &objective, &LandscapeConfig { direction_seed: 1, ..base.clone() }, "a").unwrap();
    let b = compute_grid(&Sequential, &objective, &LandscapeConfig { direction_seed: 2, ..base }, "b").unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for s in Surface::ALL {
        let (x, y) = (a.summary(s), b.summary(s));
        let d = x.max_relative_difference(&y);
        ok &= d <= 0.2;
        parts.push(format!(
            "{} {:.3} [min {:.4}/{:.4}, max {:.4}/{:.4}, near-center {:.4}/{:.4}]",
            s.name(),
            d,
            x.min,
            y.min,
            x.max,
            y.max,
            x.near_center_fraction,
            y.near_center_fraction
        ));
    }
    report(
        11,
        "direction-seed reproducibility",
        ok,
        started,
        format!("max relative summary difference: {}", parts.join(", ")),
    );
}
