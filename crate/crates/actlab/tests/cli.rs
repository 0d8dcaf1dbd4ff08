use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
name = "tiny"
seeds = [0]
modes = [{ kind = "torque" }]
[ppo]
total_env_steps = 1024
n_steps = 256
checkpoint_count = 2
eval_episodes = 2
[landscape]
resolution = 5
samples_per_cell = 200
[gradsim]
oracle_samples = 1024
n_estimates = 3
batch_sizes = [32, 256]
"#;

fn actlab(args: &[&str], output_root: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_actlab"))
        .args(args)
        .env("ACTLAB_OUTPUT", output_root)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("exp.toml");
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bogus = 1\n");
    let o = actlab(&["train", "--config", &bad], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("bogus"));

    let o = actlab(&["reproduce", "fig42"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("fig1, fig2, fig3, fig6, fig7"));

    assert_eq!(code(&actlab(&["train"], dir.path())), 2);
    let good = write_config(dir.path(), TINY);
    assert_eq!(code(&actlab(&["train", "--config", &good, "--seeds", "5..2"], dir.path())), 2);
}

#[test]
fn missing_files_exit_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.toml");
    let o = actlab(&["train", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 4);
    let o = actlab(&["landscape", "--run", dir.path().join("nowhere").to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 4);
}

#[test]
fn non_finite_dynamics_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{TINY}\n[env]\nid = \"pendulum\"\nmax_speed = inf\ng = 1e308\n"));
    let o = actlab(&["train", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn train_landscape_gradsim_plot_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("out");
    let cfg = write_config(dir.path(), TINY);

    // the environment variable sets the output root
    let o = actlab(&["train", "--config", &cfg], &root);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run = root.join("tiny/torque/seed_0");
    let curves = std::fs::read(run.join("curves.csv")).unwrap();
    assert!(run.join("config.snapshot").is_file());
    assert_eq!(std::fs::read_dir(run.join("checkpoints")).unwrap().count(), 2);
    assert!(root.join("tiny/curves.svg").is_file());

    // existing outputs are protected unless --force
    assert_eq!(code(&actlab(&["train", "--config", &cfg], &root)), 2);
    assert_eq!(code(&actlab(&["train", "--config", &cfg, "--force"], &root)), 0);
    assert_eq!(std::fs::read(run.join("curves.csv")).unwrap(), curves);

    // --output beats the environment variable
    let other = dir.path().join("other");
    let o = actlab(&["train", "--config", &cfg, "--output", other.to_str().unwrap()], &root);
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read(other.join("tiny/torque/seed_0/curves.csv")).unwrap(), curves);

    // worker count does not change landscape or gradsim outputs
    let run_s = run.to_str().unwrap();
    let mut grids = Vec::new();
    let mut records = Vec::new();
    for w in ["1", "3"] {
        let o = actlab(&["landscape", "--run", run_s, "--workers", w, "--force"], &root);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let ck = std::fs::read_dir(run.join("landscape")).unwrap().next().unwrap().unwrap().path();
        grids.push(std::fs::read(ck.join("grid.csv")).unwrap());
        for f in ["reward.svg", "total_loss.svg", "meta.json"] {
            assert!(ck.join(f).is_file());
        }
        let o = actlab(&["gradsim", "--run", run_s, "--workers", w, "--force"], &root);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        records.push(std::fs::read(run.join("gradsim/records.csv")).unwrap());
    }
    assert_eq!(grids[0], grids[1]);
    assert_eq!(records[0], records[1]);

    let grid = std::fs::read_dir(run.join("landscape")).unwrap().next().unwrap().unwrap().path().join("grid.csv");
    let svg = dir.path().join("h.svg");
    let o = actlab(
        &["plot", "heatmap", "--grid", grid.to_str().unwrap(), "--column", "value_loss", "--negate", "--out", svg.to_str().unwrap()],
        &root,
    );
    assert_eq!(code(&o), 0);
    assert_eq!(std::fs::read_to_string(&svg).unwrap().matches("class=\"cell\"").count(), 25);

    let input = format!("tc={}", run.join("curves.csv").display());
    let chart = dir.path().join("c.svg");
    let o = actlab(&["plot", "curves", "--input", &input, "--out", chart.to_str().unwrap()], &root);
    assert_eq!(code(&o), 0);
    assert!(std::fs::read_to_string(&chart).unwrap().starts_with("<svg"));
}

#[test]
fn tune_gains_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "name = \"g\"\nmodes = [{ kind = \"velocity\" }, { kind = \"position\" }]\n");
    let o = actlab(&["tune-gains", "--config", &cfg], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["gains_pendulum_velocity.csv", "gains_pendulum_position.json"] {
        assert!(dir.path().join("g").join(f).is_file());
    }
}
