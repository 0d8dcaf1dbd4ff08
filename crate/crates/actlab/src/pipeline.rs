//! Run directories and the experiment pipelines built on them.
//!
//! ```text
//! <root>/<experiment>/<mode>/seed_<seed>/
//!     config.snapshot
//!     curves.csv
//!     checkpoints/ckpt_<env_step>.bin
//!     landscape/<checkpoint>/grid.csv, meta.json, *.svg
//!     gradsim/records.csv, *.svg
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use actlab_core::actuation::{default_gain_grid, tune_gains, ActuationKind, TuneReport};
use actlab_core::gradsim::{analyze_run, GradQualityRecord, GradSimConfig};
use actlab_core::landscape::{compute_grid, CheckpointObjective, LandscapeConfig, LandscapeGrid, Surface};
use actlab_core::ppo::{Checkpoint, CurvePoint, LossTerm, TrainSetup, Trainer};
use actlab_core::{Error as CoreError, Executor};
use serde::{Deserialize, Serialize};

use crate::checkpoint_file::{load_checkpoint, save_checkpoint};
use crate::config::{ExperimentConfig, ModeConfig};
use crate::error::{AppError, Result};
use crate::plot::{render_grad_quality, render_heatmap, write_text, HeatmapOptions, PlotKind, PlotSpec, XAxis};
use crate::tables::{
    read_grid_surface, write_csv, write_curves, write_grid, write_json, write_records, GridMeta,
};

pub const SNAPSHOT_FILE: &str = "config.snapshot";
pub const CURVES_FILE: &str = "curves.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

pub fn run_dir(root: &Path, experiment: &str, mode: ActuationKind, seed: u64) -> PathBuf {
    root.join(experiment).join(mode.name()).join(format!("seed_{seed}"))
}

/// What `config.snapshot` holds: the resolved experiment and the exact
/// setup of this run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSnapshot {
    pub experiment: ExperimentConfig,
    pub run: TrainSetup,
}

fn io<T>(path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|e| AppError::io(path, e))
}

/// Creates `dir`, refusing to reuse an existing one unless `force` is set
/// (in which case it is emptied first).
pub fn prepare_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        if !force {
            return Err(AppError::config(format!(
                "{} already exists; pass --force to overwrite",
                dir.display()
            )));
        }
        io(dir, fs::remove_dir_all(dir))?;
    }
    io(dir, fs::create_dir_all(dir))
}

fn numeric_abort(dir: &Path, e: CoreError) -> AppError {
    match e {
        CoreError::NumericAbort { message, dump } => {
            let path = dir.join("numeric_abort.csv");
            if let Err(err) = fs::write(&path, dump) {
                return AppError::io(&path, err);
            }
            AppError::NumericAbort { message, dump: path }
        }
        other => other.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub mode: ActuationKind,
    pub seed: u64,
    pub curve: Vec<CurvePoint>,
    pub checkpoints: Vec<PathBuf>,
}

/// Trains one (mode, seed) run into its run directory.
pub fn train_run<E: Executor + ?Sized>(
    exec: &E,
    cfg: &ExperimentConfig,
    mode: &ModeConfig,
    seed: u64,
    root: &Path,
    force: bool,
) -> Result<RunSummary> {
    let dir = run_dir(root, &cfg.name, mode.kind, seed);
    prepare_dir(&dir, force)?;
    let setup = cfg.setup(mode, seed);
    let snapshot = RunSnapshot {
        experiment: cfg.clone(),
        run: setup.clone(),
    };
    let text = toml::to_string(&snapshot).map_err(|e| AppError::Other(e.to_string()))?;
    write_text(&dir.join(SNAPSHOT_FILE), &text)?;

    let mut trainer = Trainer::new(setup)?;
    let ckpt_dir = dir.join(CHECKPOINT_DIR);
    let mut saved = Vec::new();
    let mut save_error = None;
    let result = trainer.run_until(exec, u64::MAX, |c| match save_to(&ckpt_dir, &c) {
        Ok(path) => {
            saved.push(path);
            Ok(())
        }
        Err(e) => {
            save_error = Some(e);
            Err(CoreError::Config("checkpoint save failed".into()))
        }
    });
    if let Some(e) = save_error {
        return Err(e);
    }
    let curve = result.map_err(|e| numeric_abort(&dir, e))?;
    if saved.is_empty() {
        saved.push(save_to(&ckpt_dir, &trainer.checkpoint())?);
    }
    write_curves(&dir.join(CURVES_FILE), &curve)?;
    Ok(RunSummary {
        dir,
        mode: mode.kind,
        seed,
        curve,
        checkpoints: saved,
    })
}

fn save_to(dir: &Path, c: &Checkpoint) -> Result<PathBuf> {
    let path = dir.join(format!("{}.bin", c.label()));
    save_checkpoint(&path, c)?;
    Ok(path)
}

/// All (mode, seed) runs of an experiment plus a combined curve plot.
pub fn train_experiment<E: Executor + ?Sized>(
    exec: &E,
    cfg: &ExperimentConfig,
    root: &Path,
    force: bool,
    mut progress: impl FnMut(&RunSummary),
) -> Result<Vec<RunSummary>> {
    let mut out = Vec::new();
    for mode in &cfg.modes {
        let mut curves = Vec::new();
        for &seed in &cfg.seeds {
            let s = train_run(exec, cfg, mode, seed, root, force)?;
            progress(&s);
            curves.extend(s.curve.iter().copied());
            out.push(s);
        }
        write_curves(&root.join(&cfg.name).join(mode.kind.name()).join(CURVES_FILE), &curves)?;
    }
    plot_experiment_curves(cfg, root)?;
    Ok(out)
}

/// `<root>/<experiment>/curves.svg`: mean ± std per mode.
pub fn plot_experiment_curves(cfg: &ExperimentConfig, root: &Path) -> Result<Vec<String>> {
    let base = root.join(&cfg.name);
    let axis = if cfg.ppo.gradient_batch_override.is_some() {
        XAxis::GradientSteps
    } else {
        XAxis::EnvSteps
    };
    PlotSpec {
        kind: PlotKind::LearningCurves { axis },
        inputs: cfg
            .modes
            .iter()
            .map(|m| (m.kind.name().to_string(), base.join(m.kind.name()).join(CURVES_FILE)))
            .collect(),
        title: format!("{} ({})", cfg.name, cfg.env.name()),
        output: base.join("curves.svg"),
    }
    .render()
}

/// Checkpoint files of a run, in env-step order.
pub fn list_checkpoints(run: &Path) -> Result<Vec<PathBuf>> {
    let dir = run.join(CHECKPOINT_DIR);
    let mut files: Vec<PathBuf> = io(&dir, fs::read_dir(&dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "bin"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(AppError::config(format!("no checkpoints in {}", dir.display())));
    }
    Ok(files)
}

/// Resolves `latest`, a label like `ckpt_000004096`, or a file path.
pub fn find_checkpoint(run: &Path, which: &str) -> Result<PathBuf> {
    let all = list_checkpoints(run)?;
    if which == "latest" {
        return Ok(all.last().expect("non-empty").clone());
    }
    let p = PathBuf::from(which);
    if p.is_file() {
        return Ok(p);
    }
    all.iter()
        .find(|f| f.file_stem().is_some_and(|s| s == which))
        .cloned()
        .ok_or_else(|| {
            let names: Vec<String> = all
                .iter()
                .filter_map(|f| f.file_stem().map(|s| s.to_string_lossy().into_owned()))
                .collect();
            AppError::config(format!("no checkpoint '{which}'; available: {}", names.join(", ")))
        })
}

/// Computes and writes a landscape for one checkpoint of a run.
pub fn landscape_for<E: Executor + ?Sized>(
    exec: &E,
    ckpt_path: &Path,
    out_root: &Path,
    cfg: &LandscapeConfig,
    force: bool,
) -> Result<LandscapeGrid> {
    let ckpt = load_checkpoint(ckpt_path)?;
    let objective = CheckpointObjective::new(&ckpt)?;
    let label = ckpt.label();
    let dir = out_root.join("landscape").join(&label);
    prepare_dir(&dir, force)?;
    let grid = compute_grid(exec, &objective, cfg, &label)?;
    write_grid(&dir.join("grid.csv"), &grid)?;
    write_json(
        &dir.join("meta.json"),
        &GridMeta {
            checkpoint: label.clone(),
            env_step: ckpt.env_step,
            config: cfg.clone(),
            coordinates: grid.coordinates.clone(),
            d1: grid.d1.clone(),
            d2: grid.d2.clone(),
            setup: ckpt.setup.clone(),
        },
    )?;
    for s in Surface::ALL {
        let surface = read_grid_surface(&dir.join("grid.csv"), s.name())?;
        let negate = s != Surface::Reward;
        let title = if negate {
            format!("negated {} at {label}", s.name())
        } else {
            format!("discounted return at {label}")
        };
        let svg = render_heatmap(
            &surface,
            &HeatmapOptions {
                title,
                negate,
                span: cfg.span,
            },
        );
        write_text(&dir.join(format!("{}.svg", s.name())), &svg)?;
    }
    Ok(grid)
}

/// Gradient-quality analysis over all checkpoints of a run.
pub fn gradsim_for<E: Executor + ?Sized>(
    exec: &E,
    run: &Path,
    cfg: &GradSimConfig,
    force: bool,
) -> Result<Vec<GradQualityRecord>> {
    let series = list_checkpoints(run)?
        .iter()
        .map(|p| load_checkpoint(p))
        .collect::<Result<Vec<_>>>()?;
    let dir = run.join("gradsim");
    prepare_dir(&dir, force)?;
    let records = analyze_run(exec, &series, cfg)?;
    write_records(&dir.join("records.csv"), &records)?;
    for term in &cfg.terms {
        let svg = render_grad_quality(&records, *term, &format!("{} loss gradient quality", term.name()));
        write_text(&dir.join(format!("{}.svg", term.name())), &svg)?;
    }
    Ok(records)
}

/// Tunes gains for each velocity/position mode and writes the tables.
pub fn tune_gains_for(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<(ActuationKind, TuneReport)>> {
    let mut reports = Vec::new();
    for m in &cfg.modes {
        if !matches!(m.kind, ActuationKind::Velocity | ActuationKind::Position) {
            continue;
        }
        let report = tune_gains(
            &cfg.env,
            m.kind,
            &default_gain_grid(m.kind),
            m.bounds.as_ref(),
            cfg.env.spec().horizon,
            crate::config::TUNE_SEED,
        )?;
        let path = out.join(format!("gains_{}_{}.csv", cfg.env.name(), m.kind.name()));
        write_csv(
            &path,
            &["kd_vc", "kp_pc", "kd_pc", "tracking_error"],
            report.table.iter().map(|(g, e)| {
                vec![
                    crate::tables::fmt_f64(g.kd_vc),
                    crate::tables::fmt_f64(g.kp_pc),
                    crate::tables::fmt_f64(g.kd_pc),
                    crate::tables::fmt_f64(*e),
                ]
            }),
        )?;
        write_json(
            &out.join(format!("gains_{}_{}.json", cfg.env.name(), m.kind.name())),
            &report.selected,
        )?;
        reports.push((m.kind, report));
    }
    if reports.is_empty() {
        return Err(AppError::config("no velocity or position mode to tune"));
    }
    Ok(reports)
}

// ---------------------------------------------------------------------------
// Canned figure pipelines

pub const FIGURES: [(&str, &str); 5] = [
    ("fig1", "learning curves per action representation (pendulum, reacher)"),
    ("fig2", "reward and negated-loss surfaces per action representation (reacher)"),
    ("fig3", "gradient quality per loss term over training (reacher)"),
    ("fig6", "learning curves with large-batch gradient estimates (reacher)"),
    ("fig7", "joint-space reacher learning curves including ideal position control"),
];

/// Options shared by the canned pipelines.
#[derive(Debug, Clone)]
pub struct ReproduceOptions {
    pub root: PathBuf,
    pub seeds: Vec<u64>,
    pub force: bool,
    pub desk_scale: bool,
}

fn experiment(name: &str, env: &str, modes: &[ActuationKind], opts: &ReproduceOptions) -> Result<ExperimentConfig> {
    let mut c = ExperimentConfig::parse(&format!(
        "name = \"{name}\"\ndesk_scale = {}\nenv = {{ id = \"{env}\" }}\n",
        opts.desk_scale
    ))?;
    c.modes = modes.iter().map(|k| ModeConfig::new(*k)).collect();
    c.seeds = opts.seeds.clone();
    c.resolve()
}

const TC_VC_PC: [ActuationKind; 3] = [ActuationKind::Torque, ActuationKind::Velocity, ActuationKind::Position];

/// Runs a canned pipeline; returns `(description, path)` pairs of the
/// produced artifacts.
pub fn reproduce<E: Executor + ?Sized>(
    exec: &E,
    figure: &str,
    opts: &ReproduceOptions,
    mut log: impl FnMut(&str),
) -> Result<Vec<(String, PathBuf)>> {
    let root = &opts.root;
    let mut files = Vec::new();
    let train = |cfg: &ExperimentConfig, log: &mut dyn FnMut(&str)| {
        train_experiment(exec, cfg, root, opts.force, |s| {
            log(&format!("trained {} seed {} -> {}", s.mode.name(), s.seed, s.dir.display()))
        })
    };
    match figure {
        "fig1" => {
            for env in ["pendulum", "reacher"] {
                let cfg = experiment(&format!("fig1_{env}"), env, &TC_VC_PC, opts)?;
                train(&cfg, &mut log)?;
                files.push((format!("{env} learning curves"), root.join(&cfg.name).join("curves.svg")));
            }
        }
        "fig2" => {
            let mut cfg = experiment("fig2_reacher", "reacher", &TC_VC_PC, opts)?;
            cfg.seeds.truncate(1);
            train(&cfg, &mut log)?;
            for m in &cfg.modes {
                let run = run_dir(root, &cfg.name, m.kind, cfg.seeds[0]);
                let ck = find_checkpoint(&run, "latest")?;
                log(&format!("landscape for {}", ck.display()));
                let g = landscape_for(exec, &ck, &run, &cfg.landscape, true)?;
                let dir = run.join("landscape").join(&g.checkpoint);
                files.push((format!("{} reward surface", m.kind.name()), dir.join("reward.svg")));
                files.push((format!("{} negated loss surface", m.kind.name()), dir.join("total_loss.svg")));
            }
        }
        "fig3" => {
            let mut cfg = experiment("fig3_reacher", "reacher", &TC_VC_PC, opts)?;
            cfg.seeds.truncate(1);
            train(&cfg, &mut log)?;
            for m in &cfg.modes {
                let run = run_dir(root, &cfg.name, m.kind, cfg.seeds[0]);
                log(&format!("gradient analysis for {}", run.display()));
                gradsim_for(exec, &run, &cfg.gradsim, true)?;
                for t in LossTerm::ALL {
                    files.push((
                        format!("{} {} loss gradient quality", m.kind.name(), t.name()),
                        run.join("gradsim").join(format!("{}.svg", t.name())),
                    ));
                }
            }
        }
        "fig6" => {
            for large in [false, true] {
                let name = if large { "fig6_reacher_large_batch" } else { "fig6_reacher_batch64" };
                let mut cfg = experiment(name, "reacher", &TC_VC_PC, opts)?;
                if large {
                    cfg.ppo.gradient_batch_override = Some(cfg.large_batch());
                }
                train(&cfg, &mut log)?;
                // both plotted against gradient steps
                let base = root.join(&cfg.name);
                PlotSpec {
                    kind: PlotKind::LearningCurves {
                        axis: XAxis::GradientSteps,
                    },
                    inputs: cfg
                        .modes
                        .iter()
                        .map(|m| (m.kind.name().to_string(), base.join(m.kind.name()).join(CURVES_FILE)))
                        .collect(),
                    title: name.to_string(),
                    output: base.join("curves_gradient_steps.svg"),
                }
                .render()?;
                files.push((format!("{name} learning curves"), base.join("curves_gradient_steps.svg")));
            }
        }
        "fig7" => {
            let mut modes = TC_VC_PC.to_vec();
            modes.push(ActuationKind::IdealPosition);
            let cfg = experiment("fig7_joint_space_reacher", "joint_space_reacher", &modes, opts)?;
            train(&cfg, &mut log)?;
            files.push(("joint-space reacher learning curves".into(), root.join(&cfg.name).join("curves.svg")));
        }
        other => {
            let ids: Vec<&str> = FIGURES.iter().map(|(id, _)| *id).collect();
            return Err(AppError::config(format!(
                "unknown figure '{other}'; valid ids: {}",
                ids.join(", ")
            )));
        }
    }
    Ok(files)
}
