//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use actlab_core::actuation::ActuationKind;
use actlab_core::gradsim::{CompareMode, GradSimConfig};
use actlab_core::landscape::LandscapeConfig;
use actlab_core::ppo::LossTerm;
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{parse_seeds, ExperimentConfig, ModeConfig, OUTPUT_ROOT_ENV};
use crate::error::{AppError, ExitCode, Result};
use crate::exec::Threads;
use crate::pipeline::{self, ReproduceOptions, RunSnapshot, FIGURES, SNAPSHOT_FILE};
use crate::plot::{PlotKind, PlotSpec, XAxis};

#[derive(Debug, Parser)]
#[command(name = "actlab", version, about = "PPO experiments on action representations for robot control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train every (mode, seed) run of an experiment config.
    Train(TrainArgs),
    /// Evaluate the reward and loss surfaces around a checkpoint.
    Landscape(LandscapeArgs),
    /// Measure gradient-estimate quality over a run's checkpoints.
    Gradsim(GradsimArgs),
    /// Pick velocity/position controller gains by tracking error.
    TuneGains(TuneArgs),
    /// Run a canned figure pipeline end to end.
    Reproduce(ReproduceArgs),
    /// Render an SVG from result tables.
    Plot(PlotArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Output root; overrides $ACTLAB_OUTPUT and the config.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Overwrite existing outputs.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Seeds: N, A..B or A,B,C.
    #[arg(long)]
    pub seeds: Option<String>,
    /// Restrict to these modes (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub modes: Vec<String>,
    #[arg(long)]
    pub total_env_steps: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct LandscapeArgs {
    /// Run directory (…/<mode>/seed_<n>).
    #[arg(long)]
    pub run: PathBuf,
    /// `latest`, a checkpoint label or a checkpoint file.
    #[arg(long, default_value = "latest")]
    pub checkpoint: String,
    /// Compute every checkpoint of the run.
    #[arg(long, conflicts_with = "checkpoint")]
    pub all: bool,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub span: Option<f64>,
    #[arg(long)]
    pub samples_per_cell: Option<usize>,
    #[arg(long)]
    pub direction_seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Oracle,
    Pairwise,
}

#[derive(Debug, Args)]
pub struct GradsimArgs {
    #[arg(long)]
    pub run: PathBuf,
    #[arg(long, value_delimiter = ',')]
    pub batch_sizes: Vec<usize>,
    #[arg(long)]
    pub n_estimates: Option<usize>,
    #[arg(long)]
    pub oracle_samples: Option<usize>,
    /// Loss terms: total, policy, value (comma separated).
    #[arg(long, value_delimiter = ',')]
    pub terms: Vec<String>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Figure id; run with `list` to see them.
    pub figure: String,
    #[arg(long, default_value = "0..3")]
    pub seeds: String,
    /// Use the full-scale sample counts instead of the desk defaults.
    #[arg(long)]
    pub full_scale: bool,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AxisArg {
    EnvSteps,
    GradientSteps,
}

#[derive(Debug, Subcommand)]
pub enum PlotCommand {
    /// Heatmap of one column of a landscape grid CSV.
    Heatmap {
        #[arg(long)]
        grid: PathBuf,
        #[arg(long, default_value = "reward")]
        column: String,
        /// Plot the negated value (losses).
        #[arg(long)]
        negate: bool,
        #[arg(long, default_value_t = 1.0)]
        span: f64,
        #[arg(long)]
        title: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Mean ± std learning curves from one or more curves CSVs.
    Curves {
        /// `label=path` pairs.
        #[arg(long = "input", required = true)]
        inputs: Vec<String>,
        #[arg(long, value_enum, default_value = "env-steps")]
        axis: AxisArg,
        #[arg(long, default_value = "learning curves")]
        title: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[command(subcommand)]
    pub command: PlotCommand,
}

fn output_root(flag: Option<&Path>, cfg: Option<&ExperimentConfig>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    match cfg {
        Some(c) => c.resolved_output_root(),
        None => match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => PathBuf::from("runs"),
        },
    }
}

fn threads(workers: Option<usize>, fallback: usize) -> Result<Threads> {
    Threads::new(workers.unwrap_or(fallback)).map_err(|e| AppError::Other(e.to_string()))
}

fn parse_kind(s: &str) -> Result<ActuationKind> {
    ActuationKind::from_name(s.trim()).ok_or_else(|| {
        AppError::config(format!(
            "unknown mode '{s}' (torque, velocity, position, ideal_position)"
        ))
    })
}

fn parse_term(s: &str) -> Result<LossTerm> {
    LossTerm::ALL
        .into_iter()
        .find(|t| t.name() == s.trim())
        .ok_or_else(|| AppError::config(format!("unknown loss term '{s}' (total, policy, value)")))
}

fn read_snapshot(run: &Path) -> Result<RunSnapshot> {
    let path = run.join(SNAPSHOT_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| AppError::io(&path, e))?;
    toml::from_str(&text).map_err(|e| AppError::config(format!("{}: {e}", path.display())))
}

fn train(a: TrainArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&a.config)?;
    if let Some(s) = &a.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if !a.modes.is_empty() {
        let kinds = a.modes.iter().map(|m| parse_kind(m)).collect::<Result<Vec<_>>>()?;
        cfg.modes = kinds
            .into_iter()
            .map(|k| cfg.mode(k).cloned().unwrap_or_else(|| ModeConfig::new(k)))
            .collect();
    }
    if let Some(n) = a.total_env_steps {
        cfg.ppo.total_env_steps = n;
    }
    let cfg = cfg.resolve()?;
    let root = output_root(a.common.output.as_deref(), Some(&cfg));
    let exec = threads(a.common.workers, cfg.workers)?;
    pipeline::train_experiment(&exec, &cfg, &root, a.common.force, |s| {
        let last = s.curve.last().map(|p| p.mean_return).unwrap_or(f64::NAN);
        println!("{} seed {}: final return {last:.3} ({})", s.mode.name(), s.seed, s.dir.display());
    })?;
    println!("curves: {}", root.join(&cfg.name).join("curves.svg").display());
    Ok(())
}

fn landscape(a: LandscapeArgs) -> Result<()> {
    let snap = read_snapshot(&a.run)?;
    let mut cfg: LandscapeConfig = snap.experiment.landscape.clone();
    if let Some(v) = a.resolution {
        cfg.resolution = v;
    }
    if let Some(v) = a.span {
        cfg.span = v;
    }
    if let Some(v) = a.samples_per_cell {
        cfg.samples_per_cell = v;
    }
    if let Some(v) = a.direction_seed {
        cfg.direction_seed = v;
    }
    cfg.validate()?;
    let out = a.common.output.clone().unwrap_or_else(|| a.run.clone());
    let exec = threads(a.common.workers, snap.experiment.workers)?;
    let targets = if a.all {
        pipeline::list_checkpoints(&a.run)?
    } else {
        vec![pipeline::find_checkpoint(&a.run, &a.checkpoint)?]
    };
    for ck in targets {
        let g = pipeline::landscape_for(&exec, &ck, &out, &cfg, a.common.force)?;
        let s = g.summary(actlab_core::landscape::Surface::Reward);
        println!(
            "{}: reward in [{:.4}, {:.4}] -> {}",
            g.checkpoint,
            s.min,
            s.max,
            out.join("landscape").join(&g.checkpoint).display()
        );
    }
    Ok(())
}

fn gradsim(a: GradsimArgs) -> Result<()> {
    let snap = read_snapshot(&a.run)?;
    let mut cfg: GradSimConfig = snap.experiment.gradsim.clone();
    if !a.batch_sizes.is_empty() {
        cfg.batch_sizes = a.batch_sizes.clone();
    }
    if let Some(v) = a.n_estimates {
        cfg.n_estimates = v;
    }
    if let Some(v) = a.oracle_samples {
        cfg.oracle_samples = v;
    }
    if !a.terms.is_empty() {
        cfg.terms = a.terms.iter().map(|t| parse_term(t)).collect::<Result<_>>()?;
    }
    if let Some(m) = a.mode {
        cfg.mode = match m {
            ModeArg::Oracle => CompareMode::Oracle,
            ModeArg::Pairwise => CompareMode::Pairwise,
        };
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let exec = threads(a.common.workers, snap.experiment.workers)?;
    let records = pipeline::gradsim_for(&exec, &a.run, &cfg, a.common.force)?;
    for r in &records {
        println!(
            "{} {} batch {}: cos {:.4} ± {:.4}",
            r.checkpoint,
            r.term.name(),
            r.batch_size,
            r.mean_cos,
            r.std_cos
        );
    }
    println!("records: {}", a.run.join("gradsim").join("records.csv").display());
    Ok(())
}

fn tune(a: TuneArgs) -> Result<()> {
    let cfg = ExperimentConfig::load(&a.config)?;
    let root = output_root(a.common.output.as_deref(), Some(&cfg));
    let out = root.join(&cfg.name);
    for (kind, report) in pipeline::tune_gains_for(&cfg, &out)? {
        let g = report.selected;
        match kind {
            ActuationKind::Velocity => println!("velocity: kd_vc = {}", g.kd_vc),
            _ => println!("position: kp_pc = {}, kd_pc = {}", g.kp_pc, g.kd_pc),
        }
    }
    println!("tables: {}", out.display());
    Ok(())
}

fn reproduce(a: ReproduceArgs) -> Result<()> {
    if a.figure == "list" {
        for (id, what) in FIGURES {
            println!("{id}: {what}");
        }
        return Ok(());
    }
    let opts = ReproduceOptions {
        root: output_root(a.common.output.as_deref(), None),
        seeds: parse_seeds(&a.seeds)?,
        force: a.common.force,
        desk_scale: !a.full_scale,
    };
    let exec = threads(a.common.workers, 1)?;
    let files = pipeline::reproduce(&exec, &a.figure, &opts, |m| println!("{m}"))?;
    println!("{}:", a.figure);
    for (what, path) in files {
        println!("  {what}: {}", path.display());
    }
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let spec = match a.command {
        PlotCommand::Heatmap {
            grid,
            column,
            negate,
            span,
            title,
            out,
        } => PlotSpec {
            title: title.unwrap_or_else(|| column.clone()),
            kind: PlotKind::Heatmap { column, negate, span },
            inputs: vec![(String::new(), grid)],
            output: out,
        },
        PlotCommand::Curves {
            inputs,
            axis,
            title,
            out,
        } => {
            let inputs = inputs
                .iter()
                .map(|s| {
                    s.split_once('=')
                        .map(|(l, p)| (l.to_string(), PathBuf::from(p)))
                        .ok_or_else(|| AppError::config(format!("expected label=path, got '{s}'")))
                })
                .collect::<Result<_>>()?;
            PlotSpec {
                kind: PlotKind::LearningCurves {
                    axis: match axis {
                        AxisArg::EnvSteps => XAxis::EnvSteps,
                        AxisArg::GradientSteps => XAxis::GradientSteps,
                    },
                },
                inputs,
                title,
                output: out,
            }
        }
    };
    for w in spec.render()? {
        eprintln!("warning: {w}");
    }
    println!("{}", spec.output.display());
    Ok(())
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train(a) => train(a),
        Command::Landscape(a) => landscape(a),
        Command::Gradsim(a) => gradsim(a),
        Command::TuneGains(a) => tune(a),
        Command::Reproduce(a) => reproduce(a),
        Command::Plot(a) => plot(a),
    }
}

/// Parses `args` and runs the command; usage errors map to the config
/// exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::Config } else { ExitCode::Success };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::Success,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
