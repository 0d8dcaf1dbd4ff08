//! Two-dimensional slices of the return and loss surfaces around a
//! checkpoint.
//!
//! A grid cell at `(α, β)` evaluates the parameters `θ + α·d1 + β·d2`. The
//! return is estimated from fresh stochastic episodes of the perturbed
//! policy; the loss terms are computed on the rollout frozen into the
//! checkpoint, so every cell sees the same data.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::policy::{sample_action, FlatParams};
use crate::ppo::{ppo_loss, run_episode, Batch, Checkpoint, LossTerms, PolicySnapshot};
use crate::rng::{derive_seed, purpose, Stream};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Every parameter block of a direction gets the norm of the matching
    /// block of the parameters.
    FilterWise,
    /// The whole direction has unit length.
    UnitNorm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeConfig {
    pub resolution: usize,
    /// Coordinates run over `[-span, span]` along both directions.
    pub span: f64,
    pub samples_per_cell: usize,
    pub direction_seed: u64,
    pub normalization: Normalization,
}

impl Default for LandscapeConfig {
    fn default() -> Self {
        Self {
            resolution: 31,
            span: 1.0,
            samples_per_cell: 4000,
            direction_seed: 0,
            normalization: Normalization::FilterWise,
        }
    }
}

impl LandscapeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 || self.resolution.is_multiple_of(2) {
            return Err(Error::config("landscape resolution must be odd"));
        }
        if self.samples_per_cell == 0 {
            return Err(Error::config("samples_per_cell must be at least 1"));
        }
        if !(self.span.is_finite() && self.span > 0.0) {
            return Err(Error::config("landscape span must be positive"));
        }
        Ok(())
    }

    /// Grid coordinate of index `i`; the middle index maps to exactly 0.
    pub fn coordinate(&self, i: usize) -> f64 {
        if self.resolution == 1 {
            return 0.0;
        }
        let half = (self.resolution - 1) as f64;
        self.span * ((2.0 * i as f64 - half) / half)
    }
}

/// Two random directions in parameter space, `d2 ⟂ d1`.
///
/// Under [`Normalization::FilterWise`] each block of a Gaussian draw is
/// rescaled to the norm of the matching parameter block (unit norm when that
/// block is all zeros). `d2` is then orthogonalized against `d1` and scaled
/// back to its norm before orthogonalization.
pub fn make_directions(
    params: &FlatParams,
    seed: u64,
    normalization: Normalization,
) -> Result<(FlatParams, FlatParams)> {
    if params.is_empty() {
        return Err(Error::config("cannot draw directions for an empty parameter vector"));
    }
    let draw = |k: u64| {
        let mut rng = Stream::derived(seed, &[purpose::DIRECTIONS, k]);
        let mut d = params.zeros_like();
        d.data.iter_mut().for_each(|x| *x = rng.normal());
        match normalization {
            Normalization::FilterWise => {
                for block in params.layout.blocks() {
                    let r = block.range();
                    let target = crate::math::norm(&params.data[r.clone()]);
                    let target = if target == 0.0 { 1.0 } else { target };
                    let have = crate::math::norm(&d.data[r.clone()]);
                    if have > 0.0 {
                        d.data[r].iter_mut().for_each(|x| *x *= target / have);
                    }
                }
            }
            Normalization::UnitNorm => {
                let n = d.norm();
                d.scale(1.0 / n);
            }
        }
        d
    };
    let d1 = draw(0);
    let mut d2 = draw(1);
    let before = d2.norm();
    let proj = d2.dot(&d1) / d1.dot(&d1);
    d2.axpy(-proj, &d1);
    // a second pass removes the rounding residue of the first
    let proj = d2.dot(&d1) / d1.dot(&d1);
    d2.axpy(-proj, &d1);
    let after = d2.norm();
    d2.scale(before / after);
    Ok((d1, d2))
}

/// `θ + α·d1 + β·d2`.
pub fn offset_params(center: &FlatParams, d1: &FlatParams, d2: &FlatParams, alpha: f64, beta: f64) -> FlatParams {
    let mut p = center.clone();
    p.axpy(alpha, d1);
    p.axpy(beta, d2);
    p
}

/// Result of evaluating one set of parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellResult {
    /// Mean discounted episode return.
    pub reward: f64,
    pub reward_se: f64,
    pub loss: LossTerms,
    pub n_samples: u64,
    pub valid: bool,
    pub episode_returns: Vec<f64>,
}

/// Anything whose return and loss surface can be sliced.
pub trait LandscapeObjective: Sync {
    fn center(&self) -> &FlatParams;
    /// Evaluates `params` using at least `samples` environment steps drawn
    /// from a stream derived only from `seed`.
    fn evaluate(&self, params: &FlatParams, samples: usize, seed: u64) -> CellResult;
}

/// The policy and frozen rollout of a training checkpoint.
pub struct CheckpointObjective {
    pub policy: PolicySnapshot,
    pub frozen: Batch,
}

impl CheckpointObjective {
    pub fn new(ckpt: &Checkpoint) -> Result<Self> {
        let frozen = ckpt
            .frozen
            .clone()
            .ok_or_else(|| Error::config("checkpoint has no frozen rollout (saved before the first update)"))?;
        Ok(Self {
            policy: PolicySnapshot::from_checkpoint(ckpt)?,
            frozen,
        })
    }

    /// Loss terms of `params` on the frozen rollout.
    pub fn loss(&self, params: &FlatParams) -> LossTerms {
        ppo_loss(&self.policy.net, params, &self.frozen, &self.policy.loss_cfg)
    }

    /// Discounted returns of whole stochastic episodes totalling at least
    /// `samples` steps.
    pub fn episode_returns(&self, params: &FlatParams, samples: usize, seed: u64) -> Result<Vec<f64>> {
        let horizon = self.policy.setup.env.spec().horizon.max(1);
        let episodes = samples.div_ceil(horizon);
        let ctx = self.policy.context_with(params);
        let gamma = self.policy.setup.ppo.gamma;
        (0..episodes as u64)
            .map(|i| {
                let reset = derive_seed(seed, &[purpose::CELL, i, 0]);
                let mut rng = Stream::derived(seed, &[purpose::CELL, i, 1]);
                run_episode(&self.policy.setup.env, &self.policy.actuator, reset, gamma, |obs, _| {
                    let (mean, log_std) = ctx.act_mean(obs)?;
                    Ok(sample_action(&mean, &log_std, &mut rng))
                })
                .map(|e| e.discounted_return)
            })
            .collect()
    }
}

impl LandscapeObjective for CheckpointObjective {
    fn center(&self) -> &FlatParams {
        &self.policy.params
    }

    fn evaluate(&self, params: &FlatParams, samples: usize, seed: u64) -> CellResult {
        let loss = self.loss(params);
        let horizon = self.policy.setup.env.spec().horizon.max(1) as u64;
        match self.episode_returns(params, samples, seed) {
            Ok(returns) => CellResult {
                reward: stats::mean(&returns),
                reward_se: stats::std_err(&returns),
                n_samples: returns.len() as u64 * horizon,
                valid: loss.is_finite() && returns.iter().all(|r| r.is_finite()),
                loss,
                episode_returns: returns,
            },
            Err(_) => CellResult {
                loss,
                valid: false,
                ..Default::default()
            },
        }
    }
}

/// Which surface of a grid to read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    Reward,
    PolicyLoss,
    ValueLoss,
    TotalLoss,
}

impl Surface {
    pub const ALL: [Surface; 4] = [Surface::Reward, Surface::PolicyLoss, Surface::ValueLoss, Surface::TotalLoss];

    pub fn name(self) -> &'static str {
        match self {
            Surface::Reward => "reward",
            Surface::PolicyLoss => "policy_loss",
            Surface::ValueLoss => "value_loss",
            Surface::TotalLoss => "total_loss",
        }
    }
}

/// Row-major grid: row `r` is `β = coordinate(r)`, column `c` is
/// `α = coordinate(c)`. Invalid cells hold 0 and are masked out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeGrid {
    pub config: LandscapeConfig,
    pub checkpoint: String,
    pub coordinates: Vec<f64>,
    pub reward: Vec<f64>,
    pub reward_se: Vec<f64>,
    pub policy_loss: Vec<f64>,
    pub value_loss: Vec<f64>,
    pub total_loss: Vec<f64>,
    pub n_samples: Vec<u64>,
    pub valid: Vec<bool>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
}

/// Summary statistics of one surface over its valid cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSummary {
    pub min: f64,
    pub max: f64,
    /// Fraction of valid cells within 5% (relative) of the center value.
    pub near_center_fraction: f64,
}

impl GridSummary {
    /// Largest relative difference over the three statistics.
    pub fn max_relative_difference(&self, other: &GridSummary) -> f64 {
        let rel = |a: f64, b: f64| {
            let scale = a.abs().max(b.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - b).abs() / scale
            }
        };
        rel(self.min, other.min)
            .max(rel(self.max, other.max))
            .max(rel(self.near_center_fraction, other.near_center_fraction))
    }
}

impl LandscapeGrid {
    pub fn resolution(&self) -> usize {
        self.config.resolution
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.resolution() + col
    }

    pub fn center_index(&self) -> usize {
        let c = self.resolution() / 2;
        self.index(c, c)
    }

    pub fn surface(&self, s: Surface) -> &[f64] {
        match s {
            Surface::Reward => &self.reward,
            Surface::PolicyLoss => &self.policy_loss,
            Surface::ValueLoss => &self.value_loss,
            Surface::TotalLoss => &self.total_loss,
        }
    }

    pub fn summary(&self, s: Surface) -> GridSummary {
        let values = self.surface(s);
        let center = values[self.center_index()];
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        let mut near = 0usize;
        let mut count = 0usize;
        for (v, ok) in values.iter().zip(&self.valid) {
            if !ok {
                continue;
            }
            min = min.min(*v);
            max = max.max(*v);
            if (v - center).abs() <= 0.05 * center.abs() {
                near += 1;
            }
            count += 1;
        }
        GridSummary {
            min,
            max,
            near_center_fraction: if count == 0 { 0.0 } else { near as f64 / count as f64 },
        }
    }
}

/// Evaluates every cell with directions drawn from the configured seed.
pub fn compute_grid<E, O>(exec: &E, objective: &O, cfg: &LandscapeConfig, checkpoint: &str) -> Result<LandscapeGrid>
where
    E: Executor + ?Sized,
    O: LandscapeObjective,
{
    cfg.validate()?;
    let (d1, d2) = make_directions(objective.center(), cfg.direction_seed, cfg.normalization)?;
    compute_grid_with_directions(exec, objective, cfg, checkpoint, &d1, &d2)
}

/// Evaluates every cell along the given directions. Cell `(r, c)` draws its
/// randomness from `derive(direction_seed, CELL, r, c)`, so the grid does
/// not depend on evaluation order or worker count.
pub fn compute_grid_with_directions<E, O>(
    exec: &E,
    objective: &O,
    cfg: &LandscapeConfig,
    checkpoint: &str,
    d1: &FlatParams,
    d2: &FlatParams,
) -> Result<LandscapeGrid>
where
    E: Executor + ?Sized,
    O: LandscapeObjective,
{
    cfg.validate()?;
    let center = objective.center();
    center.check_same_layout(d1)?;
    center.check_same_layout(d2)?;
    let res = cfg.resolution;
    let coords: Vec<f64> = (0..res).map(|i| cfg.coordinate(i)).collect();
    let cells = exec.map(res * res, |k| {
        let (row, col) = (k / res, k % res);
        let seed = derive_seed(cfg.direction_seed, &[purpose::CELL, row as u64, col as u64]);
        let p = offset_params(center, d1, d2, coords[col], coords[row]);
        objective.evaluate(&p, cfg.samples_per_cell, seed)
    });
    let n = res * res;
    let mut grid = LandscapeGrid {
        config: cfg.clone(),
        checkpoint: String::from(checkpoint),
        coordinates: coords,
        reward: Vec::with_capacity(n),
        reward_se: Vec::with_capacity(n),
        policy_loss: Vec::with_capacity(n),
        value_loss: Vec::with_capacity(n),
        total_loss: Vec::with_capacity(n),
        n_samples: Vec::with_capacity(n),
        valid: Vec::with_capacity(n),
        d1: d1.data.clone(),
        d2: d2.data.clone(),
    };
    for c in cells {
        let keep = |x: f64| if c.valid { x } else { 0.0 };
        grid.reward.push(keep(c.reward));
        grid.reward_se.push(keep(c.reward_se));
        grid.policy_loss.push(keep(c.loss.policy));
        grid.value_loss.push(keep(c.loss.value));
        grid.total_loss.push(keep(c.loss.total));
        grid.n_samples.push(c.n_samples);
        grid.valid.push(c.valid);
    }
    Ok(grid)
}

/// Deterministic test objective `f(θ) = Σᵢ cᵢ·(θᵢ − mᵢ)²`. All loss terms
/// report `f`; the reward is `−f`.
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    pub center: FlatParams,
    pub minimum: Vec<f64>,
    pub curvature: Vec<f64>,
}

impl QuadraticObjective {
    pub fn value(&self, params: &FlatParams) -> f64 {
        params
            .data
            .iter()
            .zip(self.minimum.iter().zip(&self.curvature))
            .map(|(x, (m, c))| c * (x - m) * (x - m))
            .sum()
    }
}

impl LandscapeObjective for QuadraticObjective {
    fn center(&self) -> &FlatParams {
        &self.center
    }

    fn evaluate(&self, params: &FlatParams, samples: usize, _seed: u64) -> CellResult {
        let f = self.value(params);
        CellResult {
            reward: -f,
            reward_se: 0.0,
            loss: LossTerms {
                total: f,
                policy: f,
                value: f,
                entropy: 0.0,
            },
            n_samples: samples as u64,
            valid: f.is_finite(),
            episode_returns: Vec::new(),
        }
    }
}
