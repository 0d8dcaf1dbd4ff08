//! Action representations.
//!
//! Policies emit actions normalized to `[-1, 1]` per joint. The actuation
//! layer clips them, rescales them affinely onto the mode's native range and
//! turns them into a [`Command`] for the environment. Controllers run exactly
//! once per policy step and hold no state.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::envs::{Command, EnvConfig, EnvSpec, JointState};
use crate::error::{Error, Result};
use crate::math::{sqrt, wrap_angle, PI};
use crate::rng::{purpose, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuationKind {
    Torque,
    Velocity,
    Position,
    IdealPosition,
}

impl ActuationKind {
    pub const ALL: [ActuationKind; 4] = [
        ActuationKind::Torque,
        ActuationKind::Velocity,
        ActuationKind::Position,
        ActuationKind::IdealPosition,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActuationKind::Torque => "torque",
            ActuationKind::Velocity => "velocity",
            ActuationKind::Position => "position",
            ActuationKind::IdealPosition => "ideal_position",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Controller gains shared by all joints.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerGains {
    /// Velocity-control gain (N·m·s/rad).
    pub kd_vc: f64,
    /// Position-control stiffness (N·m/rad).
    pub kp_pc: f64,
    /// Position-control damping (N·m·s/rad).
    pub kd_pc: f64,
}

impl ControllerGains {
    pub fn velocity(kd_vc: f64) -> Self {
        Self {
            kd_vc,
            ..Self::default()
        }
    }

    pub fn position(kp_pc: f64, kd_pc: f64) -> Self {
        Self {
            kp_pc,
            kd_pc,
            ..Self::default()
        }
    }

    /// Checks that the gains `kind` uses are positive and finite.
    pub fn validate_for(&self, kind: ActuationKind) -> Result<()> {
        let ok = |g: f64| g > 0.0 && g.is_finite();
        match kind {
            ActuationKind::Velocity if !ok(self.kd_vc) => {
                Err(Error::config(format!("velocity control needs kd_vc > 0, got {}", self.kd_vc)))
            }
            ActuationKind::Position if !ok(self.kp_pc) || !ok(self.kd_pc) => Err(Error::config(format!(
                "position control needs kp_pc, kd_pc > 0, got {} / {}",
                self.kp_pc, self.kd_pc
            ))),
            _ => Ok(()),
        }
    }

    fn magnitude(&self, kind: ActuationKind) -> f64 {
        match kind {
            ActuationKind::Velocity => self.kd_vc,
            _ => sqrt(self.kp_pc * self.kp_pc + self.kd_pc * self.kd_pc),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionBounds {
    pub low: Vec<f64>,
    pub high: Vec<f64>,
}

impl ActionBounds {
    pub fn symmetric(limit: f64, dof: usize) -> Self {
        Self {
            low: vec![-limit; dof],
            high: vec![limit; dof],
        }
    }

    pub fn dof(&self) -> usize {
        self.low.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.low.len() != self.high.len() {
            return Err(Error::config("action bounds low/high lengths differ"));
        }
        if self
            .low
            .iter()
            .zip(&self.high)
            .any(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite())
        {
            return Err(Error::config("action bounds need finite low < high"));
        }
        Ok(())
    }

    /// Default native range for `kind` on an environment.
    ///
    /// Torque: the torque limit. Position: joint limits, or `[-π, π]` for
    /// unlimited revolute joints. Velocity: `±2·range / (horizon·dt)`.
    pub fn default_for(kind: ActuationKind, spec: &EnvSpec) -> Self {
        let ranges: Vec<[f64; 2]> = match &spec.joint_limits {
            Some(l) => l.clone(),
            None => vec![[-PI, PI]; spec.dof],
        };
        match kind {
            ActuationKind::Torque => Self {
                low: spec.torque_limit.iter().map(|t| -t).collect(),
                high: spec.torque_limit.clone(),
            },
            ActuationKind::Position | ActuationKind::IdealPosition => Self {
                low: ranges.iter().map(|r| r[0]).collect(),
                high: ranges.iter().map(|r| r[1]).collect(),
            },
            ActuationKind::Velocity => {
                let scale = 2.0 / (spec.horizon as f64 * spec.dt);
                Self {
                    low: ranges.iter().map(|r| -(r[1] - r[0]) * scale).collect(),
                    high: ranges.iter().map(|r| (r[1] - r[0]) * scale).collect(),
                }
            }
        }
    }
}

/// Clips `a` to `[-1, 1]` and maps it affinely onto `[low, high]`.
pub fn affine_rescale(a: &[f64], bounds: &ActionBounds) -> Vec<f64> {
    a.iter()
        .zip(bounds.low.iter().zip(&bounds.high))
        .map(|(x, (lo, hi))| {
            let x = x.clamp(-1.0, 1.0);
            lo + (x + 1.0) * 0.5 * (hi - lo)
        })
        .collect()
}

fn clamp_to(torque: Vec<f64>, limit: &[f64]) -> Vec<f64> {
    torque
        .into_iter()
        .zip(limit)
        .map(|(t, l)| t.clamp(-l, *l))
        .collect()
}

pub fn apply_torque(a: &[f64], bounds: &ActionBounds) -> Vec<f64> {
    affine_rescale(a, bounds)
}

/// `τ = K_d^VC·(v − q̇)`, clamped to the torque limit.
pub fn apply_velocity_control(
    a: &[f64],
    state: &JointState,
    gains: &ControllerGains,
    bounds: &ActionBounds,
    torque_limit: &[f64],
) -> Vec<f64> {
    let v = affine_rescale(a, bounds);
    let tau = v
        .iter()
        .zip(&state.qdot)
        .map(|(v, qd)| gains.kd_vc * (v - qd))
        .collect();
    clamp_to(tau, torque_limit)
}

/// `τ = K_p^PC·wrap(p − q) − K_d^PC·q̇` (zero target velocity), clamped.
pub fn apply_position_control(
    a: &[f64],
    state: &JointState,
    gains: &ControllerGains,
    bounds: &ActionBounds,
    torque_limit: &[f64],
) -> Vec<f64> {
    let p = affine_rescale(a, bounds);
    let tau = p
        .iter()
        .zip(state.q.iter().zip(&state.qdot))
        .map(|(p, (q, qd))| gains.kp_pc * wrap_angle(p - q) - gains.kd_pc * qd)
        .collect();
    clamp_to(tau, torque_limit)
}

/// Joint state the environment is overwritten with under ideal position control.
pub fn apply_ideal_position(a: &[f64], bounds: &ActionBounds) -> JointState {
    let q = affine_rescale(a, bounds);
    let dof = q.len();
    JointState::new(q, vec![0.0; dof])
}

/// Serializable actuation choice; bounds default per environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuationConfig {
    pub kind: ActuationKind,
    #[serde(default)]
    pub gains: ControllerGains,
    #[serde(default)]
    pub bounds: Option<ActionBounds>,
}

impl ActuationConfig {
    pub fn torque() -> Self {
        Self {
            kind: ActuationKind::Torque,
            gains: ControllerGains::default(),
            bounds: None,
        }
    }

    pub fn new(kind: ActuationKind, gains: ControllerGains) -> Self {
        Self {
            kind,
            gains,
            bounds: None,
        }
    }

    pub fn resolve(&self, env: &EnvConfig) -> Result<Actuator> {
        let spec = env.spec();
        self.gains.validate_for(self.kind)?;
        if self.kind == ActuationKind::IdealPosition && !env.supports_state_override() {
            return Err(Error::config(format!(
                "{} does not support ideal position control",
                env.name()
            )));
        }
        let bounds = self
            .bounds
            .clone()
            .unwrap_or_else(|| ActionBounds::default_for(self.kind, &spec));
        bounds.validate()?;
        if bounds.dof() != spec.dof {
            return Err(Error::config(format!(
                "action bounds cover {} joints, environment has {}",
                bounds.dof(),
                spec.dof
            )));
        }
        Ok(Actuator {
            kind: self.kind,
            gains: self.gains,
            bounds,
            torque_limit: spec.torque_limit,
        })
    }
}

/// Resolved actuation for one environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Actuator {
    pub kind: ActuationKind,
    pub gains: ControllerGains,
    pub bounds: ActionBounds,
    pub torque_limit: Vec<f64>,
}

impl Actuator {
    pub fn command(&self, action: &[f64], state: &JointState) -> Command {
        match self.kind {
            ActuationKind::Torque => {
                Command::Torque(clamp_to(apply_torque(action, &self.bounds), &self.torque_limit))
            }
            ActuationKind::Velocity => Command::Torque(apply_velocity_control(
                action,
                state,
                &self.gains,
                &self.bounds,
                &self.torque_limit,
            )),
            ActuationKind::Position => Command::Torque(apply_position_control(
                action,
                state,
                &self.gains,
                &self.bounds,
                &self.torque_limit,
            )),
            ActuationKind::IdealPosition => {
                Command::SetPosition(apply_ideal_position(action, &self.bounds).q)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Gain tuning

/// Seven log-spaced values from 1e-2 to 1e2 per gain.
pub fn default_gain_grid(kind: ActuationKind) -> Vec<ControllerGains> {
    let values: Vec<f64> = (0..7)
        .map(|i| libm::pow(10.0, -2.0 + 4.0 * i as f64 / 6.0))
        .collect();
    match kind {
        ActuationKind::Velocity => values.iter().map(|&k| ControllerGains::velocity(k)).collect(),
        ActuationKind::Position => values
            .iter()
            .flat_map(|&kp| values.iter().map(move |&kd| ControllerGains::position(kp, kd)))
            .collect(),
        _ => Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneReport {
    pub selected: ControllerGains,
    /// Mean absolute tracking error of every candidate, in grid order.
    pub table: Vec<(ControllerGains, f64)>,
}

/// Mean absolute tracking error of one candidate.
///
/// Each of `episodes` episodes resets the environment from a seed-derived
/// stream and tracks piecewise-constant random targets (resampled every
/// quarter of `horizon`). Velocity control is scored on `|v − q̇|`, position
/// control on `|wrap(p − q)|`, both measured after each step. All candidates
/// see the same targets.
pub fn tracking_error(
    env: &EnvConfig,
    kind: ActuationKind,
    gains: &ControllerGains,
    bounds: Option<&ActionBounds>,
    horizon: usize,
    episodes: usize,
    seed: u64,
) -> Result<f64> {
    if !matches!(kind, ActuationKind::Velocity | ActuationKind::Position) {
        return Err(Error::config("gain tuning applies to velocity or position control"));
    }
    let cfg = ActuationConfig {
        kind,
        gains: *gains,
        bounds: bounds.cloned(),
    };
    let actuator = cfg.resolve(env)?;
    let dof = env.spec().dof;
    let hold = (horizon / 4).max(1);
    let mut total = 0.0;
    let mut count = 0usize;
    for ep in 0..episodes as u64 {
        let mut instance = env.build()?;
        let mut reset_rng = Stream::derived(seed, &[purpose::TUNE, ep, 0]);
        instance.reset(&mut reset_rng);
        let mut target_rng = Stream::derived(seed, &[purpose::TUNE, ep, 1]);
        let mut action = vec![0.0; dof];
        for t in 0..horizon {
            if t % hold == 0 {
                for a in action.iter_mut() {
                    *a = target_rng.uniform_in(-1.0, 1.0);
                }
            }
            let cmd = actuator.command(&action, instance.state());
            instance.step(&cmd)?;
            let target = affine_rescale(&action, &actuator.bounds);
            let s = instance.state();
            for j in 0..dof {
                let e = match kind {
                    ActuationKind::Velocity => target[j] - s.qdot[j],
                    _ => wrap_angle(target[j] - s.q[j]),
                };
                total += e.abs();
                count += 1;
            }
        }
    }
    Ok(if count == 0 { 0.0 } else { total / count as f64 })
}

/// Picks the candidate with the lowest [`tracking_error`]; ties go to the
/// smaller gain magnitude, then to grid order.
pub fn tune_gains(
    env: &EnvConfig,
    kind: ActuationKind,
    candidates: &[ControllerGains],
    bounds: Option<&ActionBounds>,
    horizon: usize,
    seed: u64,
) -> Result<TuneReport> {
    if candidates.is_empty() {
        return Err(Error::config("gain grid is empty"));
    }
    const EPISODES: usize = 4;
    let mut table = Vec::with_capacity(candidates.len());
    for g in candidates {
        let err = tracking_error(env, kind, g, bounds, horizon, EPISODES, seed)?;
        table.push((*g, err));
    }
    let best = table
        .iter()
        .min_by(|(ga, ea), (gb, eb)| {
            ea.total_cmp(eb)
                .then_with(|| ga.magnitude(kind).total_cmp(&gb.magnitude(kind)))
                .then(Ordering::Equal)
        })
        .map(|(g, _)| *g)
        .expect("non-empty");
    Ok(TuneReport {
        selected: best,
        table,
    })
}
