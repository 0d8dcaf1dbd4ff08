//! Closed-form continuous-control environments.
//!
//! All environments share one stepping interface ([`Environment`]) and expose
//! joint positions and velocities so the actuation layer can close control
//! loops around them. Rewards are computed on the pre-step state and the
//! applied command, and every environment runs for a fixed horizon with no
//! early termination.
//!
//! Observation layouts:
//!
//! | environment           | layout                                                        |
//! |-----------------------|---------------------------------------------------------------|
//! | `pendulum`            | `(cos θ, sin θ, θ̇)`                                           |
//! | `reacher`             | `(cos q₁, cos q₂, sin q₁, sin q₂, q̇₁, q̇₂, target, tip − target)` |
//! | `joint_space_reacher` | `(q₁, q₂, q*₁, q*₂, q̇₁, q̇₂, Δq₁, Δq₂)` with `Δq = wrap(q* − q)`  |

use alloc::boxed::Box;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{cos, sin, sqrt, wrap_angle, PI};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointState {
    /// Joint angles (rad).
    pub q: Vec<f64>,
    /// Joint angular velocities (rad/s).
    pub qdot: Vec<f64>,
}

impl JointState {
    pub fn new(q: Vec<f64>, qdot: Vec<f64>) -> Self {
        Self { q, qdot }
    }

    pub fn zeros(dof: usize) -> Self {
        Self {
            q: vec![0.0; dof],
            qdot: vec![0.0; dof],
        }
    }

    pub fn dof(&self) -> usize {
        self.q.len()
    }

    fn check(&self, dof: usize) -> Result<()> {
        if self.q.len() != dof || self.qdot.len() != dof {
            return Err(Error::config(format!(
                "joint state has {}/{} entries, expected {dof}",
                self.q.len(),
                self.qdot.len()
            )));
        }
        if self.q.iter().chain(&self.qdot).any(|v| !v.is_finite()) {
            return Err(Error::NumericDomain(format!("non-finite joint state {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub dof: usize,
    pub dt: f64,
    pub torque_limit: Vec<f64>,
    pub joint_limits: Option<Vec<[f64; 2]>>,
    pub horizon: usize,
    /// Discount used for reporting discounted returns.
    pub discount: f64,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::config("dt must be positive"));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if !(self.discount > 0.0 && self.discount < 1.0) {
            return Err(Error::config("discount must lie in (0, 1)"));
        }
        if self.torque_limit.len() != self.dof
            || self.torque_limit.iter().any(|t| !(*t > 0.0) || !t.is_finite())
        {
            return Err(Error::config("torque_limit must be positive for every joint"));
        }
        if let Some(lims) = &self.joint_limits {
            if lims.len() != self.dof || lims.iter().any(|[lo, hi]| !(lo < hi)) {
                return Err(Error::config("joint_limits must be increasing pairs, one per joint"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub values: Vec<f64>,
}

impl Observation {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// What the actuation layer asks the environment to do for one step.
#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Torque(Vec<f64>),
    /// Overwrite joint angles and zero the velocities.
    SetPosition(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub reward: f64,
    /// Torque actually applied after clamping (empty for state overrides).
    pub applied_torque: Vec<f64>,
    /// Horizon reached.
    pub done: bool,
}

/// Serializable mutable state of an environment instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSnapshot {
    pub state: JointState,
    pub target: Vec<f64>,
    pub t: usize,
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;
    fn obs_dim(&self) -> usize;
    /// Inclusive `(lower, upper)` bound on every reward the environment emits.
    fn reward_bounds(&self) -> (f64, f64);
    /// Draws an initial state from `rng`.
    fn reset(&mut self, rng: &mut Stream) -> Observation;
    fn state(&self) -> &JointState;
    fn observation(&self) -> Observation;
    fn step(&mut self, command: &Command) -> Result<Transition>;
    fn supports_state_override(&self) -> bool {
        false
    }
    fn snapshot(&self) -> EnvSnapshot;
    fn restore(&mut self, snapshot: &EnvSnapshot) -> Result<()>;

    /// Resets from a stream derived only from `seed`.
    fn reset_seeded(&mut self, seed: u64) -> Observation {
        let mut rng = Stream::new(seed);
        self.reset(&mut rng)
    }
}

fn clamp_torques(torques: &[f64], limit: &[f64]) -> Result<Vec<f64>> {
    if torques.len() != limit.len() {
        return Err(Error::config(format!(
            "expected {} torques, got {}",
            limit.len(),
            torques.len()
        )));
    }
    if torques.iter().any(|t| !t.is_finite()) {
        return Err(Error::NumericDomain(format!("non-finite torque {torques:?}")));
    }
    Ok(torques
        .iter()
        .zip(limit)
        .map(|(t, l)| t.clamp(-l, *l))
        .collect())
}

// ---------------------------------------------------------------------------
// Pendulum

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumParams {
    pub g: f64,
    pub m: f64,
    pub l: f64,
    pub dt: f64,
    pub torque_limit: f64,
    /// Angular speed clip applied after each velocity update.
    pub max_speed: f64,
    pub horizon: usize,
    pub discount: f64,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            g: 10.0,
            m: 1.0,
            l: 1.0,
            dt: 0.05,
            torque_limit: 2.0,
            max_speed: 8.0,
            horizon: 200,
            discount: 0.99,
        }
    }
}

impl PendulumParams {
    pub fn spec(&self) -> EnvSpec {
        EnvSpec {
            dof: 1,
            dt: self.dt,
            torque_limit: vec![self.torque_limit],
            joint_limits: None,
            horizon: self.horizon,
            discount: self.discount,
        }
    }
}

/// Pendulum observation `(cos θ, sin θ, θ̇)`.
pub fn pendulum_observation(state: &JointState) -> Observation {
    Observation {
        values: vec![cos(state.q[0]), sin(state.q[0]), state.qdot[0]],
    }
}

/// One semi-implicit Euler step of the frictionless pendulum, `θ = 0` upright.
///
/// `θ̈ = (3g / 2l)·sin θ + (3 / ml²)·τ`. The reward is evaluated on the
/// incoming state: `−(wrap(θ)² + 0.1·θ̇² + 0.001·τ²)`.
pub fn pendulum_step(
    state: &JointState,
    torque: f64,
    params: &PendulumParams,
) -> Result<(JointState, Observation, f64)> {
    state.check(1)?;
    let tau = clamp_torques(&[torque], &[params.torque_limit])?[0];
    let (th, thdot) = (state.q[0], state.qdot[0]);
    let thn = wrap_angle(th);
    let reward = -(thn * thn + 0.1 * thdot * thdot + 0.001 * tau * tau);

    let acc = 3.0 * params.g / (2.0 * params.l) * sin(th)
        + 3.0 / (params.m * params.l * params.l) * tau;
    let new_thdot = (thdot + acc * params.dt).clamp(-params.max_speed, params.max_speed);
    let new_th = wrap_angle(th + new_thdot * params.dt);
    let next = JointState::new(vec![new_th], vec![new_thdot]);
    let obs = pendulum_observation(&next);
    Ok((next, obs, reward))
}

#[derive(Debug, Clone)]
pub struct Pendulum {
    params: PendulumParams,
    spec: EnvSpec,
    state: JointState,
    t: usize,
}

impl Pendulum {
    pub fn new(params: PendulumParams) -> Result<Self> {
        let spec = params.spec();
        spec.validate()?;
        Ok(Self {
            params,
            spec,
            state: JointState::new(vec![PI], vec![0.0]),
            t: 0,
        })
    }

    pub fn params(&self) -> &PendulumParams {
        &self.params
    }

    /// Initial distribution: `θ ~ U(−π, π)`, `θ̇ ~ U(−1, 1)`; mean `(0, 0)`.
    pub fn sample_initial(rng: &mut Stream) -> JointState {
        let th = rng.uniform_in(-PI, PI);
        let thdot = rng.uniform_in(-1.0, 1.0);
        JointState::new(vec![th], vec![thdot])
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn obs_dim(&self) -> usize {
        3
    }

    fn reward_bounds(&self) -> (f64, f64) {
        let p = &self.params;
        (
            -(PI * PI + 0.1 * p.max_speed * p.max_speed + 0.001 * p.torque_limit * p.torque_limit),
            0.0,
        )
    }

    fn reset(&mut self, rng: &mut Stream) -> Observation {
        self.state = Self::sample_initial(rng);
        self.t = 0;
        self.observation()
    }

    fn state(&self) -> &JointState {
        &self.state
    }

    fn observation(&self) -> Observation {
        pendulum_observation(&self.state)
    }

    fn step(&mut self, command: &Command) -> Result<Transition> {
        let Command::Torque(tau) = command else {
            return Err(Error::config("pendulum does not support direct state override"));
        };
        if tau.len() != 1 {
            return Err(Error::config("pendulum expects exactly one torque"));
        }
        let (next, observation, reward) = pendulum_step(&self.state, tau[0], &self.params)?;
        self.state = next;
        self.t += 1;
        Ok(Transition {
            observation,
            reward,
            applied_torque: vec![tau[0].clamp(-self.params.torque_limit, self.params.torque_limit)],
            done: self.t >= self.spec.horizon,
        })
    }

    fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot {
            state: self.state.clone(),
            target: Vec::new(),
            t: self.t,
        }
    }

    fn restore(&mut self, snapshot: &EnvSnapshot) -> Result<()> {
        snapshot.state.check(1)?;
        self.state = snapshot.state.clone();
        self.t = snapshot.t;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Two-link planar reacher

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReacherParams {
    pub l1: f64,
    pub l2: f64,
    pub inertia: [f64; 2],
    /// Viscous joint damping `c`.
    pub damping: f64,
    pub dt: f64,
    pub torque_limit: f64,
    pub horizon: usize,
    pub discount: f64,
}

impl Default for ReacherParams {
    fn default() -> Self {
        Self {
            l1: 0.1,
            l2: 0.1,
            inertia: [0.01, 0.01],
            damping: 0.1,
            dt: 0.02,
            torque_limit: 1.0,
            horizon: 200,
            discount: 0.99,
        }
    }
}

impl ReacherParams {
    pub fn spec(&self) -> EnvSpec {
        EnvSpec {
            dof: 2,
            dt: self.dt,
            torque_limit: vec![self.torque_limit; 2],
            joint_limits: None,
            horizon: self.horizon,
            discount: self.discount,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.l1 > 0.0 && self.l2 > 0.0) {
            return Err(Error::config("link lengths must be positive"));
        }
        if self.inertia.iter().any(|i| !(*i > 0.0)) || !(self.damping >= 0.0) {
            return Err(Error::config("inertia must be positive and damping non-negative"));
        }
        self.spec().validate()
    }
}

/// Planar forward kinematics of the fingertip.
pub fn fingertip(q: &[f64], l1: f64, l2: f64) -> [f64; 2] {
    let a = q[0];
    let b = q[0] + q[1];
    [l1 * cos(a) + l2 * cos(b), l1 * sin(a) + l2 * sin(b)]
}

/// Decoupled damped double-integrator joints: `q̈ᵢ = (τᵢ − c·q̇ᵢ) / Iᵢ`.
fn integrate_joints(state: &JointState, tau: &[f64], p: &ReacherParams) -> JointState {
    let mut next = state.clone();
    for i in 0..2 {
        let acc = (tau[i] - p.damping * state.qdot[i]) / p.inertia[i];
        next.qdot[i] = state.qdot[i] + p.dt * acc;
        next.q[i] = wrap_angle(state.q[i] + p.dt * next.qdot[i]);
    }
    next
}

pub fn reacher_observation(state: &JointState, target: [f64; 2], p: &ReacherParams) -> Observation {
    let tip = fingertip(&state.q, p.l1, p.l2);
    Observation {
        values: vec![
            cos(state.q[0]),
            cos(state.q[1]),
            sin(state.q[0]),
            sin(state.q[1]),
            state.qdot[0],
            state.qdot[1],
            target[0],
            target[1],
            tip[0] - target[0],
            tip[1] - target[1],
        ],
    }
}

fn reacher_reward(state: &JointState, tau: &[f64], target: [f64; 2], p: &ReacherParams) -> f64 {
    let tip = fingertip(&state.q, p.l1, p.l2);
    let (dx, dy) = (tip[0] - target[0], tip[1] - target[1]);
    -sqrt(dx * dx + dy * dy) - 0.001 * tau.iter().map(|t| t * t).sum::<f64>()
}

/// One step of the end-effector reacher. Reward
/// `−‖tip(q) − target‖ − 0.001·‖τ‖²` on the incoming state.
pub fn reacher_step(
    state: &JointState,
    torques: &[f64],
    params: &ReacherParams,
    target: [f64; 2],
) -> Result<(JointState, Observation, f64)> {
    state.check(2)?;
    if !target.iter().all(|t| t.is_finite()) {
        return Err(Error::NumericDomain(format!("non-finite target {target:?}")));
    }
    let tau = clamp_torques(torques, &[params.torque_limit; 2])?;
    let reward = reacher_reward(state, &tau, target, params);
    let next = integrate_joints(state, &tau, params);
    let obs = reacher_observation(&next, target, params);
    Ok((next, obs, reward))
}

pub fn joint_space_observation(state: &JointState, q_target: &[f64]) -> Observation {
    let d0 = wrap_angle(q_target[0] - state.q[0]);
    let d1 = wrap_angle(q_target[1] - state.q[1]);
    Observation {
        values: vec![
            state.q[0],
            state.q[1],
            q_target[0],
            q_target[1],
            state.qdot[0],
            state.qdot[1],
            d0,
            d1,
        ],
    }
}

/// `−‖(2/π)·wrap(q_target − q)‖`.
pub fn joint_space_reward(q: &[f64], q_target: &[f64]) -> f64 {
    let s = 2.0 / PI;
    let d0 = s * wrap_angle(q_target[0] - q[0]);
    let d1 = s * wrap_angle(q_target[1] - q[1]);
    -sqrt(d0 * d0 + d1 * d1)
}

/// One step of the joint-space reacher (same dynamics as [`reacher_step`]).
pub fn joint_space_reacher_step(
    state: &JointState,
    torques: &[f64],
    params: &ReacherParams,
    q_target: &[f64],
) -> Result<(JointState, Observation, f64)> {
    if q_target.len() != 2 {
        return Err(Error::config(format!(
            "joint-space target must have 2 entries, got {}",
            q_target.len()
        )));
    }
    state.check(2)?;
    if !q_target.iter().all(|t| t.is_finite()) {
        return Err(Error::NumericDomain(format!("non-finite target {q_target:?}")));
    }
    let tau = clamp_torques(torques, &[params.torque_limit; 2])?;
    let reward = joint_space_reward(&state.q, q_target);
    let next = integrate_joints(state, &tau, params);
    let obs = joint_space_observation(&next, q_target);
    Ok((next, obs, reward))
}

/// Which target space the reacher uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetSpace {
    EndEffector,
    Joint,
}

#[derive(Debug, Clone)]
pub struct Reacher {
    params: ReacherParams,
    spec: EnvSpec,
    space: TargetSpace,
    state: JointState,
    target: Vec<f64>,
    t: usize,
}

impl Reacher {
    pub fn new(params: ReacherParams, space: TargetSpace) -> Result<Self> {
        params.validate()?;
        let spec = params.spec();
        let target = match space {
            TargetSpace::EndEffector => vec![params.l1 + params.l2, 0.0],
            TargetSpace::Joint => vec![0.0, 0.0],
        };
        Ok(Self {
            params,
            spec,
            space,
            state: JointState::zeros(2),
            target,
            t: 0,
        })
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn set_target(&mut self, target: &[f64]) -> Result<()> {
        if target.len() != 2 {
            return Err(Error::config("reacher target must have 2 entries"));
        }
        self.target = target.to_vec();
        Ok(())
    }

    /// Initial joints `q ~ U(−0.1, 0.1)`, `q̇ ~ U(−0.005, 0.005)`.
    /// End-effector targets are uniform over the reachable annulus;
    /// joint-space targets are uniform over `[−π, π)²`.
    fn sample(&self, rng: &mut Stream) -> (JointState, Vec<f64>) {
        let q = vec![rng.uniform_in(-0.1, 0.1), rng.uniform_in(-0.1, 0.1)];
        let qdot = vec![rng.uniform_in(-0.005, 0.005), rng.uniform_in(-0.005, 0.005)];
        let target = match self.space {
            TargetSpace::EndEffector => {
                let r_in = (self.params.l1 - self.params.l2).abs();
                let r_out = self.params.l1 + self.params.l2;
                let r = sqrt(rng.uniform_in(r_in * r_in, r_out * r_out));
                let phi = rng.uniform_in(-PI, PI);
                vec![r * cos(phi), r * sin(phi)]
            }
            TargetSpace::Joint => vec![rng.uniform_in(-PI, PI), rng.uniform_in(-PI, PI)],
        };
        (JointState::new(q, qdot), target)
    }

    fn reward_now(&self, tau: &[f64]) -> f64 {
        match self.space {
            TargetSpace::EndEffector => {
                reacher_reward(&self.state, tau, [self.target[0], self.target[1]], &self.params)
            }
            TargetSpace::Joint => joint_space_reward(&self.state.q, &self.target),
        }
    }
}

impl Environment for Reacher {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn obs_dim(&self) -> usize {
        match self.space {
            TargetSpace::EndEffector => 10,
            TargetSpace::Joint => 8,
        }
    }

    fn reward_bounds(&self) -> (f64, f64) {
        match self.space {
            TargetSpace::EndEffector => {
                let reach = self.params.l1 + self.params.l2;
                let tl = self.params.torque_limit;
                (-(2.0 * reach) - 0.001 * 2.0 * tl * tl, 0.0)
            }
            TargetSpace::Joint => (-2.0 * core::f64::consts::SQRT_2, 0.0),
        }
    }

    fn reset(&mut self, rng: &mut Stream) -> Observation {
        let (state, target) = self.sample(rng);
        self.state = state;
        self.target = target;
        self.t = 0;
        self.observation()
    }

    fn state(&self) -> &JointState {
        &self.state
    }

    fn observation(&self) -> Observation {
        match self.space {
            TargetSpace::EndEffector => {
                reacher_observation(&self.state, [self.target[0], self.target[1]], &self.params)
            }
            TargetSpace::Joint => joint_space_observation(&self.state, &self.target),
        }
    }

    fn step(&mut self, command: &Command) -> Result<Transition> {
        let (reward, next, applied) = match command {
            Command::Torque(tau) => {
                let (next, _, reward) = match self.space {
                    TargetSpace::EndEffector => reacher_step(
                        &self.state,
                        tau,
                        &self.params,
                        [self.target[0], self.target[1]],
                    )?,
                    TargetSpace::Joint => {
                        joint_space_reacher_step(&self.state, tau, &self.params, &self.target)?
                    }
                };
                let applied = clamp_torques(tau, &[self.params.torque_limit; 2])?;
                (reward, next, applied)
            }
            Command::SetPosition(q) => {
                if q.len() != 2 {
                    return Err(Error::config("position override needs 2 joint angles"));
                }
                if q.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NumericDomain(format!("non-finite position override {q:?}")));
                }
                let reward = self.reward_now(&[0.0, 0.0]);
                let next = JointState::new(q.iter().map(|v| wrap_angle(*v)).collect(), vec![0.0; 2]);
                (reward, next, Vec::new())
            }
        };
        self.state = next;
        self.t += 1;
        Ok(Transition {
            observation: self.observation(),
            reward,
            applied_torque: applied,
            done: self.t >= self.spec.horizon,
        })
    }

    fn supports_state_override(&self) -> bool {
        true
    }

    fn snapshot(&self) -> EnvSnapshot {
        EnvSnapshot {
            state: self.state.clone(),
            target: self.target.clone(),
            t: self.t,
        }
    }

    fn restore(&mut self, snapshot: &EnvSnapshot) -> Result<()> {
        snapshot.state.check(2)?;
        if snapshot.target.len() != 2 {
            return Err(Error::config("reacher snapshot must carry a 2-entry target"));
        }
        self.state = snapshot.state.clone();
        self.target = snapshot.target.clone();
        self.t = snapshot.t;
        Ok(())
    }
}

// ---------------------------------------------------------------------------

/// Environment selection as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvConfig {
    Pendulum(PendulumParams),
    Reacher(ReacherParams),
    JointSpaceReacher(ReacherParams),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::Pendulum(PendulumParams::default())
    }
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Pendulum(_) => "pendulum",
            EnvConfig::Reacher(_) => "reacher",
            EnvConfig::JointSpaceReacher(_) => "joint_space_reacher",
        }
    }

    pub fn spec(&self) -> EnvSpec {
        match self {
            EnvConfig::Pendulum(p) => p.spec(),
            EnvConfig::Reacher(p) | EnvConfig::JointSpaceReacher(p) => p.spec(),
        }
    }

    pub fn obs_dim(&self) -> usize {
        match self {
            EnvConfig::Pendulum(_) => 3,
            EnvConfig::Reacher(_) => 10,
            EnvConfig::JointSpaceReacher(_) => 8,
        }
    }

    pub fn supports_state_override(&self) -> bool {
        !matches!(self, EnvConfig::Pendulum(_))
    }

    pub fn build(&self) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvConfig::Pendulum(p) => Box::new(Pendulum::new(p.clone())?),
            EnvConfig::Reacher(p) => Box::new(Reacher::new(p.clone(), TargetSpace::EndEffector)?),
            EnvConfig::JointSpaceReacher(p) => Box::new(Reacher::new(p.clone(), TargetSpace::Joint)?),
        })
    }
}
