//! Clipped surrogate loss with separately differentiable terms.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math::exp;
use crate::policy::{entropy, ActorCritic, FlatParams};

use super::PpoConfig;

/// Aligned training samples. `observations` are what the networks see
/// (already normalized when observation normalization is on).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Batch {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub observations: Vec<f64>,
    pub actions: Vec<f64>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub old_values: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.old_log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_log_probs.is_empty()
    }

    pub fn gather(&self, idx: &[usize]) -> Batch {
        let mut b = Batch {
            obs_dim: self.obs_dim,
            act_dim: self.act_dim,
            ..Default::default()
        };
        for &i in idx {
            b.observations
                .extend_from_slice(&self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]);
            b.actions
                .extend_from_slice(&self.actions[i * self.act_dim..(i + 1) * self.act_dim]);
            b.old_log_probs.push(self.old_log_probs[i]);
            b.advantages.push(self.advantages[i]);
            b.returns.push(self.returns[i]);
            b.old_values.push(self.old_values[i]);
        }
        b
    }

    /// Plain-text table of the batch, one row per sample.
    pub fn dump(&self) -> alloc::string::String {
        use core::fmt::Write;
        let mut out = alloc::string::String::from("row,observation,action,old_log_prob,advantage,return,old_value\n");
        for i in 0..self.len() {
            let o = &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim];
            let a = &self.actions[i * self.act_dim..(i + 1) * self.act_dim];
            let _ = writeln!(
                out,
                "{i},{:?},{:?},{:e},{:e},{:e},{:e}",
                o, a, self.old_log_probs[i], self.advantages[i], self.returns[i], self.old_values[i]
            );
        }
        out
    }

    fn rows(&self, start: usize, end: usize) -> BatchRows<'_> {
        BatchRows {
            observations: &self.observations[start * self.obs_dim..end * self.obs_dim],
            actions: &self.actions[start * self.act_dim..end * self.act_dim],
            old_log_probs: &self.old_log_probs[start..end],
            advantages: &self.advantages[start..end],
            returns: &self.returns[start..end],
        }
    }
}

struct BatchRows<'a> {
    observations: &'a [f64],
    actions: &'a [f64],
    old_log_probs: &'a [f64],
    advantages: &'a [f64],
    returns: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub clip_range: f64,
    pub vf_coef: f64,
    pub ent_coef: f64,
}

impl From<&PpoConfig> for LossConfig {
    fn from(c: &PpoConfig) -> Self {
        Self {
            clip_range: c.clip_range,
            vf_coef: c.vf_coef,
            ent_coef: c.ent_coef,
        }
    }
}

/// `total = policy + vf_coef·value − ent_coef·entropy`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub total: f64,
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

impl LossTerms {
    pub fn is_finite(&self) -> bool {
        self.total.is_finite() && self.policy.is_finite() && self.value.is_finite() && self.entropy.is_finite()
    }

    pub fn get(&self, term: LossTerm) -> f64 {
        match term {
            LossTerm::Total => self.total,
            LossTerm::Policy => self.policy,
            LossTerm::Value => self.value,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossTerm {
    Total,
    Policy,
    Value,
}

impl LossTerm {
    pub const ALL: [LossTerm; 3] = [LossTerm::Total, LossTerm::Policy, LossTerm::Value];

    pub fn name(self) -> &'static str {
        match self {
            LossTerm::Total => "total",
            LossTerm::Policy => "policy",
            LossTerm::Value => "value",
        }
    }
}

/// Gradients of the individual loss terms. The policy term only touches
/// policy parameters and the value term only value parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TermGradients {
    pub policy: FlatParams,
    pub value: FlatParams,
    pub entropy: FlatParams,
}

impl TermGradients {
    pub fn total(&self, cfg: &LossConfig) -> FlatParams {
        let mut g = self.policy.clone();
        g.axpy(cfg.vf_coef, &self.value);
        if cfg.ent_coef != 0.0 {
            g.axpy(-cfg.ent_coef, &self.entropy);
        }
        g
    }

    pub fn term(&self, term: LossTerm, cfg: &LossConfig) -> FlatParams {
        match term {
            LossTerm::Total => self.total(cfg),
            LossTerm::Policy => self.policy.clone(),
            LossTerm::Value => self.value.clone(),
        }
    }
}

/// Rows processed per forward/backward chunk.
const CHUNK: usize = 256;

/// Sums per-sample loss contributions (and optionally gradients) over any
/// number of chunks, each pre-scaled by `1 / total_rows`. Partial
/// accumulators can be merged, which lets large batches be split across
/// workers and recombined in a fixed order.
#[derive(Debug, Clone)]
pub struct LossAccumulator {
    policy: f64,
    value: f64,
    grad_policy: Option<Vec<f64>>,
    grad_value: Option<Vec<f64>>,
}

impl LossAccumulator {
    pub fn new(param_len: usize, with_grad: bool) -> Self {
        Self {
            policy: 0.0,
            value: 0.0,
            grad_policy: with_grad.then(|| vec![0.0; param_len]),
            grad_value: with_grad.then(|| vec![0.0; param_len]),
        }
    }

    /// Adds rows `start..end` of `batch`; `scale` is `1 / total_rows`.
    #[allow(clippy::too_many_arguments)]
    pub fn add(
        &mut self,
        net: &ActorCritic,
        params: &FlatParams,
        batch: &Batch,
        start: usize,
        end: usize,
        scale: f64,
        cfg: &LossConfig,
    ) {
        let mut s = start;
        while s < end {
            let e = (s + CHUNK).min(end);
            self.add_chunk(net, params, batch.rows(s, e), e - s, scale, cfg);
            s = e;
        }
    }

    fn add_chunk(
        &mut self,
        net: &ActorCritic,
        params: &FlatParams,
        rows: BatchRows<'_>,
        n: usize,
        scale: f64,
        cfg: &LossConfig,
    ) {
        let act_dim = net.act_dim();
        let log_std = net.log_std(params);
        let inv_var: Vec<f64> = log_std.iter().map(|ls| exp(-2.0 * ls)).collect();
        let eps = cfg.clip_range;
        let want_grad = self.grad_policy.is_some();

        // policy term
        let pi_tape = net.policy_batch(params, rows.observations, n);
        let means = pi_tape.output();
        let mut d_mean = if want_grad { vec![0.0; n * act_dim] } else { Vec::new() };
        let mut d_log_std = vec![0.0; act_dim];
        for r in 0..n {
            let mu = &means[r * act_dim..(r + 1) * act_dim];
            let a = &rows.actions[r * act_dim..(r + 1) * act_dim];
            let lp = crate::policy::log_prob(mu, log_std, a);
            let ratio = exp(lp - rows.old_log_probs[r]);
            let adv = rows.advantages[r];
            let unclipped = ratio * adv;
            let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
            let (obj, d_obj_d_ratio) = if unclipped <= clipped {
                (unclipped, adv)
            } else {
                (clipped, 0.0)
            };
            self.policy -= obj * scale;
            if want_grad && d_obj_d_ratio != 0.0 {
                // ∂L/∂logπ = −scale·ratio·∂obj/∂ratio
                let g_lp = -scale * ratio * d_obj_d_ratio;
                for i in 0..act_dim {
                    let diff = a[i] - mu[i];
                    d_mean[r * act_dim + i] = g_lp * diff * inv_var[i];
                    d_log_std[i] += g_lp * (diff * diff * inv_var[i] - 1.0);
                }
            }
        }

        // value term
        let vf_tape = net.value_batch(params, rows.observations, n);
        let values = vf_tape.output();
        let mut d_value = if want_grad { vec![0.0; n] } else { Vec::new() };
        for r in 0..n {
            let err = values[r] - rows.returns[r];
            self.value += err * err * scale;
            if want_grad {
                d_value[r] = 2.0 * err * scale;
            }
        }

        if let (Some(gp), Some(gv)) = (self.grad_policy.as_mut(), self.grad_value.as_mut()) {
            net.policy_net().backward(&params.data, &pi_tape, &d_mean, gp);
            for (g, d) in gp[net.log_std_range()].iter_mut().zip(&d_log_std) {
                *g += d;
            }
            net.value_net().backward(&params.data, &vf_tape, &d_value, gv);
        }
    }

    /// Adds another partial sum.
    pub fn merge(&mut self, other: &LossAccumulator) {
        self.policy += other.policy;
        self.value += other.value;
        if let (Some(a), Some(b)) = (self.grad_policy.as_mut(), other.grad_policy.as_ref()) {
            crate::math::axpy(1.0, b, a);
        }
        if let (Some(a), Some(b)) = (self.grad_value.as_mut(), other.grad_value.as_ref()) {
            crate::math::axpy(1.0, b, a);
        }
    }

    pub fn terms(&self, net: &ActorCritic, params: &FlatParams, cfg: &LossConfig) -> LossTerms {
        let ent = entropy(net.log_std(params));
        LossTerms {
            total: self.policy + cfg.vf_coef * self.value - cfg.ent_coef * ent,
            policy: self.policy,
            value: self.value,
            entropy: ent,
        }
    }

    pub fn gradients(self, net: &ActorCritic, params: &FlatParams) -> Option<TermGradients> {
        let layout = params.layout.clone();
        let policy = FlatParams::from_data(self.grad_policy?, layout.clone()).ok()?;
        let value = FlatParams::from_data(self.grad_value?, layout.clone()).ok()?;
        let mut entropy = FlatParams::zeros(layout);
        for g in &mut entropy.data[net.log_std_range()] {
            *g = 1.0;
        }
        Some(TermGradients {
            policy,
            value,
            entropy,
        })
    }
}

/// PPO loss terms of `params` on `batch`.
///
/// `policy = −mean(min(ρA, clip(ρ, 1−ε, 1+ε)A))` with
/// `ρ = exp(logπ − logπ_old)`, `value = mean((V − R)²)`.
pub fn ppo_loss(net: &ActorCritic, params: &FlatParams, batch: &Batch, cfg: &LossConfig) -> LossTerms {
    let mut acc = LossAccumulator::new(params.len(), false);
    if !batch.is_empty() {
        acc.add(net, params, batch, 0, batch.len(), 1.0 / batch.len() as f64, cfg);
    }
    acc.terms(net, params, cfg)
}

/// Loss terms together with the exact gradient of each term.
pub fn ppo_loss_grad(
    net: &ActorCritic,
    params: &FlatParams,
    batch: &Batch,
    cfg: &LossConfig,
) -> (LossTerms, TermGradients) {
    let mut acc = LossAccumulator::new(params.len(), true);
    if !batch.is_empty() {
        acc.add(net, params, batch, 0, batch.len(), 1.0 / batch.len() as f64, cfg);
    }
    let terms = acc.terms(net, params, cfg);
    (terms, acc.gradients(net, params).expect("gradients requested"))
}
