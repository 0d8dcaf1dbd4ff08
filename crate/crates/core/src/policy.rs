//! Gaussian MLP policy and value network with hand-written backpropagation.
//!
//! All parameters of both networks live in one [`FlatParams`] vector. The
//! networks themselves ([`ActorCritic`]) are stateless descriptions of where
//! each tensor sits in that vector, so evaluating a policy can never mutate
//! the parameters it reads.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{axpy, dot, exp, sqrt, tanh, HALF_LN_2PI};
use crate::rng::Stream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl Block {
    pub fn size(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn range(&self) -> core::ops::Range<usize> {
        self.offset..self.offset + self.size()
    }
}

/// Ordered `(name, shape, offset)` table partitioning a flat vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layout {
    blocks: Vec<Block>,
    len: usize,
}

impl Layout {
    pub fn new(shapes: &[(&str, Vec<usize>)]) -> Self {
        let mut offset = 0;
        let blocks = shapes
            .iter()
            .map(|(name, shape)| {
                let b = Block {
                    name: String::from(*name),
                    shape: shape.clone(),
                    offset,
                };
                offset += b.size();
                b
            })
            .collect();
        Self { blocks, len: offset }
    }

    /// Rebuilds a layout from stored blocks, checking that they tile `0..len`.
    pub fn from_blocks(blocks: Vec<Block>) -> Result<Self> {
        let mut offset = 0;
        for b in &blocks {
            if b.offset != offset {
                return Err(Error::Layout(format!(
                    "block {} starts at {}, expected {offset}",
                    b.name, b.offset
                )));
            }
            offset += b.size();
        }
        Ok(Self { blocks, len: offset })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }
}

/// Flat parameter (or gradient) vector with its layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatParams {
    pub data: Vec<f64>,
    pub layout: Arc<Layout>,
}

impl FlatParams {
    pub fn zeros(layout: Arc<Layout>) -> Self {
        Self {
            data: vec![0.0; layout.len()],
            layout,
        }
    }

    pub fn from_data(data: Vec<f64>, layout: Arc<Layout>) -> Result<Self> {
        if data.len() != layout.len() {
            return Err(Error::Layout(format!(
                "{} values for a layout of {}",
                data.len(),
                layout.len()
            )));
        }
        Ok(Self { data, layout })
    }

    /// Concatenates named tensors in layout order.
    pub fn flatten(layout: Arc<Layout>, tensors: &[Vec<f64>]) -> Result<Self> {
        if tensors.len() != layout.blocks().len() {
            return Err(Error::Layout("tensor count does not match layout".into()));
        }
        let mut data = Vec::with_capacity(layout.len());
        for (b, t) in layout.blocks().iter().zip(tensors) {
            if t.len() != b.size() {
                return Err(Error::Layout(format!("tensor {} has wrong size", b.name)));
            }
            data.extend_from_slice(t);
        }
        Ok(Self { data, layout })
    }

    pub fn unflatten(&self) -> Vec<Vec<f64>> {
        self.layout
            .blocks()
            .iter()
            .map(|b| self.data[b.range()].to_vec())
            .collect()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.layout.clone())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn block(&self, name: &str) -> Option<&[f64]> {
        self.layout.block(name).map(|b| &self.data[b.range()])
    }

    pub fn check_same_layout(&self, other: &FlatParams) -> Result<()> {
        if Arc::ptr_eq(&self.layout, &other.layout) || self.layout == other.layout {
            Ok(())
        } else {
            Err(Error::Layout("flat vectors use different layouts".into()))
        }
    }

    pub fn dot(&self, other: &FlatParams) -> f64 {
        dot(&self.data, &other.data)
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.dot(self))
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &FlatParams) {
        axpy(alpha, &other.data, &mut self.data);
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|x| *x *= alpha);
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

// ---------------------------------------------------------------------------
// MLP

/// Fully connected tanh network description.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_layers: Vec<usize>,
    pub output_dim: usize,
}

impl MlpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_layers.contains(&0) {
            return Err(Error::config("network dimensions must be at least 1"));
        }
        Ok(())
    }

    fn dims(&self) -> Vec<usize> {
        let mut d = vec![self.input_dim];
        d.extend_from_slice(&self.hidden_layers);
        d.push(self.output_dim);
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Dense {
    w: usize,
    b: usize,
    fan_in: usize,
    fan_out: usize,
}

/// Offsets of one MLP's tensors inside a flat vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mlp {
    layers: Vec<Dense>,
}

/// Activations recorded during a batched forward pass.
#[derive(Debug, Clone)]
pub struct MlpTape {
    /// `acts[0]` is the input, `acts[k]` the output of layer `k`.
    acts: Vec<Vec<f64>>,
    rows: usize,
}

impl MlpTape {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("tape has an input")
    }
}

impl Mlp {
    fn shapes(prefix: &str, spec: &MlpSpec) -> Vec<(String, Vec<usize>)> {
        let dims = spec.dims();
        let n = dims.len() - 1;
        let mut out = Vec::new();
        for i in 0..n {
            let tag = if i + 1 == n { String::from("out") } else { format!("{i}") };
            out.push((format!("{prefix}.{tag}.weight"), vec![dims[i + 1], dims[i]]));
            out.push((format!("{prefix}.{tag}.bias"), vec![dims[i + 1]]));
        }
        out
    }

    fn locate(layout: &Layout, prefix: &str, spec: &MlpSpec) -> Self {
        let dims = spec.dims();
        let n = dims.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let tag = if i + 1 == n { String::from("out") } else { format!("{i}") };
                let w = layout.block(&format!("{prefix}.{tag}.weight")).expect("weight block");
                let b = layout.block(&format!("{prefix}.{tag}.bias")).expect("bias block");
                Dense {
                    w: w.offset,
                    b: b.offset,
                    fan_in: dims[i],
                    fan_out: dims[i + 1],
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("at least one layer").fan_out
    }

    /// Batched forward pass over `rows` inputs laid out row-major.
    pub fn forward(&self, params: &[f64], input: &[f64], rows: usize) -> MlpTape {
        debug_assert_eq!(input.len(), rows * self.input_dim());
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (k, l) in self.layers.iter().enumerate() {
            let w = &params[l.w..l.w + l.fan_in * l.fan_out];
            let b = &params[l.b..l.b + l.fan_out];
            let x = &acts[k];
            let mut y = vec![0.0; rows * l.fan_out];
            for r in 0..rows {
                let xr = &x[r * l.fan_in..(r + 1) * l.fan_in];
                let yr = &mut y[r * l.fan_out..(r + 1) * l.fan_out];
                for (o, yo) in yr.iter_mut().enumerate() {
                    let z = b[o] + dot(&w[o * l.fan_in..(o + 1) * l.fan_in], xr);
                    *yo = if k == last { z } else { tanh(z) };
                }
            }
            acts.push(y);
        }
        MlpTape { acts, rows }
    }

    /// Accumulates `∂L/∂params` into `grad` given `∂L/∂output` for every row.
    pub fn backward(&self, params: &[f64], tape: &MlpTape, d_out: &[f64], grad: &mut [f64]) {
        let rows = tape.rows;
        let mut delta = d_out.to_vec();
        for k in (0..self.layers.len()).rev() {
            let l = self.layers[k];
            let x = &tape.acts[k];
            {
                let (gw, gb) = if l.w < l.b {
                    let (lo, hi) = grad.split_at_mut(l.b);
                    (&mut lo[l.w..l.w + l.fan_in * l.fan_out], &mut hi[..l.fan_out])
                } else {
                    let (lo, hi) = grad.split_at_mut(l.w);
                    (&mut hi[..l.fan_in * l.fan_out], &mut lo[l.b..l.b + l.fan_out])
                };
                for r in 0..rows {
                    let xr = &x[r * l.fan_in..(r + 1) * l.fan_in];
                    let dr = &delta[r * l.fan_out..(r + 1) * l.fan_out];
                    for (o, &d) in dr.iter().enumerate() {
                        if d != 0.0 {
                            axpy(d, xr, &mut gw[o * l.fan_in..(o + 1) * l.fan_in]);
                        }
                        gb[o] += d;
                    }
                }
            }
            if k == 0 {
                break;
            }
            let w = &params[l.w..l.w + l.fan_in * l.fan_out];
            let mut prev = vec![0.0; rows * l.fan_in];
            for r in 0..rows {
                let dr = &delta[r * l.fan_out..(r + 1) * l.fan_out];
                let pr = &mut prev[r * l.fan_in..(r + 1) * l.fan_in];
                for (o, &d) in dr.iter().enumerate() {
                    if d != 0.0 {
                        axpy(d, &w[o * l.fan_in..(o + 1) * l.fan_in], pr);
                    }
                }
                // tanh'(z) = 1 − h²
                let hr = &x[r * l.fan_in..(r + 1) * l.fan_in];
                for (p, h) in pr.iter_mut().zip(hr) {
                    *p *= 1.0 - h * h;
                }
            }
            delta = prev;
        }
    }
}

// ---------------------------------------------------------------------------
// Actor-critic

/// Shapes of the policy and value networks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetSpec {
    pub obs_dim: usize,
    pub act_dim: usize,
    #[serde(default = "default_hidden")]
    pub hidden_layers: Vec<usize>,
}

fn default_hidden() -> Vec<usize> {
    vec![64, 64]
}

impl NetSpec {
    pub fn new(obs_dim: usize, act_dim: usize) -> Self {
        Self {
            obs_dim,
            act_dim,
            hidden_layers: default_hidden(),
        }
    }

    fn policy_mlp(&self) -> MlpSpec {
        MlpSpec {
            input_dim: self.obs_dim,
            hidden_layers: self.hidden_layers.clone(),
            output_dim: self.act_dim,
        }
    }

    fn value_mlp(&self) -> MlpSpec {
        MlpSpec {
            input_dim: self.obs_dim,
            hidden_layers: self.hidden_layers.clone(),
            output_dim: 1,
        }
    }
}

/// Separate policy-mean and value MLPs plus a state-independent `log_std`.
#[derive(Debug, Clone)]
pub struct ActorCritic {
    spec: NetSpec,
    layout: Arc<Layout>,
    pi: Mlp,
    vf: Mlp,
    log_std: core::ops::Range<usize>,
    policy_range: core::ops::Range<usize>,
    value_range: core::ops::Range<usize>,
}

/// Per-sample Gaussian parameters from a batched policy pass.
#[derive(Debug, Clone)]
pub struct PolicyOutput {
    pub tape: MlpTape,
}

impl ActorCritic {
    pub fn new(spec: NetSpec) -> Result<Self> {
        spec.policy_mlp().validate()?;
        let mut shapes = Mlp::shapes("pi", &spec.policy_mlp());
        shapes.push((String::from("log_std"), vec![spec.act_dim]));
        shapes.extend(Mlp::shapes("vf", &spec.value_mlp()));
        let refs: Vec<(&str, Vec<usize>)> =
            shapes.iter().map(|(n, s)| (n.as_str(), s.clone())).collect();
        let layout = Arc::new(Layout::new(&refs));
        let pi = Mlp::locate(&layout, "pi", &spec.policy_mlp());
        let vf = Mlp::locate(&layout, "vf", &spec.value_mlp());
        let ls = layout.block("log_std").expect("log_std").range();
        let policy_range = 0..ls.end;
        let value_range = ls.end..layout.len();
        Ok(Self {
            spec,
            layout,
            pi,
            vf,
            log_std: ls,
            policy_range,
            value_range,
        })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn obs_dim(&self) -> usize {
        self.spec.obs_dim
    }

    pub fn act_dim(&self) -> usize {
        self.spec.act_dim
    }

    /// Index range of the policy parameters (mean network and `log_std`).
    pub fn policy_range(&self) -> core::ops::Range<usize> {
        self.policy_range.clone()
    }

    pub fn value_range(&self) -> core::ops::Range<usize> {
        self.value_range.clone()
    }

    pub fn log_std_range(&self) -> core::ops::Range<usize> {
        self.log_std.clone()
    }

    pub fn policy_net(&self) -> &Mlp {
        &self.pi
    }

    pub fn value_net(&self) -> &Mlp {
        &self.vf
    }

    pub fn check_params(&self, params: &FlatParams) -> Result<()> {
        if params.len() != self.layout.len() || *params.layout != *self.layout {
            return Err(Error::config(format!(
                "parameter vector of {} entries does not match the network ({})",
                params.len(),
                self.layout.len()
            )));
        }
        Ok(())
    }

    /// Scaled-uniform initialization: weights `U(±g·√(3/fan_in))` with gain
    /// √2 on hidden layers, 0.01 on the policy head and 1 on the value head;
    /// zero biases and `log_std = 0`.
    pub fn init_params(&self, rng: &mut Stream) -> FlatParams {
        let mut p = FlatParams::zeros(self.layout.clone());
        let init = |mlp: &Mlp, head_gain: f64, data: &mut [f64], rng: &mut Stream| {
            let last = mlp.layers.len() - 1;
            for (k, l) in mlp.layers.iter().enumerate() {
                let gain = if k == last { head_gain } else { core::f64::consts::SQRT_2 };
                let a = gain * sqrt(3.0 / l.fan_in as f64);
                for w in &mut data[l.w..l.w + l.fan_in * l.fan_out] {
                    *w = rng.uniform_in(-a, a);
                }
            }
        };
        init(&self.pi, 0.01, &mut p.data, rng);
        init(&self.vf, 1.0, &mut p.data, rng);
        p
    }

    pub fn log_std<'a>(&self, params: &'a FlatParams) -> &'a [f64] {
        &params.data[self.log_std.clone()]
    }

    /// Mean action and `log_std` for a single observation.
    pub fn forward_policy(&self, params: &FlatParams, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_params(params)?;
        if obs.len() != self.spec.obs_dim {
            return Err(Error::config(format!(
                "observation has {} entries, network expects {}",
                obs.len(),
                self.spec.obs_dim
            )));
        }
        let tape = self.pi.forward(&params.data, obs, 1);
        Ok((tape.output().to_vec(), self.log_std(params).to_vec()))
    }

    pub fn forward_value(&self, params: &FlatParams, obs: &[f64]) -> Result<f64> {
        self.check_params(params)?;
        if obs.len() != self.spec.obs_dim {
            return Err(Error::config("observation size does not match the value network"));
        }
        Ok(self.vf.forward(&params.data, obs, 1).output()[0])
    }

    /// Batched policy means; `obs` is `rows × obs_dim` row-major.
    pub fn policy_batch(&self, params: &FlatParams, obs: &[f64], rows: usize) -> MlpTape {
        self.pi.forward(&params.data, obs, rows)
    }

    pub fn value_batch(&self, params: &FlatParams, obs: &[f64], rows: usize) -> MlpTape {
        self.vf.forward(&params.data, obs, rows)
    }
}

/// Diagonal Gaussian log-density `Σᵢ −(aᵢ−μᵢ)²/(2σᵢ²) − log σᵢ − ½·log 2π`.
pub fn log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) * exp(-ls);
            -0.5 * z * z - ls - HALF_LN_2PI
        })
        .sum()
}

/// Differential entropy of the diagonal Gaussian.
pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|ls| ls + 0.5 + HALF_LN_2PI).sum()
}

/// `a = μ + σ ⊙ z` with `z` drawn from `rng`. The sample is not clipped; the
/// caller clips for the environment and keeps this value for `log_prob`.
pub fn sample_action(mean: &[f64], log_std: &[f64], rng: &mut Stream) -> Vec<f64> {
    mean.iter()
        .zip(log_std)
        .map(|(m, ls)| m + exp(*ls) * rng.normal())
        .collect()
}
