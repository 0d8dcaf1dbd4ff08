//! Gradient-estimate quality: how well small-batch training gradients point
//! along a large-sample approximation of the true gradient.
//!
//! All gradients are taken at the checkpoint parameters with the rollout
//! collected by those same parameters, so every importance ratio is exactly
//! 1 (the state at the start of a PPO epoch). Sampling works in shards of
//! `shard_len` transitions, each a fresh rollout from a reset processed like
//! a training rollout (GAE, per-rollout advantage normalization).

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::policy::FlatParams;
use crate::ppo::{Checkpoint, LossAccumulator, LossTerm, PolicySnapshot, TermGradients};
use crate::rng::{derive_seed, purpose, Stream};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompareMode {
    /// Mean cosine of each estimate with the oracle gradient.
    Oracle,
    /// Mean cosine over all pairs of estimates.
    Pairwise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradSimConfig {
    pub oracle_samples: usize,
    pub batch_sizes: Vec<usize>,
    pub n_estimates: usize,
    pub terms: Vec<LossTerm>,
    pub mode: CompareMode,
    /// Transitions per sampled rollout; defaults to the run's rollout length.
    pub shard_len: Option<usize>,
    pub seed: u64,
}

impl Default for GradSimConfig {
    fn default() -> Self {
        Self {
            oracle_samples: 200_000,
            batch_sizes: alloc::vec![64],
            n_estimates: 200,
            terms: LossTerm::ALL.to_vec(),
            mode: CompareMode::Oracle,
            shard_len: None,
            seed: 0,
        }
    }
}

impl GradSimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimates < 2 {
            return Err(Error::config("n_estimates must be at least 2"));
        }
        if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) {
            return Err(Error::config("batch sizes must be positive"));
        }
        if self.terms.is_empty() {
            return Err(Error::config("no loss terms selected"));
        }
        if self.shard_len == Some(0) {
            return Err(Error::config("shard_len must be positive"));
        }
        if self.mode == CompareMode::Oracle {
            let largest = self.batch_sizes.iter().copied().max().unwrap_or(0);
            if self.oracle_samples <= largest {
                return Err(Error::config(
                    "oracle_samples must exceed every estimate batch size",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cosine {
    pub value: f64,
    /// Set when either vector has norm below 1e-12; `value` is then 0.
    pub degenerate: bool,
}

/// `⟨a, b⟩ / (‖a‖·‖b‖)`.
pub fn cosine_similarity(a: &FlatParams, b: &FlatParams) -> Result<Cosine> {
    if a.len() != b.len() {
        return Err(Error::config("cosine similarity of vectors with different layouts"));
    }
    a.check_same_layout(b)
        .map_err(|_| Error::config("cosine similarity of vectors with different layouts"))?;
    let (na, nb) = (a.norm(), b.norm());
    if na < 1e-12 || nb < 1e-12 {
        return Ok(Cosine {
            value: 0.0,
            degenerate: true,
        });
    }
    Ok(Cosine {
        value: (a.dot(b) / (na * nb)).clamp(-1.0, 1.0),
        degenerate: false,
    })
}

/// Shards processed per fan-out round; bounds memory for very large oracles.
const SHARDS_PER_ROUND: usize = 64;

/// Loss-term gradients averaged over `samples` fresh transitions. Shard `k`
/// uses seed `derive(seed, ORACLE, k)`; partial sums merge in shard order.
pub fn sampled_gradients<E: Executor + ?Sized>(
    exec: &E,
    policy: &PolicySnapshot,
    samples: usize,
    shard_len: usize,
    seed: u64,
) -> Result<TermGradients> {
    if samples == 0 || shard_len == 0 {
        return Err(Error::config("sample counts must be positive"));
    }
    let shards = samples.div_ceil(shard_len);
    let scale = 1.0 / samples as f64;
    let plen = policy.params.len();
    let mut total = LossAccumulator::new(plen, true);
    let mut start = 0;
    while start < shards {
        let end = (start + SHARDS_PER_ROUND).min(shards);
        let parts = exec.map(end - start, |i| -> Result<LossAccumulator> {
            let k = start + i;
            let len = shard_len.min(samples - k * shard_len);
            let buf = policy.sample_rollout(len, derive_seed(seed, &[purpose::ORACLE, k as u64]))?;
            let batch = buf.batch();
            let mut acc = LossAccumulator::new(plen, true);
            acc.add(&policy.net, &policy.params, &batch, 0, len, scale, &policy.loss_cfg);
            Ok(acc)
        });
        for p in parts {
            total.merge(&p?);
        }
        start = end;
    }
    Ok(total
        .gradients(&policy.net, &policy.params)
        .expect("accumulator built with gradients"))
}

/// Oracle gradient of one loss term.
pub fn oracle_gradient<E: Executor + ?Sized>(
    exec: &E,
    policy: &PolicySnapshot,
    term: LossTerm,
    samples: usize,
    shard_len: usize,
    seed: u64,
) -> Result<FlatParams> {
    Ok(sampled_gradients(exec, policy, samples, shard_len, seed)?.term(term, &policy.loss_cfg))
}

/// One training-style gradient estimate from `batch_size` transitions.
///
/// Batches smaller than a shard are a uniformly drawn minibatch of one
/// fresh `shard_len` rollout, as in training; larger batches consist of
/// whole shards and go through [`sampled_gradients`].
pub fn estimate_term_gradients(
    policy: &PolicySnapshot,
    batch_size: usize,
    shard_len: usize,
    seed: u64,
) -> Result<TermGradients> {
    if batch_size >= shard_len {
        return sampled_gradients(&crate::exec::Sequential, policy, batch_size, shard_len, seed);
    }
    let buf = policy.sample_rollout(shard_len, derive_seed(seed, &[purpose::ORACLE, 0]))?;
    let mut idx: Vec<usize> = (0..shard_len).collect();
    Stream::derived(seed, &[purpose::SHUFFLE]).shuffle(&mut idx);
    idx.truncate(batch_size);
    let batch = buf.batch().gather(&idx);
    let mut acc = LossAccumulator::new(policy.params.len(), true);
    acc.add(&policy.net, &policy.params, &batch, 0, batch_size, 1.0 / batch_size as f64, &policy.loss_cfg);
    Ok(acc.gradients(&policy.net, &policy.params).expect("gradients requested"))
}

/// `n` independent estimates; estimate `i` uses seed `derive(seed, ESTIMATE, i)`.
pub fn estimate_gradients<E: Executor + ?Sized>(
    exec: &E,
    policy: &PolicySnapshot,
    term: LossTerm,
    batch_size: usize,
    n: usize,
    shard_len: usize,
    seed: u64,
) -> Result<Vec<FlatParams>> {
    estimate_all_terms(exec, policy, batch_size, n, shard_len, seed)?
        .into_iter()
        .map(|g| Ok(g.term(term, &policy.loss_cfg)))
        .collect()
}

fn estimate_all_terms<E: Executor + ?Sized>(
    exec: &E,
    policy: &PolicySnapshot,
    batch_size: usize,
    n: usize,
    shard_len: usize,
    seed: u64,
) -> Result<Vec<TermGradients>> {
    exec.map(n, |i| {
        estimate_term_gradients(policy, batch_size, shard_len, derive_seed(seed, &[purpose::ESTIMATE, i as u64]))
    })
    .into_iter()
    .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradQualityRecord {
    pub checkpoint: String,
    pub env_step: u64,
    pub gradient_step: u64,
    pub term: LossTerm,
    pub batch_size: usize,
    pub mode: CompareMode,
    pub mean_cos: f64,
    pub std_cos: f64,
    /// Number of cosines averaged.
    pub n: usize,
    /// Norm of the oracle gradient (oracle mode only).
    pub oracle_norm: Option<f64>,
    /// Cosines that were 0 because a gradient vanished.
    pub degenerate: usize,
}

fn summarize(cosines: &[Cosine]) -> (f64, f64, usize) {
    let v: Vec<f64> = cosines.iter().map(|c| c.value).collect();
    let std = if v.len() > 1 { stats::std_sample(&v) } else { 0.0 };
    (stats::mean(&v), std, cosines.iter().filter(|c| c.degenerate).count())
}

/// Records for one checkpoint: every (batch size, term) pair.
pub fn analyze_checkpoint<E: Executor + ?Sized>(
    exec: &E,
    ckpt: &Checkpoint,
    cfg: &GradSimConfig,
) -> Result<Vec<GradQualityRecord>> {
    cfg.validate()?;
    let policy = PolicySnapshot::from_checkpoint(ckpt)?;
    let shard_len = cfg.shard_len.unwrap_or(ckpt.setup.ppo.rollout_len());
    let base = derive_seed(cfg.seed, &[ckpt.env_step]);
    let oracle = match cfg.mode {
        CompareMode::Oracle => Some(sampled_gradients(
            exec,
            &policy,
            cfg.oracle_samples,
            shard_len,
            derive_seed(base, &[purpose::ORACLE]),
        )?),
        CompareMode::Pairwise => None,
    };
    let mut records = Vec::new();
    for &batch in &cfg.batch_sizes {
        let est = estimate_all_terms(
            exec,
            &policy,
            batch,
            cfg.n_estimates,
            shard_len,
            derive_seed(base, &[purpose::ESTIMATE, batch as u64]),
        )?;
        for &term in &cfg.terms {
            let grads: Vec<FlatParams> = est.iter().map(|g| g.term(term, &policy.loss_cfg)).collect();
            let (cosines, oracle_norm) = match &oracle {
                Some(o) => {
                    let og = o.term(term, &policy.loss_cfg);
                    let c = grads
                        .iter()
                        .map(|g| cosine_similarity(g, &og))
                        .collect::<Result<Vec<_>>>()?;
                    (c, Some(og.norm()))
                }
                None => {
                    let mut c = Vec::new();
                    for i in 0..grads.len() {
                        for j in i + 1..grads.len() {
                            c.push(cosine_similarity(&grads[i], &grads[j])?);
                        }
                    }
                    (c, None)
                }
            };
            let (mean_cos, std_cos, degenerate) = summarize(&cosines);
            records.push(GradQualityRecord {
                checkpoint: ckpt.label(),
                env_step: ckpt.env_step,
                gradient_step: ckpt.gradient_step,
                term,
                batch_size: batch,
                mode: cfg.mode,
                mean_cos,
                std_cos,
                n: cosines.len(),
                oracle_norm,
                degenerate,
            });
        }
    }
    Ok(records)
}

/// Records for a checkpoint series, ordered by env step.
pub fn analyze_run<E: Executor + ?Sized>(
    exec: &E,
    series: &[Checkpoint],
    cfg: &GradSimConfig,
) -> Result<Vec<GradQualityRecord>> {
    if series.is_empty() {
        return Err(Error::config("no checkpoints to analyze"));
    }
    let mut order: Vec<&Checkpoint> = series.iter().collect();
    order.sort_by_key(|c| c.env_step);
    let mut out = Vec::new();
    for c in order {
        out.extend(analyze_checkpoint(exec, c, cfg)?);
    }
    Ok(out)
}
