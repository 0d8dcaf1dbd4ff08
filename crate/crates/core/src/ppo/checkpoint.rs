//! Complete resumable training state.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::actuation::Actuator;
use crate::envs::EnvSnapshot;
use crate::error::Result;
use crate::policy::{ActorCritic, FlatParams};
use crate::rng::{purpose, Stream, StreamState};

use super::{
    collect_rollout, AdamState, Batch, LossConfig, LossTerms, ObsNormalizer, PolicyContext,
    RolloutBuffer, TrainSetup,
};

/// Bumped whenever the checkpoint contents change meaning.
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerRngState {
    pub action: StreamState,
    pub shuffle: StreamState,
    pub env: StreamState,
}

/// Everything needed to continue a run bit-identically, plus the last
/// rollout (frozen) and the loss of the saved parameters on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub setup: TrainSetup,
    pub params: Vec<f64>,
    pub adam: AdamState,
    pub normalizer: Option<ObsNormalizer>,
    pub rng: TrainerRngState,
    pub env: EnvSnapshot,
    /// Return accumulated so far in the unfinished training episode.
    pub episode_return: f64,
    pub env_step: u64,
    pub gradient_step: u64,
    pub iteration: u64,
    pub frozen: Option<Batch>,
    pub stored_loss: Option<LossTerms>,
}

impl Checkpoint {
    /// File-name friendly label, e.g. `ckpt_000004096`.
    pub fn label(&self) -> alloc::string::String {
        alloc::format!("ckpt_{:09}", self.env_step)
    }
}

/// The policy stored in a checkpoint, ready to act and to be differentiated.
#[derive(Debug, Clone)]
pub struct PolicySnapshot {
    pub setup: TrainSetup,
    pub net: ActorCritic,
    pub params: FlatParams,
    pub normalizer: Option<ObsNormalizer>,
    pub actuator: Actuator,
    pub loss_cfg: LossConfig,
}

impl PolicySnapshot {
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let net = ckpt.setup.network()?;
        let params = FlatParams::from_data(ckpt.params.clone(), net.layout().clone())?;
        Ok(Self {
            actuator: ckpt.setup.actuator()?,
            loss_cfg: LossConfig::from(&ckpt.setup.ppo),
            normalizer: ckpt.normalizer.clone(),
            setup: ckpt.setup.clone(),
            net,
            params,
        })
    }

    /// Context acting with `params` (e.g. a perturbed copy) but this
    /// snapshot's network and normalization.
    pub fn context_with<'a>(&'a self, params: &'a FlatParams) -> PolicyContext<'a> {
        PolicyContext {
            net: &self.net,
            params,
            normalizer: self.normalizer.as_ref(),
        }
    }

    pub fn context(&self) -> PolicyContext<'_> {
        self.context_with(&self.params)
    }

    /// Collects `len` fresh on-policy transitions starting from a reset,
    /// exactly as the trainer does (GAE, per-rollout advantage
    /// normalization). All randomness derives from `seed`.
    pub fn sample_rollout(&self, len: usize, seed: u64) -> Result<RolloutBuffer> {
        let mut env = self.setup.env.build()?;
        let mut env_rng = Stream::derived(seed, &[purpose::ENV]);
        env.reset(&mut env_rng);
        let mut action_rng = Stream::derived(seed, &[purpose::ACTION]);
        let mut ep = 0.0;
        collect_rollout(
            self.context(),
            env.as_mut(),
            &self.actuator,
            len,
            self.setup.ppo.gamma,
            self.setup.ppo.gae_lambda,
            &mut action_rng,
            &mut env_rng,
            &mut ep,
        )
    }
}
