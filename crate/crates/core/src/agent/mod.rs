//! Seed selection as a sequential decision problem, trained with n-step
//! double Q-learning over the coupled GNN.

mod infer;
mod replay;
mod train;

pub use infer::{
    argmax_q, infer_iterative, infer_one_time, q_values, select_action, AblationMode, SURROGATE_SEED,
};
pub use replay::{ReplayBuffer, Transition};
pub use train::{
    load_checkpoint, save_checkpoint, train, write_training_log, EpisodeLog, TrainGraph, Trainer,
};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DdqnConfig {
    /// Number of episodes `D`.
    pub episodes: usize,
    /// Seeds per episode `b`.
    pub budget: usize,
    /// Return horizon `n`.
    pub n_step: usize,
    pub gamma: f64,
    pub eps_start: f64,
    pub eps_end: f64,
    pub batch: usize,
    /// Target network sync period `m`, in episodes.
    pub sync_every: usize,
    pub capacity: usize,
    pub lr: f64,
    /// RR sets per node in each episode's reward pool.
    pub pool_factor: usize,
    /// Sample the reward pool once per graph instead of once per episode.
    pub fixed_pool: bool,
    /// Pick the bootstrap action with the behavior network and value it with
    /// the target network, instead of maximizing over the target network.
    pub decoupled_argmax: bool,
}

impl Default for DdqnConfig {
    fn default() -> Self {
        DdqnConfig {
            episodes: 1000,
            budget: 5,
            n_step: 2,
            gamma: 0.99,
            eps_start: 1.0,
            eps_end: 0.05,
            batch: 64,
            sync_every: 10,
            capacity: 4096,
            lr: 1e-3,
            pool_factor: 256,
            fixed_pool: false,
            decoupled_argmax: false,
        }
    }
}

impl DdqnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_step == 0 || self.n_step > self.budget {
            return bad(format!("n_step {} must be in 1..={}", self.n_step, self.budget));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1]", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_end) {
            return bad("epsilon outside [0, 1]".into());
        }
        if self.eps_end > self.eps_start {
            return bad("eps_end exceeds eps_start".into());
        }
        if self.batch == 0 || self.capacity == 0 || self.sync_every == 0 || self.pool_factor == 0 {
            return bad("batch, capacity, sync_every and pool_factor must be >= 1".into());
        }
        Ok(())
    }

    /// Exploration rate of episode `e`: exponential decay from `eps_start`,
    /// reaching 0.1 at 80% of the episodes, floored at `eps_end`.
    pub fn epsilon(&self, e: usize) -> f64 {
        const AT_80: f64 = 0.1;
        if self.eps_start <= self.eps_end || self.eps_start <= AT_80 {
            return self.eps_start.max(self.eps_end);
        }
        let horizon = (0.8 * self.episodes as f64).max(1.0);
        let rate = (AT_80 / self.eps_start).ln() / horizon;
        (self.eps_start * (rate * e as f64).exp()).max(self.eps_end)
    }

    /// `key=value` pairs recorded in checkpoints.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        [
            ("episodes", self.episodes.to_string()),
            ("budget", self.budget.to_string()),
            ("n_step", self.n_step.to_string()),
            ("gamma", self.gamma.to_string()),
            ("eps_start", self.eps_start.to_string()),
            ("eps_end", self.eps_end.to_string()),
            ("batch", self.batch.to_string()),
            ("sync_every", self.sync_every.to_string()),
            ("capacity", self.capacity.to_string()),
            ("lr", self.lr.to_string()),
            ("pool_factor", self.pool_factor.to_string()),
            ("fixed_pool", self.fixed_pool.to_string()),
            ("decoupled_argmax", self.decoupled_argmax.to_string()),
        ]
        .into_iter()
        .map(|(k, v)| (format!("ddqn.{k}"), v))
        .collect()
    }
}

#[cfg(test)]
mod tests;
