use serde::{Deserialize, Serialize};

use crate::algorithm::AlgorithmKind;
use crate::error::{Error, Result};

/// Hyperparameters of one federated strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub kind: AlgorithmKind,
    /// Local batches per communication round.
    pub local_rounds: usize,
    pub batch_size: usize,
    pub lr: f32,
    pub momentum: f32,
    /// Proximal weight (fedprox, fednova, istprox) or contrastive weight (moon).
    pub mu: f32,
    pub moon_tau: f32,
    pub server_lr: f32,
    pub beta1: f32,
    pub beta2: f32,
    /// FedAdam adaptability constant.
    pub adam_tau: f32,
    /// FedNova effective step count; `None` means `local_rounds / active sites`.
    pub fednova_tau_eff: Option<f64>,
}

impl AlgorithmConfig {
    /// Defaults for `kind`: lr 0.01 (0.03 for FedAdam), batch 32, one local
    /// batch, mu 0.2 (MOON: mu 1, tau 0.5), FedAdam server lr 0.01, betas
    /// (0.9, 0.99), tau 0.01. Momentum is 0.9 except for the proximal
    /// family, which takes plain gradient steps.
    pub fn new(kind: AlgorithmKind) -> Self {
        Self {
            kind,
            local_rounds: 1,
            batch_size: 32,
            lr: if kind == AlgorithmKind::FedAdam { 0.03 } else { 0.01 },
            momentum: if kind.uses_proximal() { 0.0 } else { 0.9 },
            mu: if kind == AlgorithmKind::Moon { 1.0 } else { 0.2 },
            moon_tau: 0.5,
            server_lr: 0.01,
            beta1: 0.9,
            beta2: 0.99,
            adam_tau: 0.01,
            fednova_tau_eff: None,
        }
    }

    pub fn with_local_rounds(mut self, local_rounds: usize) -> Self {
        self.local_rounds = local_rounds;
        self
    }

    pub fn with_mu(mut self, mu: f32) -> Self {
        self.mu = mu;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.local_rounds == 0 {
            return Err(Error::config("local_rounds", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size", "must be >= 1"));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::config("lr", "must be a finite value >= 0"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum", "must lie in [0, 1)"));
        }
        if !(self.mu >= 0.0) || !self.mu.is_finite() {
            return Err(Error::config("mu", "must be >= 0"));
        }
        if !(self.moon_tau > 0.0) {
            return Err(Error::config("moon_tau", "must be > 0"));
        }
        if !(self.server_lr > 0.0) {
            return Err(Error::config("server_lr", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::config("beta1", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("beta2", "must lie in [0, 1)"));
        }
        if !(self.adam_tau > 0.0) {
            return Err(Error::config("adam_tau", "must be > 0"));
        }
        if let Some(t) = self.fednova_tau_eff {
            if !(t > 0.0) {
                return Err(Error::config("fednova_tau_eff", "must be > 0"));
            }
        }
        Ok(())
    }
}

/// Stopping rules of a run. A run ends after the first round whose
/// cumulative cost exceeds either budget, or after `max_rounds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budgets {
    pub flops: f64,
    pub bytes: f64,
    pub max_rounds: usize,
}

impl Budgets {
    /// Laptop-scale defaults: 5e11 FLOPs, 5e9 bytes, 2000 rounds.
    pub const DESK: Budgets = Budgets {
        flops: 5e11,
        bytes: 5e9,
        max_rounds: 2000,
    };

    /// 100 TFLOPs and 5 TB.
    pub const FULL: Budgets = Budgets {
        flops: 1e14,
        bytes: 5e12,
        max_rounds: 100_000,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.flops > 0.0) {
            return Err(Error::config("flop_budget", "must be > 0"));
        }
        if !(self.bytes > 0.0) {
            return Err(Error::config("byte_budget", "must be > 0"));
        }
        Ok(())
    }

    pub fn within(&self, flops: f64, bytes: u64) -> bool {
        flops <= self.flops && bytes as f64 <= self.bytes
    }
}

impl Default for Budgets {
    fn default() -> Self {
        Self::DESK
    }
}

/// Everything the engine needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub algorithm: AlgorithmConfig,
    /// Fraction of clients selected each round.
    pub participation: f64,
    /// Hidden width of the full-model algorithms.
    pub hidden: usize,
    /// Hidden width per site for decomposed algorithms; the global model
    /// carries `ist_site_hidden * active sites` neurons.
    pub ist_site_hidden: usize,
    pub seed: u64,
    pub budgets: Budgets,
    /// Evaluate on the test set every this many rounds.
    pub eval_every: usize,
}

impl SimulationConfig {
    pub fn new(algorithm: AlgorithmConfig) -> Self {
        Self {
            algorithm,
            participation: 0.1,
            hidden: 100,
            ist_site_hidden: 30,
            seed: 1,
            budgets: Budgets::DESK,
            eval_every: 1,
        }
    }

    pub fn active_sites(&self, n_clients: usize) -> usize {
        (n_clients as f64 * self.participation).round() as usize
    }

    /// Hidden width of the global model for a population of `n_clients`.
    pub fn global_hidden(&self, n_clients: usize) -> usize {
        if self.algorithm.kind.is_decomposed() {
            self.ist_site_hidden * self.active_sites(n_clients)
        } else {
            self.hidden
        }
    }

    pub fn validate(&self, n_clients: usize) -> Result<()> {
        self.algorithm.validate()?;
        self.budgets.validate()?;
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::config("participation", "must lie in (0, 1]"));
        }
        if self.active_sites(n_clients) == 0 {
            return Err(Error::config(
                "participation",
                format!("selects no clients out of {n_clients}"),
            ));
        }
        if self.hidden == 0 {
            return Err(Error::config("hidden", "must be >= 1"));
        }
        if self.ist_site_hidden == 0 {
            return Err(Error::config("ist_site_hidden", "must be >= 1"));
        }
        if self.eval_every == 0 {
            return Err(Error::config("eval_every", "must be >= 1"));
        }
        Ok(())
    }
}
