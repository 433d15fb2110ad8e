//! Closed-form compute and communication accounting.
//!
//! FLOPs count only the weight-matrix work of one batch: `2b(n1 n2 + n2 n3)`
//! forward plus `2b(n1 n2 + 2 n2 n3)` backward. MOON adds two extra
//! first-layer forward passes (`4 b n1 n2`). Bias, batch-norm, activation
//! and proximal-term work is not counted. Bytes count every stored value
//! (running statistics included) at 4 bytes, once down and once up.

use serde::{Deserialize, Serialize};

use crate::algorithm::AlgorithmKind;
use crate::error::{Error, Result};
use crate::nn::MlpDims;

pub const BYTES_PER_VALUE: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchSpec {
    pub n1: usize,
    /// Hidden width of the global model (for decomposed algorithms, the
    /// full width before partitioning).
    pub n2: usize,
    pub n3: usize,
    pub batch: usize,
    pub sites: usize,
}

impl ArchSpec {
    pub fn new(dims: MlpDims, batch: usize, sites: usize) -> Result<Self> {
        let a = Self {
            n1: dims.input,
            n2: dims.hidden,
            n3: dims.classes,
            batch,
            sites,
        };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if [self.n1, self.n2, self.n3, self.batch, self.sites].contains(&0) {
            return Err(Error::domain(format!("all architecture sizes must be >= 1: {self:?}")));
        }
        Ok(())
    }

    fn parameter_count(&self) -> u64 {
        MlpDims {
            input: self.n1,
            hidden: self.n2,
            classes: self.n3,
        }
        .parameter_count() as u64
    }
}

/// Hidden width of each site under a balanced split of `n2` over `sites`.
pub fn site_hidden_sizes(n2: usize, sites: usize) -> Vec<usize> {
    let base = n2 / sites;
    let extra = n2 % sites;
    (0..sites).map(|s| base + usize::from(s < extra)).collect()
}

/// Forward + backward FLOPs of one batch through a `(n1, n2, n3)` network.
pub fn flops_dense_batch(n1: usize, n2: usize, n3: usize, batch: usize) -> f64 {
    let (n1, n2, n3, b) = (n1 as f64, n2 as f64, n3 as f64, batch as f64);
    4.0 * n1 * n2 * b + 6.0 * n2 * n3 * b
}

/// FLOPs one site spends on one local batch. Decomposed algorithms report
/// the mean over sites of their actual partition sizes.
pub fn flops_per_local_batch(arch: &ArchSpec, kind: AlgorithmKind) -> f64 {
    let (n1, n3, b) = (arch.n1, arch.n3, arch.batch);
    match kind {
        AlgorithmKind::Ist | AlgorithmKind::IstProx => {
            let sizes = site_hidden_sizes(arch.n2, arch.sites.max(1));
            let total: f64 = sizes.iter().map(|&h| flops_dense_batch(n1, h, n3, b)).sum();
            total / sizes.len() as f64
        }
        AlgorithmKind::Moon => {
            flops_dense_batch(n1, arch.n2, n3, b) + 4.0 * (b as f64) * (n1 as f64) * (arch.n2 as f64)
        }
        _ => flops_dense_batch(n1, arch.n2, n3, b),
    }
}

/// Bytes moved in one round, download plus upload.
pub fn bytes_per_round(arch: &ArchSpec, kind: AlgorithmKind) -> u64 {
    let p = arch.parameter_count();
    let s = arch.sites as u64;
    if kind.is_decomposed() {
        2 * BYTES_PER_VALUE * p + 2 * (s - 1) * arch.n3 as u64 * BYTES_PER_VALUE
    } else {
        2 * s * p * BYTES_PER_VALUE
    }
}

/// FLOPs charged for one round: every site, every local batch.
pub fn flops_per_round(arch: &ArchSpec, kind: AlgorithmKind, local_rounds: usize) -> f64 {
    let per_site_sum = if kind.is_decomposed() {
        site_hidden_sizes(arch.n2, arch.sites)
            .iter()
            .map(|&h| flops_dense_batch(arch.n1, h, arch.n3, arch.batch))
            .sum()
    } else {
        flops_per_local_batch(arch, kind) * arch.sites as f64
    };
    per_site_sum * local_rounds as f64
}

/// Cumulative cost counters. Never decrease.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub flops: f64,
    pub bytes: u64,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge_round(&mut self, arch: &ArchSpec, kind: AlgorithmKind, local_rounds: usize) {
        self.flops += flops_per_round(arch, kind, local_rounds);
        self.bytes += bytes_per_round(arch, kind);
    }

    pub fn gflops(&self) -> f64 {
        self.flops / 1e9
    }

    pub fn gigabytes(&self) -> f64 {
        self.bytes as f64 / 1e9
    }
}
