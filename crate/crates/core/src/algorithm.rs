use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// The federated training strategies the engine knows how to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    FedAvg,
    FedProx,
    Moon,
    FedAdam,
    FedNova,
    Ist,
    IstProx,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 7] = [
        AlgorithmKind::FedAvg,
        AlgorithmKind::FedProx,
        AlgorithmKind::Moon,
        AlgorithmKind::FedAdam,
        AlgorithmKind::FedNova,
        AlgorithmKind::Ist,
        AlgorithmKind::IstProx,
    ];

    /// Vertical decomposition (subnet per site) rather than full-model copies.
    pub fn is_decomposed(self) -> bool {
        matches!(self, AlgorithmKind::Ist | AlgorithmKind::IstProx)
    }

    /// Whether local training adds the proximal pull toward the round's
    /// starting model.
    pub fn uses_proximal(self) -> bool {
        matches!(
            self,
            AlgorithmKind::FedProx | AlgorithmKind::FedNova | AlgorithmKind::IstProx
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::FedAvg => "fedavg",
            AlgorithmKind::FedProx => "fedprox",
            AlgorithmKind::Moon => "moon",
            AlgorithmKind::FedAdam => "fedadam",
            AlgorithmKind::FedNova => "fednova",
            AlgorithmKind::Ist => "ist",
            AlgorithmKind::IstProx => "istprox",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AlgorithmKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| {
                Error::config(
                    "algorithm",
                    format!("unknown algorithm `{s}` (expected one of fedavg, fedprox, moon, fedadam, fednova, ist, istprox)"),
                )
            })
    }
}
