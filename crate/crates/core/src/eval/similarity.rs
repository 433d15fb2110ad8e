use serde::{Deserialize, Serialize};

use crate::engine::{
    centralized_train_epoch, run_round, FederatedData, FederationState, SimulationConfig,
};
use crate::error::{Error, Result};
use crate::nn::MlpModel;
use crate::rng::RngStream;

/// Displacements whose norm falls below this are treated as zero.
pub const DISPLACEMENT_EPS: f64 = 1e-12;

/// Cosine between `fed - start` and `central - start` over trainable
/// parameters. Returns 0 when either displacement is (numerically) zero.
pub fn direction_similarity(start: &MlpModel, fed: &MlpModel, central: &MlpModel) -> Result<f64> {
    start.check_same_dims(fed)?;
    start.check_same_dims(central)?;
    let (mut dot, mut nf, mut nc) = (0f64, 0f64, 0f64);
    for ((s, f), c) in start
        .trainable()
        .into_iter()
        .zip(fed.trainable())
        .zip(central.trainable())
    {
        for ((&s, &f), &c) in s.iter().zip(f).zip(c) {
            let df = f64::from(f) - f64::from(s);
            let dc = f64::from(c) - f64::from(s);
            dot += df * dc;
            nf += df * df;
            nc += dc * dc;
        }
    }
    let (nf, nc) = (nf.sqrt(), nc.sqrt());
    if nf < DISPLACEMENT_EPS || nc < DISPLACEMENT_EPS {
        return Ok(0.0);
    }
    Ok((dot / (nf * nc)).clamp(-1.0, 1.0))
}

/// Knobs of the centralized side of the study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CentralConfig {
    pub lr: f32,
    pub momentum: f32,
    pub batch_size: usize,
    pub seed: u64,
}

/// Models at the start of each of `epochs` centralized epochs over every
/// client's shard, beginning with `initial`.
pub fn centralized_checkpoints(
    initial: MlpModel,
    data: &FederatedData,
    epochs: usize,
    central: &CentralConfig,
) -> Result<Vec<MlpModel>> {
    let all: Vec<usize> = data.shards.iter().flat_map(|s| s.indices.iter().copied()).collect();
    let stream = RngStream::new(central.seed).derive("checkpoints");
    let mut out = Vec::with_capacity(epochs);
    let mut model = initial;
    for e in 0..epochs {
        out.push(model.clone());
        if e + 1 < epochs {
            model = centralized_train_epoch(
                model,
                &data.train,
                &all,
                central.batch_size,
                central.lr,
                central.momentum,
                &mut stream.index(e as u64).rng(),
            )?;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityPoint {
    pub epoch: usize,
    pub similarity: f64,
    /// Mean of `similarity` over epochs `0..=epoch`.
    pub running_mean: f64,
}

/// From each checkpoint, runs `rounds` federated rounds and, for every
/// round, one centralized epoch over the shards of that round's selected
/// clients; reports the cosine between the two displacements.
///
/// Each checkpoint uses its own seed derived from `cfg.seed`, so client
/// selections differ between checkpoints.
pub fn run_similarity_study(
    checkpoints: &[MlpModel],
    cfg: &SimulationConfig,
    rounds: usize,
    data: &FederatedData,
    central: &CentralConfig,
) -> Result<Vec<SimilarityPoint>> {
    if rounds == 0 {
        return Err(Error::config("rounds", "similarity study needs >= 1 round"));
    }
    let root = RngStream::new(cfg.seed).derive("similarity");
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut total = 0.0;
    for (epoch, start) in checkpoints.iter().enumerate() {
        let mut fed_cfg = cfg.clone();
        fed_cfg.seed = root.index(epoch as u64).key();
        let mut state = FederationState::with_model(&fed_cfg, data, start.clone());
        let mut central_model = start.clone();
        let central_stream = RngStream::new(central.seed).derive("similarity").index(epoch as u64);
        for r in 0..rounds {
            let rec = run_round(&mut state, &fed_cfg, data, cfg.algorithm.lr, false)?;
            let union: Vec<usize> = rec
                .clients
                .iter()
                .flat_map(|&c| data.shards[c].indices.iter().copied())
                .collect();
            central_model = centralized_train_epoch(
                central_model,
                &data.train,
                &union,
                central.batch_size,
                central.lr,
                central.momentum,
                &mut central_stream.index(r as u64).rng(),
            )?;
        }
        let similarity = direction_similarity(start, &state.global, &central_model)?;
        total += similarity;
        out.push(SimilarityPoint {
            epoch,
            similarity,
            running_mean: total / (epoch + 1) as f64,
        });
    }
    Ok(out)
}
