use rand::Rng;

use super::config::AlgorithmConfig;
use crate::algorithm::AlgorithmKind;
use crate::data::{ClientShard, FeatureDataset};
use crate::error::{Error, Result};
use crate::nn::{
    add_proximal, backward_with_hidden_grad, forward, moon_contrastive, sgd_step,
    update_running_stats, MlpModel, Mode, OptimizerState,
};
use crate::rng::RngStream;

/// Uniform sample of `round(n_total * fraction)` distinct clients, sorted
/// ascending. Partial Fisher–Yates over `0..n_total`.
pub fn select_clients<R: Rng + ?Sized>(
    n_total: usize,
    fraction: f64,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config("participation", format!("{fraction} not in (0, 1]")));
    }
    let count = (n_total as f64 * fraction).round() as usize;
    if count == 0 {
        return Err(Error::config(
            "participation",
            format!("selects no clients out of {n_total}"),
        ));
    }
    let mut ids: Vec<usize> = (0..n_total).collect();
    for i in 0..count {
        let j = rng.random_range(i..n_total);
        ids.swap(i, j);
    }
    ids.truncate(count);
    ids.sort_unstable();
    Ok(ids)
}

/// Training-set row indices of one local batch: uniform draws with
/// replacement from the shard.
pub fn sample_batch_indices<R: Rng + ?Sized>(
    shard: &ClientShard,
    batch_size: usize,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if shard.is_empty() {
        return Err(Error::domain(format!("client {} holds no samples", shard.client_id)));
    }
    Ok((0..batch_size)
        .map(|_| shard.indices[rng.random_range(0..shard.len())])
        .collect())
}

/// Reference models for the contrastive term.
#[derive(Debug, Clone, Copy)]
pub struct MoonContext<'a> {
    pub global: &'a MlpModel,
    pub previous: &'a MlpModel,
}

/// Runs `cfg.local_rounds` batches of momentum SGD from `model`, with a
/// fresh optimizer. Adds the proximal gradient toward `anchor` for
/// proximal algorithms and the contrastive gradient when `moon` is given.
///
/// `stream` seeds batch sampling; pass one substream per (round, client).
#[allow(clippy::too_many_arguments)]
pub fn local_train(
    mut model: MlpModel,
    train: &FeatureDataset,
    shard: &ClientShard,
    cfg: &AlgorithmConfig,
    lr: f32,
    anchor: &MlpModel,
    moon: Option<MoonContext<'_>>,
    stream: RngStream,
) -> Result<MlpModel> {
    if cfg.local_rounds == 0 {
        return Err(Error::config("local_rounds", "must be >= 1"));
    }
    let mut opt = OptimizerState::new(&model, lr, cfg.momentum)?;
    let mut rng = stream.rng();
    let proximal = cfg.kind.uses_proximal() && cfg.mu > 0.0;
    let contrastive = match moon {
        Some(ctx) if cfg.kind == AlgorithmKind::Moon && cfg.mu > 0.0 => Some(ctx),
        _ => None,
    };
    for _ in 0..cfg.local_rounds {
        let idx = sample_batch_indices(shard, cfg.batch_size, &mut rng)?;
        let batch = train.gather(&idx)?;
        let (_, cache) = forward(&model, batch.features.view(), Mode::Train)?;
        let extra = match contrastive {
            Some(ctx) => {
                let (_, glob) = forward(ctx.global, batch.features.view(), Mode::Train)?;
                let (_, prev) = forward(ctx.previous, batch.features.view(), Mode::Train)?;
                let (_, g) = moon_contrastive(
                    cache.hidden.view(),
                    glob.hidden.view(),
                    prev.hidden.view(),
                    f64::from(cfg.mu),
                    f64::from(cfg.moon_tau),
                )?;
                Some(g)
            }
            None => None,
        };
        let mut grads =
            backward_with_hidden_grad(&model, &cache, &batch.labels, extra.as_ref().map(|g| g.view()))?;
        if proximal {
            grads = add_proximal(&grads, &model, anchor, cfg.mu)?;
        }
        update_running_stats(&mut model, &cache)?;
        sgd_step(&mut model, &grads, &mut opt)?;
    }
    Ok(model)
}
