use rand::seq::SliceRandom;
use rand::Rng;

use crate::data::FeatureDataset;
use crate::error::{Error, Result};
use crate::nn::{backward, forward, sgd_step, update_running_stats, MlpModel, Mode, OptimizerState};

/// One pass over `indices` of `train` in shuffled batches of `batch_size`
/// (the final batch may be smaller), with a fresh momentum buffer.
pub fn centralized_train_epoch<R: Rng + ?Sized>(
    mut model: MlpModel,
    train: &FeatureDataset,
    indices: &[usize],
    batch_size: usize,
    lr: f32,
    momentum: f32,
    rng: &mut R,
) -> Result<MlpModel> {
    if batch_size == 0 {
        return Err(Error::config("batch_size", "must be >= 1"));
    }
    if indices.is_empty() {
        return Err(Error::domain("centralized epoch over no samples"));
    }
    let mut order = indices.to_vec();
    order.shuffle(rng);
    let mut opt = OptimizerState::new(&model, lr, momentum)?;
    for chunk in order.chunks(batch_size) {
        let batch = train.gather(chunk)?;
        let (_, cache) = forward(&model, batch.features.view(), Mode::Train)?;
        let grads = backward(&model, &cache, &batch.labels)?;
        update_running_stats(&mut model, &cache)?;
        sgd_step(&mut model, &grads, &mut opt)?;
    }
    Ok(model)
}
