use super::model::{Gradients, MlpModel};
use crate::error::{Error, Result};

/// Momentum SGD buffers. Created fresh for every local training call.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub velocity: Gradients,
    pub learning_rate: f32,
    pub momentum: f32,
}

impl OptimizerState {
    pub fn new(model: &MlpModel, learning_rate: f32, momentum: f32) -> Result<Self> {
        if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
            return Err(Error::domain(format!("learning rate {learning_rate}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::domain(format!("momentum {momentum} not in [0, 1)")));
        }
        Ok(Self {
            velocity: Gradients::zeros(model.dims()),
            learning_rate,
            momentum,
        })
    }
}

/// `v <- momentum * v + g; p <- p - lr * v` on every trainable tensor.
/// Running statistics are left alone.
pub fn sgd_step(model: &mut MlpModel, grads: &Gradients, state: &mut OptimizerState) -> Result<()> {
    if grads.dims() != model.dims() || state.velocity.dims() != model.dims() {
        return Err(Error::shape("gradient/model/optimizer shapes differ"));
    }
    let (lr, mom) = (state.learning_rate, state.momentum);
    for ((p, g), v) in model
        .trainable_mut()
        .into_iter()
        .zip(grads.slices())
        .zip(state.velocity.slices_mut())
    {
        for ((p, &g), v) in p.iter_mut().zip(g).zip(v.iter_mut()) {
            *v = mom * *v + g;
            *p -= lr * *v;
        }
    }
    Ok(())
}

/// Adds the gradient of `(mu / 2) * ||w - w0||^2` over trainable tensors.
pub fn add_proximal(
    grads: &Gradients,
    model: &MlpModel,
    anchor: &MlpModel,
    mu: f32,
) -> Result<Gradients> {
    model.check_same_dims(anchor)?;
    if grads.dims() != model.dims() {
        return Err(Error::shape("gradient/model shapes differ"));
    }
    let mut out = grads.clone();
    if mu == 0.0 {
        return Ok(out);
    }
    for ((g, p), a) in out
        .slices_mut()
        .into_iter()
        .zip(model.trainable())
        .zip(anchor.trainable())
    {
        for ((g, &p), &a) in g.iter_mut().zip(p).zip(a) {
            *g += mu * (p - a);
        }
    }
    Ok(out)
}
