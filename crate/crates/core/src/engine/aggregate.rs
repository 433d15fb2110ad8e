//! Server-side combination of client models.

use crate::error::{Error, Result};
use crate::nn::{Gradients, MlpModel};

fn check_weights(weights: &[f64]) -> Result<()> {
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("aggregation weights must be >= 0 and sum to 1 (sum {total})")));
    }
    Ok(())
}

/// `out = sum_i coeffs[i] * models[i]` (plus `base_coeff * base`) for every
/// value, accumulated in f64 in the order given.
fn linear_combination(
    base: Option<(&MlpModel, f64)>,
    models: &[&MlpModel],
    coeffs: &[f64],
    stats_coeffs: &[f64],
) -> MlpModel {
    let mut out = models[0].clone();
    {
        let mut dst: Vec<&mut [f32]> = Vec::with_capacity(8);
        let [a, b, c, d, e, f] = out.trainable_mut();
        dst.extend([a, b, c, d, e, f]);
        for (t, d) in dst.into_iter().enumerate() {
            for (i, v) in d.iter_mut().enumerate() {
                let mut acc = base.map_or(0.0, |(m, c)| c * f64::from(m.trainable()[t][i]));
                for (m, &c) in models.iter().zip(coeffs) {
                    acc += c * f64::from(m.trainable()[t][i]);
                }
                *v = acc as f32;
            }
        }
    }
    let [mean, var] = out.running_stats_mut();
    for (t, d) in [mean, var].into_iter().enumerate() {
        for (i, v) in d.iter_mut().enumerate() {
            let mut acc = 0f64;
            for (m, &c) in models.iter().zip(stats_coeffs) {
                acc += c * f64::from(m.running_stats()[t][i]);
            }
            *v = acc as f32;
        }
    }
    out
}

fn check_models(models: &[&MlpModel], weights: &[f64]) -> Result<()> {
    if models.is_empty() || models.len() != weights.len() {
        return Err(Error::shape("need one weight per model and at least one model"));
    }
    for m in &models[1..] {
        models[0].check_same_dims(m)?;
    }
    Ok(())
}

/// Weighted elementwise average of trainable parameters and running
/// statistics.
pub fn aggregate_average(models: &[&MlpModel], weights: &[f64]) -> Result<MlpModel> {
    check_models(models, weights)?;
    check_weights(weights)?;
    Ok(linear_combination(None, models, weights, weights))
}

/// Server Adam state for FedAdam.
#[derive(Debug, Clone, PartialEq)]
pub struct FedAdamState {
    pub m: Gradients,
    pub v: Gradients,
    pub beta1: f32,
    pub beta2: f32,
    pub tau: f32,
    pub server_lr: f32,
    pub step: u64,
}

impl FedAdamState {
    pub fn new(model: &MlpModel, beta1: f32, beta2: f32, tau: f32, server_lr: f32) -> Self {
        Self {
            m: Gradients::zeros(model.dims()),
            v: Gradients::zeros(model.dims()),
            beta1,
            beta2,
            tau,
            server_lr,
            step: 0,
        }
    }
}

/// One server Adam step on the pseudo-gradient `w_avg - w_prev`, without
/// bias correction. Running statistics are taken from `w_avg`.
pub fn fedadam_step(state: &mut FedAdamState, w_prev: &MlpModel, w_avg: &MlpModel) -> Result<MlpModel> {
    w_prev.check_same_dims(w_avg)?;
    if state.m.dims() != w_prev.dims() {
        return Err(Error::shape("FedAdam buffers do not match the model"));
    }
    let (b1, b2) = (f64::from(state.beta1), f64::from(state.beta2));
    let (tau, lr) = (f64::from(state.tau), f64::from(state.server_lr));
    let mut out = w_avg.clone();
    for (((dst, prev), m), v) in out
        .trainable_mut()
        .into_iter()
        .zip(w_prev.trainable())
        .zip(state.m.slices_mut())
        .zip(state.v.slices_mut())
    {
        for (((w, &p), m), v) in dst.iter_mut().zip(prev).zip(m.iter_mut()).zip(v.iter_mut()) {
            let delta = f64::from(*w) - f64::from(p);
            let m_new = b1 * f64::from(*m) + (1.0 - b1) * delta;
            let v_new = b2 * f64::from(*v) + (1.0 - b2) * delta * delta;
            *m = m_new as f32;
            *v = v_new as f32;
            *w = (f64::from(p) + lr * m_new / (v_new.sqrt() + tau)) as f32;
        }
    }
    state.step += 1;
    Ok(out)
}

/// Normalized averaging: `w_prev + tau_eff * sum_i p_i (w_i - w_prev) / tau_i`.
///
/// Evaluated as `a_0 w_prev + sum_i a_i w_i` with `a_i = tau_eff p_i / tau_i`
/// and `a_0 = 1 - sum_i a_i`; when `a_0` vanishes this is exactly
/// [`aggregate_average`] with weights `a_i`. Running statistics are
/// averaged with `p_i`.
pub fn fednova_aggregate(
    w_prev: &MlpModel,
    models: &[&MlpModel],
    local_steps: &[usize],
    weights: &[f64],
    tau_eff: f64,
) -> Result<MlpModel> {
    check_models(models, weights)?;
    check_weights(weights)?;
    w_prev.check_same_dims(models[0])?;
    if local_steps.len() != models.len() {
        return Err(Error::shape("one local step count per model"));
    }
    if local_steps.contains(&0) {
        return Err(Error::domain("local step count must be >= 1"));
    }
    if !(tau_eff > 0.0) {
        return Err(Error::domain(format!("tau_eff must be > 0, got {tau_eff}")));
    }
    let coeffs: Vec<f64> = weights
        .iter()
        .zip(local_steps)
        .map(|(&p, &t)| tau_eff * p / t as f64)
        .collect();
    let a0 = 1.0 - coeffs.iter().sum::<f64>();
    let base = (a0.abs() > 1e-12).then_some((w_prev, a0));
    Ok(linear_combination(base, models, &coeffs, weights))
}
