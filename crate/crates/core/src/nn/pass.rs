//! Forward and backward passes of the perceptron.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::model::{Gradients, MlpModel};
use crate::error::{Error, Result};

/// Variance epsilon of the batch-norm layer.
pub const BN_EPS: f32 = 1e-5;
/// Weight of the newest batch in the running-statistics moving average.
pub const BN_MOMENTUM: f32 = 0.1;

/// A labeled mini-batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub features: Array2<f32>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(features: Array2<f32>, labels: Vec<usize>) -> Result<Self> {
        if features.nrows() == 0 {
            return Err(Error::domain("empty batch"));
        }
        if features.nrows() != labels.len() {
            return Err(Error::shape(format!(
                "{} feature rows but {} labels",
                features.nrows(),
                labels.len()
            )));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("non-finite feature value"));
        }
        Ok(Self {
            features: features.as_standard_layout().into_owned(),
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Normalize with the statistics of the batch itself.
    Train,
    /// Normalize with the running statistics.
    Eval,
}

/// Intermediate values of a forward pass, sufficient for [`backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub mode: Mode,
    pub input: Array2<f32>,
    /// Output of the first linear layer.
    pub pre_bn: Array2<f32>,
    /// Normalized pre-activations before the affine scale/shift.
    pub xhat: Array2<f32>,
    pub post_bn: Array2<f32>,
    /// Post-ReLU hidden representation.
    pub hidden: Array2<f32>,
    pub logits: Array2<f32>,
    pub probs: Array2<f32>,
    /// Mean and variance used for normalization (biased batch variance in
    /// train mode, running statistics in eval mode).
    pub mean: Array1<f32>,
    pub var: Array1<f32>,
    pub inv_std: Array1<f32>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.input.nrows()
    }
}

/// Runs the network on `features`.
///
/// Never mutates the model: in train mode the batch statistics land in the
/// cache and [`update_running_stats`] folds them into the model.
pub fn forward(
    model: &MlpModel,
    features: ArrayView2<'_, f32>,
    mode: Mode,
) -> Result<(Array2<f32>, ForwardCache)> {
    let dims = model.dims();
    if features.ncols() != dims.input {
        return Err(Error::shape(format!(
            "batch width {} but model input {}",
            features.ncols(),
            dims.input
        )));
    }
    let b = features.nrows();
    if b == 0 {
        return Err(Error::domain("empty batch"));
    }

    let mut pre_bn = features.dot(&model.w1.t());
    pre_bn += &model.b1;

    let (mean, var) = match mode {
        Mode::Train => column_moments(&pre_bn),
        Mode::Eval => (model.bn_mean.clone(), model.bn_var.clone()),
    };
    let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());

    let mut xhat = pre_bn.clone();
    Zip::from(xhat.rows_mut()).for_each(|mut row| {
        Zip::from(&mut row)
            .and(&mean)
            .and(&inv_std)
            .for_each(|x, &m, &s| *x = (*x - m) * s);
    });
    let mut post_bn = xhat.clone();
    Zip::from(post_bn.rows_mut()).for_each(|mut row| {
        Zip::from(&mut row)
            .and(&model.bn_gamma)
            .and(&model.bn_beta)
            .for_each(|y, &g, &be| *y = g * *y + be);
    });
    let hidden = post_bn.mapv(|y| y.max(0.0));

    let mut logits = hidden.dot(&model.w2.t());
    logits += &model.b2;
    let probs = softmax_rows(&logits);

    let cache = ForwardCache {
        mode,
        input: features.to_owned(),
        pre_bn,
        xhat,
        post_bn,
        hidden,
        logits: logits.clone(),
        probs,
        mean,
        var,
        inv_std,
    };
    Ok((logits, cache))
}

/// Column mean and biased variance, accumulated in f64.
fn column_moments(h: &Array2<f32>) -> (Array1<f32>, Array1<f32>) {
    let b = h.nrows() as f64;
    let n = h.ncols();
    let mut mean = vec![0f64; n];
    for row in h.rows() {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += f64::from(x);
        }
    }
    mean.iter_mut().for_each(|m| *m /= b);
    let mut var = vec![0f64; n];
    for row in h.rows() {
        for ((v, &x), &m) in var.iter_mut().zip(row).zip(&mean) {
            let d = f64::from(x) - m;
            *v += d * d;
        }
    }
    var.iter_mut().for_each(|v| *v /= b);
    (
        mean.iter().map(|&m| m as f32).collect(),
        var.iter().map(|&v| v as f32).collect(),
    )
}

pub fn softmax_rows(logits: &Array2<f32>) -> Array2<f32> {
    let mut out = Array2::<f32>::zeros(logits.raw_dim());
    for (row, mut dst) in logits.rows().into_iter().zip(out.rows_mut()) {
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(f64::from(x)));
        let exps: Vec<f64> = row.iter().map(|&x| (f64::from(x) - max).exp()).collect();
        let sum: f64 = exps.iter().sum();
        for (d, e) in dst.iter_mut().zip(exps) {
            *d = (e / sum) as f32;
        }
    }
    out
}

/// Folds the batch statistics of a train-mode pass into the running
/// statistics: exponential moving average, unbiased variance.
pub fn update_running_stats(model: &mut MlpModel, cache: &ForwardCache) -> Result<()> {
    if cache.mode != Mode::Train {
        return Err(Error::domain("running statistics need a train-mode pass"));
    }
    if cache.mean.len() != model.bn_mean.len() {
        return Err(Error::shape("cache does not belong to this model"));
    }
    let b = cache.batch_size();
    let unbias = if b > 1 { b as f32 / (b - 1) as f32 } else { 1.0 };
    Zip::from(&mut model.bn_mean)
        .and(&cache.mean)
        .for_each(|r, &m| *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m);
    Zip::from(&mut model.bn_var)
        .and(&cache.var)
        .for_each(|r, &v| *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v * unbias);
    Ok(())
}

/// Mean negative log-likelihood of the true classes.
pub fn cross_entropy(logits: ArrayView2<'_, f32>, labels: &[usize]) -> Result<f64> {
    if logits.nrows() != labels.len() || labels.is_empty() {
        return Err(Error::shape(format!(
            "{} logit rows vs {} labels",
            logits.nrows(),
            labels.len()
        )));
    }
    let mut total = 0f64;
    for (row, &y) in logits.rows().into_iter().zip(labels) {
        if y >= row.len() {
            return Err(Error::shape(format!("label {y} out of range")));
        }
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(f64::from(x)));
        let lse = max + row.iter().map(|&x| (f64::from(x) - max).exp()).sum::<f64>().ln();
        total += lse - f64::from(row[y]);
    }
    Ok((total / labels.len() as f64).max(0.0))
}

/// Analytic gradient of mean cross-entropy, through batch-norm statistics.
pub fn backward(model: &MlpModel, cache: &ForwardCache, labels: &[usize]) -> Result<Gradients> {
    backward_with_hidden_grad(model, cache, labels, None)
}

/// Like [`backward`], with an extra loss gradient w.r.t. the post-ReLU hidden
/// representation added before back-propagating into the first layer.
pub fn backward_with_hidden_grad(
    model: &MlpModel,
    cache: &ForwardCache,
    labels: &[usize],
    extra_hidden_grad: Option<ArrayView2<'_, f32>>,
) -> Result<Gradients> {
    if cache.mode != Mode::Train {
        return Err(Error::domain("backward requires a train-mode forward cache"));
    }
    let dims = model.dims();
    let b = cache.batch_size();
    if cache.hidden.ncols() != dims.hidden
        || cache.input.ncols() != dims.input
        || cache.probs.ncols() != dims.classes
    {
        return Err(Error::shape("cache does not belong to this model"));
    }
    if labels.len() != b {
        return Err(Error::shape(format!("{} labels for batch of {b}", labels.len())));
    }
    if let Some(g) = &extra_hidden_grad {
        if g.dim() != cache.hidden.dim() {
            return Err(Error::shape("hidden gradient shape"));
        }
    }

    let inv_b = 1.0 / b as f32;
    let mut dlogits = cache.probs.clone();
    for (mut row, &y) in dlogits.rows_mut().into_iter().zip(labels) {
        if y >= dims.classes {
            return Err(Error::shape(format!("label {y} out of range")));
        }
        row[y] -= 1.0;
        row.mapv_inplace(|v| v * inv_b);
    }

    // A product with a transposed operand can come back column-major.
    let w2 = dlogits.t().dot(&cache.hidden).as_standard_layout().into_owned();
    let b2 = dlogits.sum_axis(Axis(0));

    let mut dhidden = dlogits.dot(&model.w2);
    if let Some(g) = extra_hidden_grad {
        dhidden += &g;
    }
    // ReLU mask
    Zip::from(&mut dhidden)
        .and(&cache.post_bn)
        .for_each(|d, &y| {
            if y <= 0.0 {
                *d = 0.0;
            }
        });
    let dpost = dhidden;

    let n2 = dims.hidden;
    let mut dgamma = vec![0f64; n2];
    let mut dbeta = vec![0f64; n2];
    for (drow, xrow) in dpost.rows().into_iter().zip(cache.xhat.rows()) {
        for j in 0..n2 {
            dgamma[j] += f64::from(drow[j]) * f64::from(xrow[j]);
            dbeta[j] += f64::from(drow[j]);
        }
    }

    // dxhat = dpost * gamma; dh = inv_std/b * (b*dxhat - sum(dxhat) - xhat*sum(dxhat*xhat))
    let gamma = &model.bn_gamma;
    let mut sum_dx = vec![0f64; n2];
    let mut sum_dx_x = vec![0f64; n2];
    for (drow, xrow) in dpost.rows().into_iter().zip(cache.xhat.rows()) {
        for j in 0..n2 {
            let dx = f64::from(drow[j]) * f64::from(gamma[j]);
            sum_dx[j] += dx;
            sum_dx_x[j] += dx * f64::from(xrow[j]);
        }
    }
    let bf = b as f64;
    let mut dpre = Array2::<f32>::zeros((b, n2));
    for ((mut out, drow), xrow) in dpre
        .rows_mut()
        .into_iter()
        .zip(dpost.rows())
        .zip(cache.xhat.rows())
    {
        for j in 0..n2 {
            let dx = f64::from(drow[j]) * f64::from(gamma[j]);
            let v = f64::from(cache.inv_std[j]) / bf
                * (bf * dx - sum_dx[j] - f64::from(xrow[j]) * sum_dx_x[j]);
            out[j] = v as f32;
        }
    }

    let w1 = dpre.t().dot(&cache.input).as_standard_layout().into_owned();
    let b1 = dpre.sum_axis(Axis(0));

    Ok(Gradients {
        w1,
        b1,
        bn_gamma: dgamma.iter().map(|&v| v as f32).collect(),
        bn_beta: dbeta.iter().map(|&v| v as f32).collect(),
        w2,
        b2,
    })
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax<'a>(row: impl IntoIterator<Item = &'a f32>) -> usize {
    let mut best = (0, f32::NEG_INFINITY);
    for (i, &v) in row.into_iter().enumerate() {
        if i == 0 || v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Top-1 accuracy in eval mode.
pub fn evaluate_accuracy(
    model: &MlpModel,
    features: ArrayView2<'_, f32>,
    labels: &[usize],
) -> Result<f64> {
    if labels.is_empty() || features.nrows() == 0 {
        return Err(Error::domain("accuracy of an empty dataset"));
    }
    if features.nrows() != labels.len() {
        return Err(Error::shape("feature rows vs labels"));
    }
    if features.ncols() != model.dims().input {
        return Err(Error::shape("feature width vs model input"));
    }
    // Eval-mode batch norm is affine, so fold it into the first layer.
    let scale: Vec<f32> = model
        .bn_var
        .iter()
        .zip(&model.bn_gamma)
        .map(|(&v, &g)| g / (v + BN_EPS).sqrt())
        .collect();
    let mut w1 = model.w1.clone();
    for (mut row, &k) in w1.rows_mut().into_iter().zip(&scale) {
        row.mapv_inplace(|w| w * k);
    }
    let shift: Array1<f32> = (0..scale.len())
        .map(|j| (model.b1[j] - model.bn_mean[j]) * scale[j] + model.bn_beta[j])
        .collect();
    const CHUNK: usize = 1024;
    let mut correct = 0usize;
    for start in (0..labels.len()).step_by(CHUNK) {
        let end = (start + CHUNK).min(labels.len());
        let mut hidden = features.slice(ndarray::s![start..end, ..]).dot(&w1.t());
        hidden += &shift;
        hidden.mapv_inplace(|h| h.max(0.0));
        let mut logits = hidden.dot(&model.w2.t());
        logits += &model.b2;
        for (row, &y) in logits.rows().into_iter().zip(&labels[start..end]) {
            if argmax(row) == y {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}
