//! Model-contrastive auxiliary loss on hidden representations.

use ndarray::{Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

/// Floor of the cosine-similarity denominator.
pub const COSINE_EPS: f64 = 1e-12;

/// Epsilon-guarded cosine similarity and its gradient w.r.t. `z`.
fn cosine_with_grad(z: ArrayView1<'_, f32>, other: ArrayView1<'_, f32>) -> (f64, Vec<f64>) {
    let dot: f64 = z.iter().zip(other).map(|(&a, &b)| f64::from(a) * f64::from(b)).sum();
    let nz = z.iter().map(|&a| f64::from(a).powi(2)).sum::<f64>().sqrt();
    let no = other.iter().map(|&a| f64::from(a).powi(2)).sum::<f64>().sqrt();
    let raw = nz * no;
    let denom = raw.max(COSINE_EPS);
    let sim = dot / denom;
    let grad = z
        .iter()
        .zip(other)
        .map(|(&zi, &oi)| {
            let mut g = f64::from(oi) / denom;
            if raw >= COSINE_EPS {
                // d(|z||o|)/dz = |o| z / |z|
                g -= dot * no * f64::from(zi) / (nz * denom * denom);
            }
            g
        })
        .collect();
    (sim, grad)
}

pub fn cosine_similarity(a: ArrayView1<'_, f32>, b: ArrayView1<'_, f32>) -> f64 {
    cosine_with_grad(a, b).0
}

/// Contrastive loss `-mu * mean log(e^{s_g} / (e^{s_g} + e^{s_p}))` with
/// `s = cos(z, .) / tau`, and its gradient w.r.t. the local representation
/// `z` (already divided by the batch size, ready to chain into backward).
pub fn moon_contrastive(
    z: ArrayView2<'_, f32>,
    z_glob: ArrayView2<'_, f32>,
    z_prev: ArrayView2<'_, f32>,
    mu: f64,
    tau: f64,
) -> Result<(f64, Array2<f32>)> {
    if !(tau > 0.0) {
        return Err(Error::domain(format!("temperature must be > 0, got {tau}")));
    }
    if z.dim() != z_glob.dim() || z.dim() != z_prev.dim() {
        return Err(Error::shape("representation shapes differ"));
    }
    let b = z.nrows();
    let mut grad = Array2::<f32>::zeros(z.raw_dim());
    if mu == 0.0 || b == 0 {
        return Ok((0.0, grad));
    }
    let mut total = 0f64;
    for i in 0..b {
        let (cg, gg) = cosine_with_grad(z.row(i), z_glob.row(i));
        let (cp, gp) = cosine_with_grad(z.row(i), z_prev.row(i));
        let (sg, sp) = (cg / tau, cp / tau);
        let m = sg.max(sp);
        let lse = m + ((sg - m).exp() + (sp - m).exp()).ln();
        total += lse - sg;
        // dl/dsg = -p_prev, dl/dsp = p_prev
        let p_prev = (sp - lse).exp();
        let scale = mu / b as f64 / tau;
        for (j, g) in grad.row_mut(i).iter_mut().enumerate() {
            *g = (scale * p_prev * (gp[j] - gg[j])) as f32;
        }
    }
    Ok((mu * total / b as f64, grad))
}
