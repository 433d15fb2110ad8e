//! Dirichlet class-distribution sampling via normalized Gamma draws.
//!
//! Draws are carried in log space: with concentration 0.01 a Gamma variate
//! is routinely smaller than the smallest positive `f64`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A point on the probability simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassDistribution {
    pub probs: Vec<f64>,
}

impl ClassDistribution {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

/// `ln G` for `G ~ Gamma(shape, 1)`.
///
/// Marsaglia–Tsang squeeze for `shape >= 1`; smaller shapes use
/// `G(a) = G(a + 1) * U^(1/a)`.
pub fn ln_gamma_variate<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    if shape < 1.0 {
        let u: f64 = 1.0 - rng.random::<f64>(); // (0, 1]
        return ln_gamma_variate(shape + 1.0, rng) + u.ln() / shape;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x: f64 = StandardNormal.sample(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u: f64 = 1.0 - rng.random::<f64>();
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d.ln() + v.ln();
        }
    }
}

/// Symmetric Dirichlet(alpha) draw over `k` classes.
pub fn dirichlet_sample<R: Rng + ?Sized>(
    alpha: f64,
    k: usize,
    rng: &mut R,
) -> Result<ClassDistribution> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain(format!("Dirichlet concentration must be > 0, got {alpha}")));
    }
    if k == 0 {
        return Err(Error::domain("Dirichlet over zero classes"));
    }
    let logs: Vec<f64> = (0..k).map(|_| ln_gamma_variate(alpha, rng)).collect();
    let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logs.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    Ok(ClassDistribution {
        probs: w.iter().map(|x| x / total).collect(),
    })
}
