//! Independent reference implementations shared by the integration tests.
//!
//! Everything here is written with scalar loops in f64 and does not call
//! into the library's numeric code, so it can serve as an oracle for it.

#![allow(clippy::needless_range_loop)]

#![allow(dead_code)]

use fedsim::data::{generate_synthetic, FeatureDataset};
use fedsim::engine::FederatedData;
use fedsim::nn::{MlpDims, MlpModel};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const BN_EPS: f64 = 1e-5;

/// Trainable parameters in f64, in the library's tensor order
/// (w1, b1, gamma, beta, w2, b2). Matrices are row-major.
#[derive(Debug, Clone)]
pub struct Params {
    pub n1: usize,
    pub n2: usize,
    pub n3: usize,
    pub tensors: [Vec<f64>; 6],
}

impl Params {
    pub fn from_model(m: &MlpModel) -> Self {
        let d = m.dims();
        let t = m.trainable().map(|s| s.iter().map(|&x| f64::from(x)).collect());
        Self {
            n1: d.input,
            n2: d.hidden,
            n3: d.classes,
            tensors: t,
        }
    }

    fn w1(&self, j: usize, k: usize) -> f64 {
        self.tensors[0][j * self.n1 + k]
    }

    fn w2(&self, c: usize, j: usize) -> f64 {
        self.tensors[4][c * self.n2 + j]
    }
}

/// Contrastive term settings: fixed reference representations plus weight
/// and temperature.
pub struct MoonTerm<'a> {
    pub z_glob: &'a [Vec<f64>],
    pub z_prev: &'a [Vec<f64>],
    pub mu: f64,
    pub tau: f64,
}

pub struct OracleForward {
    /// Post-affine batch-norm outputs (the ReLU inputs).
    pub pre_relu: Vec<Vec<f64>>,
    pub hidden: Vec<Vec<f64>>,
    pub logits: Vec<Vec<f64>>,
}

/// Train-mode forward pass: batch statistics with biased variance.
pub fn forward_train(p: &Params, x: &[Vec<f64>]) -> OracleForward {
    let b = x.len();
    let mut pre = vec![vec![0.0; p.n2]; b];
    for (i, row) in x.iter().enumerate() {
        for j in 0..p.n2 {
            let mut s = p.tensors[1][j];
            for k in 0..p.n1 {
                s += p.w1(j, k) * row[k];
            }
            pre[i][j] = s;
        }
    }
    let mut pre_relu = vec![vec![0.0; p.n2]; b];
    for j in 0..p.n2 {
        let mean = pre.iter().map(|r| r[j]).sum::<f64>() / b as f64;
        let var = pre.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / b as f64;
        let inv = 1.0 / (var + BN_EPS).sqrt();
        for i in 0..b {
            pre_relu[i][j] = p.tensors[2][j] * (pre[i][j] - mean) * inv + p.tensors[3][j];
        }
    }
    let hidden: Vec<Vec<f64>> = pre_relu
        .iter()
        .map(|r| r.iter().map(|&v| v.max(0.0)).collect())
        .collect();
    let logits = hidden
        .iter()
        .map(|h| {
            (0..p.n3)
                .map(|c| p.tensors[5][c] + (0..p.n2).map(|j| p.w2(c, j) * h[j]).sum::<f64>())
                .collect()
        })
        .collect();
    OracleForward {
        pre_relu,
        hidden,
        logits,
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot / (na * nb).max(1e-12)
}

/// Mean cross-entropy plus the optional contrastive penalty.
pub fn loss(p: &Params, x: &[Vec<f64>], labels: &[usize], moon: Option<&MoonTerm<'_>>) -> f64 {
    let f = forward_train(p, x);
    let b = x.len() as f64;
    let mut ce = 0.0;
    for (row, &y) in f.logits.iter().zip(labels) {
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        ce += lse - row[y];
    }
    let mut total = ce / b;
    if let Some(t) = moon {
        let mut con = 0.0;
        for (i, z) in f.hidden.iter().enumerate() {
            let sg = cosine(z, &t.z_glob[i]) / t.tau;
            let sp = cosine(z, &t.z_prev[i]) / t.tau;
            con += -(sg.exp() / (sg.exp() + sp.exp())).ln();
        }
        total += t.mu * con / b;
    }
    total
}

/// Central finite differences of [`loss`] for every trainable parameter.
pub fn finite_difference(
    p: &Params,
    x: &[Vec<f64>],
    labels: &[usize],
    moon: Option<&MoonTerm<'_>>,
    h: f64,
) -> [Vec<f64>; 6] {
    let mut out: [Vec<f64>; 6] = Default::default();
    for t in 0..6 {
        out[t] = (0..p.tensors[t].len())
            .map(|i| {
                let mut plus = p.clone();
                plus.tensors[t][i] += h;
                let mut minus = p.clone();
                minus.tensors[t][i] -= h;
                (loss(&plus, x, labels, moon) - loss(&minus, x, labels, moon)) / (2.0 * h)
            })
            .collect();
    }
    out
}

/// A model with every trainable tensor randomized, so gradients through
/// gamma, beta and both biases are all exercised.
pub fn random_model<R: Rng>(dims: MlpDims, rng: &mut R) -> MlpModel {
    let mut m = MlpModel::init(dims, rng);
    m.b1.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
    m.bn_gamma.iter_mut().for_each(|v| *v = rng.random_range(0.5..1.5));
    m.bn_beta.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
    m.b2.iter_mut().for_each(|v| *v = rng.random_range(-0.5..0.5));
    m.bn_mean.iter_mut().for_each(|v| *v = rng.random_range(-0.2..0.2));
    m.bn_var.iter_mut().for_each(|v| *v = rng.random_range(0.5..1.5));
    m
}

pub fn random_features<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<f32> {
    Array2::from_shape_fn((rows, cols), |_| {
        let v: f64 = StandardNormal.sample(rng);
        v as f32
    })
}

pub fn rows_f64(a: &Array2<f32>) -> Vec<Vec<f64>> {
    a.rows()
        .into_iter()
        .map(|r| r.iter().map(|&v| f64::from(v)).collect())
        .collect()
}

pub fn to_array(rows: &[Vec<f64>]) -> Array2<f32> {
    let (r, c) = (rows.len(), rows.first().map_or(0, Vec::len));
    Array2::from_shape_fn((r, c), |(i, j)| rows[i][j] as f32)
}

pub fn bits(m: &MlpModel) -> Vec<u32> {
    m.flatten_all().iter().map(|v| v.to_bits()).collect()
}

pub fn max_abs_diff(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (f64::from(x) - f64::from(y)).abs())
        .fold(0.0, f64::max)
}

/// Small synthetic federation that trains in milliseconds.
pub fn tiny_federation(seed: u64, n_clients: usize, alpha: f64, samples: usize) -> FederatedData {
    let (train, test) = generate_synthetic(5, 8, 40, 20, 3.0, seed).unwrap();
    FederatedData::partitioned(train, test, n_clients, alpha, samples, seed).unwrap()
}

pub fn labels_of(ds: &FeatureDataset, idx: &[usize]) -> Vec<usize> {
    idx.iter().map(|&i| ds.labels[i]).collect()
}

pub fn vec1(v: &[f64]) -> Array1<f32> {
    v.iter().map(|&x| x as f32).collect()
}
