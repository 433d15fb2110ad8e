use ndarray::{Array1, Array2};
use rand::distr::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Layer widths of the perceptron: input, hidden and output (class count).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MlpDims {
    pub input: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl MlpDims {
    pub fn new(input: usize, hidden: usize, classes: usize) -> Result<Self> {
        if input == 0 || hidden == 0 || classes == 0 {
            return Err(Error::shape(format!(
                "all dimensions must be >= 1, got ({input}, {hidden}, {classes})"
            )));
        }
        Ok(Self {
            input,
            hidden,
            classes,
        })
    }

    /// Total number of stored values, batch-norm running statistics included.
    pub fn parameter_count(&self) -> usize {
        let (n1, n2, n3) = (self.input, self.hidden, self.classes);
        n1 * n2 + n2 + 4 * n2 + n2 * n3 + n3
    }
}

/// Linear -> BatchNorm -> ReLU -> linear (-> softmax).
///
/// `w1` is `[hidden x input]`, `w2` is `[classes x hidden]`, both row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub w1: Array2<f32>,
    pub b1: Array1<f32>,
    pub bn_gamma: Array1<f32>,
    pub bn_beta: Array1<f32>,
    pub bn_mean: Array1<f32>,
    pub bn_var: Array1<f32>,
    pub w2: Array2<f32>,
    pub b2: Array1<f32>,
}

impl MlpModel {
    /// All weights and biases zero, `gamma = 1`, `beta = 0`, running
    /// statistics at their neutral values (mean 0, variance 1).
    pub fn zeros(dims: MlpDims) -> Self {
        let MlpDims {
            input: n1,
            hidden: n2,
            classes: n3,
        } = dims;
        Self {
            w1: Array2::zeros((n2, n1)),
            b1: Array1::zeros(n2),
            bn_gamma: Array1::ones(n2),
            bn_beta: Array1::zeros(n2),
            bn_mean: Array1::zeros(n2),
            bn_var: Array1::ones(n2),
            w2: Array2::zeros((n3, n2)),
            b2: Array1::zeros(n3),
        }
    }

    /// Fan-in uniform initialization of both weight matrices; biases zero.
    pub fn init<R: Rng + ?Sized>(dims: MlpDims, rng: &mut R) -> Self {
        let mut m = Self::zeros(dims);
        fill_uniform(&mut m.w1, dims.input, rng);
        fill_uniform(&mut m.w2, dims.hidden, rng);
        m
    }

    pub fn dims(&self) -> MlpDims {
        MlpDims {
            input: self.w1.ncols(),
            hidden: self.w1.nrows(),
            classes: self.w2.nrows(),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.dims().parameter_count()
    }

    /// Checks the internal shape agreement and finiteness invariants.
    pub fn validate(&self) -> Result<()> {
        let d = self.dims();
        let n2 = d.hidden;
        if d.input == 0 || n2 == 0 || d.classes == 0 {
            return Err(Error::shape("zero-sized dimension"));
        }
        let vec_ok = [
            &self.b1,
            &self.bn_gamma,
            &self.bn_beta,
            &self.bn_mean,
            &self.bn_var,
        ]
        .iter()
        .all(|v| v.len() == n2);
        if !vec_ok || self.w2.ncols() != n2 || self.b2.len() != d.classes {
            return Err(Error::shape("inconsistent parameter shapes"));
        }
        if !self.w1.is_standard_layout() || !self.w2.is_standard_layout() {
            return Err(Error::shape("weight matrices must be row-major"));
        }
        if !self.trainable().iter().chain(self.running_stats().iter()).all(|s| s.iter().all(|x| x.is_finite())) {
            return Err(Error::domain("non-finite parameter"));
        }
        if self.bn_var.iter().any(|&v| v < 0.0) {
            return Err(Error::domain("negative running variance"));
        }
        Ok(())
    }

    /// Trainable tensors in fixed order: w1, b1, gamma, beta, w2, b2.
    pub fn trainable(&self) -> [&[f32]; 6] {
        [
            slice(&self.w1),
            self.b1.as_slice().expect("contiguous"),
            self.bn_gamma.as_slice().expect("contiguous"),
            self.bn_beta.as_slice().expect("contiguous"),
            slice(&self.w2),
            self.b2.as_slice().expect("contiguous"),
        ]
    }

    pub fn trainable_mut(&mut self) -> [&mut [f32]; 6] {
        [
            self.w1.as_slice_mut().expect("contiguous"),
            self.b1.as_slice_mut().expect("contiguous"),
            self.bn_gamma.as_slice_mut().expect("contiguous"),
            self.bn_beta.as_slice_mut().expect("contiguous"),
            self.w2.as_slice_mut().expect("contiguous"),
            self.b2.as_slice_mut().expect("contiguous"),
        ]
    }

    /// Running mean and variance of the batch-norm layer.
    pub fn running_stats(&self) -> [&[f32]; 2] {
        [
            self.bn_mean.as_slice().expect("contiguous"),
            self.bn_var.as_slice().expect("contiguous"),
        ]
    }

    pub fn running_stats_mut(&mut self) -> [&mut [f32]; 2] {
        [
            self.bn_mean.as_slice_mut().expect("contiguous"),
            self.bn_var.as_slice_mut().expect("contiguous"),
        ]
    }

    /// Every stored value (trainable then running statistics) in one vector.
    pub fn flatten_all(&self) -> Vec<f32> {
        self.trainable()
            .iter()
            .chain(self.running_stats().iter())
            .flat_map(|s| s.iter().copied())
            .collect()
    }

    pub fn flatten_trainable(&self) -> Vec<f32> {
        self.trainable()
            .iter()
            .flat_map(|s| s.iter().copied())
            .collect()
    }

    pub(crate) fn check_same_dims(&self, other: &MlpModel) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::shape(format!(
                "model dims {:?} vs {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(())
    }
}

fn slice(a: &Array2<f32>) -> &[f32] {
    a.as_slice().expect("contiguous")
}

fn fill_uniform<R: Rng + ?Sized>(w: &mut Array2<f32>, fan_in: usize, rng: &mut R) {
    let bound = 1.0 / (fan_in as f32).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    for x in w.iter_mut() {
        *x = dist.sample(rng);
    }
}

/// Gradient (or any buffer) shaped like the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1: Array2<f32>,
    pub b1: Array1<f32>,
    pub bn_gamma: Array1<f32>,
    pub bn_beta: Array1<f32>,
    pub w2: Array2<f32>,
    pub b2: Array1<f32>,
}

impl Gradients {
    pub fn zeros(dims: MlpDims) -> Self {
        let MlpDims {
            input: n1,
            hidden: n2,
            classes: n3,
        } = dims;
        Self {
            w1: Array2::zeros((n2, n1)),
            b1: Array1::zeros(n2),
            bn_gamma: Array1::zeros(n2),
            bn_beta: Array1::zeros(n2),
            w2: Array2::zeros((n3, n2)),
            b2: Array1::zeros(n3),
        }
    }

    pub fn dims(&self) -> MlpDims {
        MlpDims {
            input: self.w1.ncols(),
            hidden: self.w1.nrows(),
            classes: self.w2.nrows(),
        }
    }

    pub fn slices(&self) -> [&[f32]; 6] {
        [
            slice(&self.w1),
            self.b1.as_slice().expect("contiguous"),
            self.bn_gamma.as_slice().expect("contiguous"),
            self.bn_beta.as_slice().expect("contiguous"),
            slice(&self.w2),
            self.b2.as_slice().expect("contiguous"),
        ]
    }

    pub fn slices_mut(&mut self) -> [&mut [f32]; 6] {
        [
            self.w1.as_slice_mut().expect("contiguous"),
            self.b1.as_slice_mut().expect("contiguous"),
            self.bn_gamma.as_slice_mut().expect("contiguous"),
            self.bn_beta.as_slice_mut().expect("contiguous"),
            self.w2.as_slice_mut().expect("contiguous"),
            self.b2.as_slice_mut().expect("contiguous"),
        ]
    }

    pub fn flatten(&self) -> Vec<f32> {
        self.slices().iter().flat_map(|s| s.iter().copied()).collect()
    }
}
