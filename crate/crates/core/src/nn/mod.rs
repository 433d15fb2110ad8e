//! Single-hidden-layer perceptron with batch normalization, written out by
//! hand: forward/backward passes, cross-entropy, the model-contrastive
//! auxiliary loss, and momentum / proximal SGD.
//!
//! All parameters are `f32`; reductions (batch statistics, losses) are
//! accumulated in `f64`.

mod model;
mod moon;
mod optim;
mod pass;

pub use model::{Gradients, MlpDims, MlpModel};
pub use moon::{cosine_similarity, moon_contrastive, COSINE_EPS};
pub use optim::{add_proximal, sgd_step, OptimizerState};
pub use pass::{
    argmax, backward, backward_with_hidden_grad, cross_entropy, evaluate_accuracy, forward,
    softmax_rows, update_running_stats, Batch, ForwardCache, Mode, BN_EPS, BN_MOMENTUM,
};
