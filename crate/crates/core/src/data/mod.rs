//! Datasets: synthetic Gaussian features, the `.fvds` file format,
//! Dirichlet label skew and per-site shard construction.

mod dataset;
mod dirichlet;
mod format;
mod shards;

pub use dataset::{generate_synthetic, FeatureDataset, Split};
pub use dirichlet::{dirichlet_sample, ln_gamma_variate, ClassDistribution};
pub use format::{decode_dataset, encode_dataset, load_dataset, save_dataset, MAGIC, VERSION};
pub use shards::{build_client_shards, ClientShard};
