use rand::Rng;

use super::dataset::FeatureDataset;
use super::dirichlet::{dirichlet_sample, ClassDistribution};
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Samples held by one site: indices into the training set, drawn with
/// replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientShard {
    pub client_id: usize,
    pub indices: Vec<usize>,
    pub histogram: Vec<usize>,
}

impl ClientShard {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn distinct_classes(&self) -> usize {
        self.histogram.iter().filter(|&&c| c > 0).count()
    }
}

/// Restricts `dist` to classes that actually have samples. Falls back to a
/// uniform choice among them when all of the drawn mass sits on empty
/// classes.
fn effective_weights(dist: &ClassDistribution, per_class: &[Vec<usize>]) -> Vec<f64> {
    let mut w: Vec<f64> = dist
        .probs
        .iter()
        .zip(per_class)
        .map(|(&p, idx)| if idx.is_empty() { 0.0 } else { p })
        .collect();
    if w.iter().sum::<f64>() <= 0.0 {
        w = per_class
            .iter()
            .map(|idx| if idx.is_empty() { 0.0 } else { 1.0 })
            .collect();
    }
    w
}

fn categorical<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = i;
        if target < acc {
            return i;
        }
    }
    last
}

/// Draws one class distribution per client from Dirichlet(alpha), then
/// `samples_per_client` i.i.d. samples: class from that distribution,
/// row uniformly (with replacement) within the class.
pub fn build_client_shards(
    train: &FeatureDataset,
    n_clients: usize,
    alpha: f64,
    samples_per_client: usize,
    stream: RngStream,
) -> Result<Vec<ClientShard>> {
    if n_clients == 0 {
        return Err(Error::domain("need at least one client"));
    }
    if samples_per_client == 0 {
        return Err(Error::domain("samples_per_client must be >= 1"));
    }
    let per_class = train.class_indices();
    let k = train.classes;
    (0..n_clients)
        .map(|client_id| {
            let mut rng = stream.index(client_id as u64).rng();
            let dist = dirichlet_sample(alpha, k, &mut rng)?;
            let weights = effective_weights(&dist, &per_class);
            let total: f64 = weights.iter().sum();
            let mut indices = Vec::with_capacity(samples_per_client);
            let mut histogram = vec![0; k];
            for _ in 0..samples_per_client {
                let c = categorical(&weights, total, &mut rng);
                let pool = &per_class[c];
                indices.push(pool[rng.random_range(0..pool.len())]);
                histogram[c] += 1;
            }
            Ok(ClientShard {
                client_id,
                indices,
                histogram,
            })
        })
        .collect()
}
