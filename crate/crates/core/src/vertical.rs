//! Independent-subnetwork decomposition of the hidden layer.
//!
//! Each round the hidden neurons are split into disjoint, balanced groups,
//! one per active site. A site receives the first-layer rows, batch-norm
//! entries and second-layer columns of its neurons plus a full copy of the
//! output bias. Reassembly puts every hidden-layer value back where it came
//! from; only the shared output bias is averaged.

use ndarray::{Array1, Array2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{MlpDims, MlpModel};

/// Disjoint, exhaustive map from hidden neurons to sites.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubnetAssignment {
    pub round: u64,
    pub site_of_neuron: Vec<usize>,
    pub sites: usize,
}

impl SubnetAssignment {
    /// Global indices carried by `site`, ascending.
    pub fn neurons_of(&self, site: usize) -> Vec<usize> {
        self.site_of_neuron
            .iter()
            .enumerate()
            .filter(|&(_, &s)| s == site)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn site_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.sites];
        for &s in &self.site_of_neuron {
            sizes[s] += 1;
        }
        sizes
    }
}

/// A site's slice of the global model.
#[derive(Debug, Clone, PartialEq)]
pub struct Subnet {
    pub model: MlpModel,
    pub neurons: Vec<usize>,
}

/// Uniformly random balanced partition: shuffle `0..hidden`, then cut into
/// `sites` contiguous chunks whose sizes differ by at most one.
pub fn partition<R: Rng + ?Sized>(
    hidden: usize,
    sites: usize,
    round: u64,
    rng: &mut R,
) -> Result<SubnetAssignment> {
    if sites == 0 {
        return Err(Error::config("sites", "need at least one active site"));
    }
    if sites > hidden {
        return Err(Error::config(
            "sites",
            format!("{sites} sites but only {hidden} hidden neurons; a site would be empty"),
        ));
    }
    let mut order: Vec<usize> = (0..hidden).collect();
    order.shuffle(rng);
    let base = hidden / sites;
    let extra = hidden % sites;
    let mut site_of_neuron = vec![0; hidden];
    let mut pos = 0;
    for site in 0..sites {
        let len = base + usize::from(site < extra);
        for &n in &order[pos..pos + len] {
            site_of_neuron[n] = site;
        }
        pos += len;
    }
    Ok(SubnetAssignment {
        round,
        site_of_neuron,
        sites,
    })
}

pub fn extract(global: &MlpModel, asn: &SubnetAssignment, site: usize) -> Result<Subnet> {
    if site >= asn.sites {
        return Err(Error::domain(format!("site {site} >= {}", asn.sites)));
    }
    if asn.site_of_neuron.len() != global.dims().hidden {
        return Err(Error::shape("assignment does not match hidden width"));
    }
    let neurons = asn.neurons_of(site);
    let take = |v: &Array1<f32>| v.select(Axis(0), &neurons);
    let model = MlpModel {
        w1: global.w1.select(Axis(0), &neurons).as_standard_layout().into_owned(),
        b1: take(&global.b1),
        bn_gamma: take(&global.bn_gamma),
        bn_beta: take(&global.bn_beta),
        bn_mean: take(&global.bn_mean),
        bn_var: take(&global.bn_var),
        w2: global.w2.select(Axis(1), &neurons).as_standard_layout().into_owned(),
        b2: global.b2.clone(),
    };
    Ok(Subnet { model, neurons })
}

/// Inverse of [`extract`]. `b2_weights` (one per subnet, normalized here)
/// combine the sites' output-bias copies.
pub fn reassemble(
    subnets: &[Subnet],
    asn: &SubnetAssignment,
    b2_weights: &[f64],
) -> Result<MlpModel> {
    if subnets.is_empty() {
        return Err(Error::Integrity("no subnets".into()));
    }
    if b2_weights.len() != subnets.len() {
        return Err(Error::shape("one b2 weight per subnet required"));
    }
    let hidden = asn.site_of_neuron.len();
    let first = subnets[0].model.dims();
    let dims = MlpDims::new(first.input, hidden, first.classes)?;

    let mut seen = vec![false; hidden];
    for sub in subnets {
        let d = sub.model.dims();
        if d.input != dims.input || d.classes != dims.classes || d.hidden != sub.neurons.len() {
            return Err(Error::shape("subnet dims disagree"));
        }
        for &n in &sub.neurons {
            if n >= hidden {
                return Err(Error::Integrity(format!("neuron {n} outside hidden layer")));
            }
            if std::mem::replace(&mut seen[n], true) {
                return Err(Error::Integrity(format!("neuron {n} covered twice")));
            }
        }
    }
    if let Some(n) = seen.iter().position(|&s| !s) {
        return Err(Error::Integrity(format!("neuron {n} not covered")));
    }

    let mut out = MlpModel::zeros(dims);
    let mut w2 = Array2::<f32>::zeros((dims.classes, hidden));
    for sub in subnets {
        let m = &sub.model;
        for (local, &g) in sub.neurons.iter().enumerate() {
            out.w1.row_mut(g).assign(&m.w1.row(local));
            out.b1[g] = m.b1[local];
            out.bn_gamma[g] = m.bn_gamma[local];
            out.bn_beta[g] = m.bn_beta[local];
            out.bn_mean[g] = m.bn_mean[local];
            out.bn_var[g] = m.bn_var[local];
            w2.column_mut(g).assign(&m.w2.column(local));
        }
    }
    out.w2 = w2;

    let total: f64 = b2_weights.iter().sum();
    if !(total > 0.0) {
        return Err(Error::domain("b2 weights must have positive sum"));
    }
    let mut acc = vec![0f64; dims.classes];
    for (sub, &w) in subnets.iter().zip(b2_weights) {
        for (a, &v) in acc.iter_mut().zip(&sub.model.b2) {
            *a += w / total * f64::from(v);
        }
    }
    out.b2 = acc.iter().map(|&v| v as f32).collect();
    Ok(out)
}
