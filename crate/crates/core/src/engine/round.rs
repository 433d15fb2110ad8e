use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate_average, fedadam_step, fednova_aggregate, FedAdamState};
use super::config::SimulationConfig;
use super::local::{local_train, select_clients, MoonContext};
use crate::algorithm::AlgorithmKind;
use crate::cost::{ArchSpec, CostLedger};
use crate::data::{build_client_shards, ClientShard, FeatureDataset};
use crate::error::{Error, Result};
use crate::nn::{evaluate_accuracy, MlpDims, MlpModel};
use crate::rng::RngStream;
use crate::vertical::{extract, partition, reassemble, Subnet};

/// Train/test sets plus the client partition of the training set.
#[derive(Debug, Clone)]
pub struct FederatedData {
    pub train: FeatureDataset,
    pub test: FeatureDataset,
    pub shards: Vec<ClientShard>,
    /// Seed the shards were drawn from; runs are comparable only when it
    /// matches.
    pub data_seed: u64,
}

impl FederatedData {
    pub fn new(
        train: FeatureDataset,
        test: FeatureDataset,
        shards: Vec<ClientShard>,
        data_seed: u64,
    ) -> Result<Self> {
        if train.dim() != test.dim() || train.classes != test.classes {
            return Err(Error::shape("train and test sets disagree on dim or classes"));
        }
        if shards.is_empty() {
            return Err(Error::domain("no clients"));
        }
        for s in &shards {
            if s.indices.iter().any(|&i| i >= train.len()) {
                return Err(Error::domain(format!("client {} indexes past the training set", s.client_id)));
            }
        }
        Ok(Self {
            train,
            test,
            shards,
            data_seed,
        })
    }

    /// Draws Dirichlet(`alpha`) shards from `train` under `data_seed`.
    pub fn partitioned(
        train: FeatureDataset,
        test: FeatureDataset,
        n_clients: usize,
        alpha: f64,
        samples_per_client: usize,
        data_seed: u64,
    ) -> Result<Self> {
        let stream = RngStream::new(data_seed).derive("shards");
        let shards = build_client_shards(&train, n_clients, alpha, samples_per_client, stream)?;
        Self::new(train, test, shards, data_seed)
    }

    pub fn n_clients(&self) -> usize {
        self.shards.len()
    }

    /// `p_i = n_i / n` over the given clients.
    pub fn client_weights(&self, clients: &[usize]) -> Vec<f64> {
        let n: usize = clients.iter().map(|&c| self.shards[c].len()).sum();
        clients
            .iter()
            .map(|&c| self.shards[c].len() as f64 / n as f64)
            .collect()
    }
}

/// One row of a run's history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    /// 1-based.
    pub round: usize,
    pub clients: Vec<usize>,
    /// Test accuracy of the global model in eval mode, present on
    /// evaluation rounds only.
    pub test_accuracy: Option<f64>,
    pub cum_flops: f64,
    pub cum_bytes: u64,
}

impl RoundRecord {
    pub fn cum_gflops(&self) -> f64 {
        self.cum_flops / 1e9
    }

    pub fn cum_gb(&self) -> f64 {
        self.cum_bytes as f64 / 1e9
    }
}

/// Substream seeding the local batches of `client` in `round`.
pub fn local_stream(seed: u64, round: usize, client: usize) -> RngStream {
    RngStream::new(seed)
        .derive("local")
        .index(round as u64)
        .index(client as u64)
}

/// Substream for client selection in `round`.
pub fn selection_stream(seed: u64, round: usize) -> RngStream {
    RngStream::new(seed).derive("select").index(round as u64)
}

/// Substream for the hidden-layer partition in `round`.
pub fn subnet_stream(seed: u64, round: usize) -> RngStream {
    RngStream::new(seed).derive("subnet").index(round as u64)
}

/// Substream for the initial global model.
pub fn init_stream(seed: u64) -> RngStream {
    RngStream::new(seed).derive("init")
}

/// Server-side state of one federated run.
#[derive(Debug, Clone)]
pub struct FederationState {
    pub global: MlpModel,
    pub round: usize,
    pub server_opt: Option<FedAdamState>,
    /// Last locally trained model of each client (MOON only).
    pub previous_local: Vec<Option<MlpModel>>,
    pub cost: CostLedger,
    pub history: Vec<RoundRecord>,
}

impl FederationState {
    /// Fresh state with a seeded random global model.
    pub fn new(cfg: &SimulationConfig, data: &FederatedData) -> Result<Self> {
        cfg.validate(data.n_clients())?;
        let dims = MlpDims::new(data.train.dim(), cfg.global_hidden(data.n_clients()), data.train.classes)?;
        let global = MlpModel::init(dims, &mut init_stream(cfg.seed).rng());
        Ok(Self::with_model(cfg, data, global))
    }

    /// Fresh state starting from `global`.
    pub fn with_model(cfg: &SimulationConfig, data: &FederatedData, global: MlpModel) -> Self {
        let a = &cfg.algorithm;
        let server_opt = (a.kind == AlgorithmKind::FedAdam)
            .then(|| FedAdamState::new(&global, a.beta1, a.beta2, a.adam_tau, a.server_lr));
        let previous_local = if a.kind == AlgorithmKind::Moon {
            vec![None; data.n_clients()]
        } else {
            Vec::new()
        };
        Self {
            global,
            round: 0,
            server_opt,
            previous_local,
            cost: CostLedger::new(),
            history: Vec::new(),
        }
    }
}

fn train_averaging(
    state: &mut FederationState,
    cfg: &SimulationConfig,
    data: &FederatedData,
    clients: &[usize],
    round: usize,
    lr: f32,
) -> Result<MlpModel> {
    let a = &cfg.algorithm;
    let global = &state.global;
    let prev = &state.previous_local;
    let trained: Vec<MlpModel> = clients
        .par_iter()
        .map(|&c| {
            let moon = (a.kind == AlgorithmKind::Moon).then(|| MoonContext {
                global,
                previous: prev[c].as_ref().unwrap_or(global),
            });
            local_train(
                global.clone(),
                &data.train,
                &data.shards[c],
                a,
                lr,
                global,
                moon,
                local_stream(cfg.seed, round, c),
            )
        })
        .collect::<Result<_>>()?;

    let weights = data.client_weights(clients);
    let refs: Vec<&MlpModel> = trained.iter().collect();
    let next = match a.kind {
        AlgorithmKind::FedNova => {
            let tau_eff = a
                .fednova_tau_eff
                .unwrap_or(a.local_rounds as f64 / clients.len() as f64);
            let steps = vec![a.local_rounds; clients.len()];
            fednova_aggregate(global, &refs, &steps, &weights, tau_eff)?
        }
        AlgorithmKind::FedAdam => {
            let avg = aggregate_average(&refs, &weights)?;
            let opt = state
                .server_opt
                .as_mut()
                .ok_or_else(|| Error::domain("FedAdam state missing"))?;
            fedadam_step(opt, global, &avg)?
        }
        _ => aggregate_average(&refs, &weights)?,
    };
    if a.kind == AlgorithmKind::Moon {
        for (&c, m) in clients.iter().zip(trained) {
            state.previous_local[c] = Some(m);
        }
    }
    Ok(next)
}

fn train_decomposed(
    state: &FederationState,
    cfg: &SimulationConfig,
    data: &FederatedData,
    clients: &[usize],
    round: usize,
    lr: f32,
) -> Result<MlpModel> {
    let hidden = state.global.dims().hidden;
    let asn = partition(hidden, clients.len(), round as u64, &mut subnet_stream(cfg.seed, round).rng())?;
    let subnets: Vec<Subnet> = clients
        .par_iter()
        .enumerate()
        .map(|(site, &c)| {
            let sub = extract(&state.global, &asn, site)?;
            let model = local_train(
                sub.model.clone(),
                &data.train,
                &data.shards[c],
                &cfg.algorithm,
                lr,
                &sub.model,
                None,
                local_stream(cfg.seed, round, c),
            )?;
            Ok(Subnet {
                model,
                neurons: sub.neurons,
            })
        })
        .collect::<Result<_>>()?;
    reassemble(&subnets, &asn, &vec![1.0; subnets.len()])
}

/// Executes the next round: selection, local training, aggregation and cost
/// accounting. Evaluates on the test set when `evaluate` is set.
pub fn run_round(
    state: &mut FederationState,
    cfg: &SimulationConfig,
    data: &FederatedData,
    lr: f32,
    evaluate: bool,
) -> Result<RoundRecord> {
    let round = state.round + 1;
    let clients = select_clients(
        data.n_clients(),
        cfg.participation,
        &mut selection_stream(cfg.seed, round).rng(),
    )?;
    let kind = cfg.algorithm.kind;
    let next = if kind.is_decomposed() {
        train_decomposed(state, cfg, data, &clients, round, lr)?
    } else {
        train_averaging(state, cfg, data, &clients, round, lr)?
    };
    state.global = next;
    state.round = round;
    let arch = ArchSpec::new(state.global.dims(), cfg.algorithm.batch_size, clients.len())?;
    state.cost.charge_round(&arch, kind, cfg.algorithm.local_rounds);
    let test_accuracy = if evaluate {
        Some(evaluate_accuracy(&state.global, data.test.features.view(), &data.test.labels)?)
    } else {
        None
    };
    let rec = RoundRecord {
        round,
        clients,
        test_accuracy,
        cum_flops: state.cost.flops,
        cum_bytes: state.cost.bytes,
    };
    state.history.push(rec.clone());
    Ok(rec)
}
