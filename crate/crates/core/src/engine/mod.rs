//! Synchronous federated simulation.
//!
//! A run owns a [`FederationState`]; each call to [`run_round`] selects
//! clients, trains them (in parallel, each on its own random substream),
//! combines the results in ascending client order and charges the cost
//! ledger. Outputs do not depend on the thread count.

mod aggregate;
mod central;
mod config;
mod experiment;
mod local;
mod round;

pub use aggregate::{aggregate_average, fedadam_step, fednova_aggregate, FedAdamState};
pub use central::centralized_train_epoch;
pub use config::{AlgorithmConfig, Budgets, SimulationConfig};
pub use experiment::{continue_experiment, learning_rate_at, run_experiment, RunOutput};
pub use local::{local_train, sample_batch_indices, select_clients, MoonContext};
pub use round::{
    init_stream, local_stream, run_round, selection_stream, subnet_stream, FederatedData,
    FederationState, RoundRecord,
};
