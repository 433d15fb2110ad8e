use super::config::SimulationConfig;
use super::round::{run_round, FederatedData, FederationState, RoundRecord};
use crate::cost::{ArchSpec, CostLedger};
use crate::error::Result;
use crate::nn::MlpModel;

/// Step schedule of the local learning rate: ×0.1 once half of
/// `max_rounds` has elapsed and again at three quarters.
pub fn learning_rate_at(base: f32, round: usize, max_rounds: usize) -> f32 {
    let done = round.saturating_sub(1) as f64;
    let max = max_rounds as f64;
    if max > 0.0 && done >= 0.75 * max {
        base * 0.01
    } else if max > 0.0 && done >= 0.5 * max {
        base * 0.1
    } else {
        base
    }
}

/// Outcome of one complete federated run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub history: Vec<RoundRecord>,
    pub model: MlpModel,
    pub cost: CostLedger,
}

/// Runs rounds from a fresh state until a budget is exceeded or
/// `max_rounds` is reached. The last round is always evaluated.
pub fn run_experiment(cfg: &SimulationConfig, data: &FederatedData) -> Result<RunOutput> {
    let state = FederationState::new(cfg, data)?;
    continue_experiment(state, cfg, data)
}

/// Same as [`run_experiment`] but starting from an existing state.
pub fn continue_experiment(
    mut state: FederationState,
    cfg: &SimulationConfig,
    data: &FederatedData,
) -> Result<RunOutput> {
    let budgets = cfg.budgets;
    let a = &cfg.algorithm;
    let arch = ArchSpec::new(state.global.dims(), a.batch_size, cfg.active_sites(data.n_clients()))?;
    while state.round < budgets.max_rounds && budgets.within(state.cost.flops, state.cost.bytes) {
        let round = state.round + 1;
        let lr = learning_rate_at(a.lr, round, budgets.max_rounds);
        let mut after = state.cost;
        after.charge_round(&arch, a.kind, a.local_rounds);
        let last = round == budgets.max_rounds || !budgets.within(after.flops, after.bytes);
        let evaluate = last || round.is_multiple_of(cfg.eval_every);
        run_round(&mut state, cfg, data, lr, evaluate)?;
    }
    Ok(RunOutput {
        history: state.history,
        model: state.global,
        cost: state.cost,
    })
}
