//! Experiment configuration files, command drivers and output writers
//! behind the `fedsim` binary.

mod commands;
mod config;
mod ini;
mod output;
mod svg;
mod sweep;

pub use commands::{
    check_comparable, cmd_compare, cmd_gen_data, cmd_run, cmd_similarity, cmd_sweep,
    similarity_method_config, similarity_study,
};
pub use config::{
    config_from_document, load_pair, parse_config, parse_gen_params, preset_config,
    serialize_config, test_path_for, DataConfig, DataSource, ExperimentConfig, OutputConfig,
    Preset, SimilaritySettings, SyntheticParams,
};
pub use ini::{Entry, IniDocument, Section};
pub use output::{
    convergence_chart, history_csv, similarity_chart, similarity_csv, HISTORY_HEADER,
    SIMILARITY_HEADER,
};
pub use svg::{LineChart, Series};
pub use sweep::{
    parse_sweep, run_sweep, select_best, BestCells, CellParams, GridAxes, SweepCell, SweepResult,
    SweepSpec,
};
