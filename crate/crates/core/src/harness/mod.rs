//! Run configuration, artifact files and the command implementations behind the CLI.

mod commands;
mod config;

pub use commands::{
    build_graph, build_task, cmd_energy, cmd_replay, cmd_topology, cmd_train, cmd_tree,
    resolve_output_dir, resolve_tree, EnergyReport, Overrides, RunManifest, StageSeeds, Task,
    TopologyReport, TrainReport, TreeReport, OUTPUT_ROOT_ENV,
};
pub use config::{
    DataConfig, LoadedConfig, RunConfig, SnnConfig, TopologyConfig, TreeConfig, TreeMethod,
};
