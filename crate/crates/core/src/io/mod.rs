//! File formats shared by the command-line tool: key=value configuration,
//! CSV tables and run manifests. Model files live in [`crate::narx`].

mod config;
mod manifest;
mod tables;

pub use config::{load_config, parse_config, render_config, ConfigValue, KeyValueConfig, PipelineConfig};
pub use manifest::{sha256_file, sha256_hex, FileRecord, RunManifest, Timing};
pub use tables::{
    load_dataset, load_excitation, load_trajectory, parse_reference, read_dataset, read_trajectory, save_dataset,
    save_excitation, save_metrics, save_trajectory, trajectory_metrics, write_dataset, write_metrics,
    write_trajectory,
};
