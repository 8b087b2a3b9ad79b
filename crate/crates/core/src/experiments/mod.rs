//! Identification experiments, closed-loop evaluation and robustness sweeps.

mod closed_loop;
mod collect;
mod metrics;
mod prbs;
mod sweep;

pub use closed_loop::{
    run_closed_loop, run_loop, ClosedLoopOptions, ClosedLoopRun, ModelPlant, Plant, ThermalPlant, Trajectory,
};
pub use collect::collect_dataset;
pub use metrics::{compute_metrics, Metrics, SETTLING_BAND, TERMINAL_BOUND};
pub use prbs::{generate_prbs, PrbsSchedule};
pub use sweep::{robustness_sweep, SweepGrid, SweepPoint, SweepRow};

/// Non-uniform zone targets for simulation runs [°C], zone order as the
/// heater bank.
pub const SIM_REFERENCES: [f64; 15] = [
    165.5, 130.3, 118.2, 167.5, 127.6, 117.0, 165.4, 125.5, 114.8, 166.9, 129.8, 117.1, 167.0, 136.3, 119.7,
];

/// Lower zone targets used on the physical rig [°C].
pub const RIG_REFERENCES: [f64; 15] = [
    83.0, 66.0, 51.0, 84.0, 70.0, 55.0, 85.0, 75.0, 56.0, 85.0, 71.0, 54.0, 83.0, 66.0, 53.0,
];
