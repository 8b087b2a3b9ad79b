use crate::error::{Error, Result};
use crate::narx::Dataset;
use crate::thermal::{PlantConfig, Simulator};
use crate::kelvin_to_celsius;

/// Runs the plant open loop under `excitation` and records zone
/// temperatures [°C] at every sample, before that sample's input is applied.
///
/// On simulator failure the error carries the step index; everything up to
/// that step is discarded.
pub fn collect_dataset(
    config: &PlantConfig,
    excitation: &[Vec<f64>],
    sample_time: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut sim = Simulator::new(config.clone())?.with_seed(seed);
    let mut state = sim.initial_state();
    let mut y = Vec::with_capacity(excitation.len());
    for (t, u) in excitation.iter().enumerate() {
        y.push(sim.zone_average(&state).into_iter().map(kelvin_to_celsius).collect());
        state = sim.step(&state, u, sample_time).map_err(|e| {
            log::error!("collection aborted after {t} of {} samples", excitation.len());
            e.at_step(t)
        })?;
    }
    if y.is_empty() {
        return Err(Error::Input("empty excitation".into()));
    }
    Dataset::new(sample_time, excitation.to_vec(), y)
}
