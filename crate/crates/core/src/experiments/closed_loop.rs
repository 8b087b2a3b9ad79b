//! Sampled-data closed loop: measure, solve, apply, advance.

use std::time::Instant;

use super::metrics::{compute_metrics, Metrics, SETTLING_BAND};
use crate::error::{Error, Result};
use crate::kelvin_to_celsius;
use crate::mpc::{MpcConfig, MpcController};
use crate::narx::NarxModel;
use crate::thermal::{PlantConfig, Simulator, ThermalState};

/// Anything that can be sampled and driven at the control rate.
pub trait Plant {
    /// Zone temperatures [°C].
    fn measure(&self) -> Vec<f64>;
    /// Holds `u` for `dt` seconds.
    fn advance(&mut self, u: &[f64], dt: f64) -> Result<()>;
}

/// The physics simulator, reporting zone averages in °C.
#[derive(Debug, Clone)]
pub struct ThermalPlant {
    sim: Simulator,
    state: ThermalState,
}

impl ThermalPlant {
    pub fn new(config: &PlantConfig, seed: u64) -> Result<Self> {
        let sim = Simulator::new(config.clone())?.with_seed(seed);
        let state = sim.initial_state();
        Ok(Self { sim, state })
    }

    pub fn state(&self) -> &ThermalState {
        &self.state
    }
}

impl Plant for ThermalPlant {
    fn measure(&self) -> Vec<f64> {
        self.sim.zone_average(&self.state).into_iter().map(kelvin_to_celsius).collect()
    }

    fn advance(&mut self, u: &[f64], dt: f64) -> Result<()> {
        self.state = self.sim.step(&self.state, u, dt)?;
        Ok(())
    }
}

/// The identified model run as a simulator, for mismatch-free checks.
pub struct ModelPlant {
    model: NarxModel,
    y: Vec<Vec<f64>>,
    u: Vec<Vec<f64>>,
}

impl ModelPlant {
    /// Starts from a history resting at `y0` under `u0`.
    pub fn new(model: NarxModel, y0: &[f64], u0: &[f64]) -> Self {
        let lags = model.layout.max_lag();
        Self {
            y: vec![y0.to_vec(); lags],
            // `u[t]` is the input applied from sample `t`; the next one
            // arrives with `advance`.
            u: vec![u0.to_vec(); lags - 1],
            model,
        }
    }
}

impl Plant for ModelPlant {
    fn measure(&self) -> Vec<f64> {
        self.y.last().expect("history is never empty").clone()
    }

    fn advance(&mut self, u: &[f64], _dt: f64) -> Result<()> {
        self.u.push(u.to_vec());
        let t = self.y.len();
        let x = self.model.layout.build_regressor(&self.y, &self.u, t)?;
        self.y.push(self.model.eval(&x));
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopOptions {
    /// Run length [s]; the last sample falls at the first multiple of the
    /// sample time not below it.
    pub duration: f64,
    pub sample_time: f64,
    pub seed: u64,
}

impl Default for ClosedLoopOptions {
    fn default() -> Self {
        Self {
            duration: 1000.0,
            sample_time: 6.0,
            seed: 1,
        }
    }
}

impl ClosedLoopOptions {
    pub fn steps(&self) -> usize {
        (self.duration / self.sample_time - 1e-9).ceil().max(0.0) as usize
    }
}

/// Per-sample record of a closed-loop run. Row `k` holds the measurement
/// at `t[k]` and the input applied from then on; the final row carries
/// the last measurement with the input still held and zero solver stats.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    pub reference: Vec<f64>,
    pub u: Vec<Vec<f64>>,
    pub qp_iterations: Vec<usize>,
    pub qp_residual: Vec<f64>,
    pub slack_max: Vec<f64>,
    pub fallback: Vec<bool>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn metrics(&self) -> Result<Metrics> {
        compute_metrics(&self.t, &self.y, &self.reference, SETTLING_BAND)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopRun {
    pub trajectory: Trajectory,
    pub metrics: Metrics,
    /// Wall-clock seconds per control step (linearize + QP).
    pub step_seconds: Vec<f64>,
}

/// Runs the MPC against `plant` from its current state.
pub fn run_loop<P: Plant>(
    plant: &mut P,
    model: &NarxModel,
    mpc: &MpcConfig,
    reference: &[f64],
    options: &ClosedLoopOptions,
) -> Result<ClosedLoopRun> {
    if !(options.sample_time > 0.0 && options.duration >= 0.0) {
        return Err(Error::Config("sample_time must be positive and duration non-negative".into()));
    }
    let z = model.layout.z;
    if reference.len() != z {
        return Err(Error::Dimension(format!("{} references for {z} zones", reference.len())));
    }
    let y0 = plant.measure();
    let mut controller = MpcController::new(model.clone(), mpc.clone(), &y0, &vec![0.0; model.layout.h])?;
    let steps = options.steps();
    let mut traj = Trajectory {
        t: Vec::with_capacity(steps + 1),
        y: Vec::with_capacity(steps + 1),
        reference: reference.to_vec(),
        u: Vec::with_capacity(steps + 1),
        qp_iterations: Vec::with_capacity(steps + 1),
        qp_residual: Vec::with_capacity(steps + 1),
        slack_max: Vec::with_capacity(steps + 1),
        fallback: Vec::with_capacity(steps + 1),
    };
    let mut step_seconds = Vec::with_capacity(steps);
    for k in 0..steps {
        let y = plant.measure();
        let started = Instant::now();
        let report = controller.step(&y, reference).map_err(|e| e.at_step(k))?;
        step_seconds.push(started.elapsed().as_secs_f64());
        plant.advance(&report.u, options.sample_time).map_err(|e| e.at_step(k))?;
        traj.t.push(k as f64 * options.sample_time);
        traj.y.push(y);
        traj.u.push(report.u);
        traj.qp_iterations.push(report.qp_iterations);
        traj.qp_residual.push(report.qp_residual);
        traj.slack_max.push(report.slack_max);
        traj.fallback.push(report.fallback);
    }
    traj.t.push(steps as f64 * options.sample_time);
    traj.y.push(plant.measure());
    traj.u.push(controller.last_input().to_vec());
    traj.qp_iterations.push(0);
    traj.qp_residual.push(0.0);
    traj.slack_max.push(0.0);
    traj.fallback.push(false);
    let metrics = traj.metrics()?;
    Ok(ClosedLoopRun {
        trajectory: traj,
        metrics,
        step_seconds,
    })
}

/// Closed loop on the physics plant started at ambient.
pub fn run_closed_loop(
    plant: &PlantConfig,
    model: &NarxModel,
    mpc: &MpcConfig,
    reference: &[f64],
    options: &ClosedLoopOptions,
) -> Result<ClosedLoopRun> {
    let mut sim = ThermalPlant::new(plant, options.seed)?;
    run_loop(&mut sim, model, mpc, reference, options)
}
