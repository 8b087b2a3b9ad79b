//! Receding-horizon controller on a successively linearized NARX model.
//!
//! Every control step relinearizes the model at the freshest regressor — the
//! one that predicts the next output from the measured history with the
//! previous input held — solves one QP over input deviations from that held
//! input, and applies the first move.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use super::predict::{build_prediction, Prediction};
use super::qp::{solve_qp, QpProblem, QpSettings};
use crate::error::{Error, Result};
use crate::narx::{linearize, NarxModel};

#[derive(Debug, Clone, PartialEq)]
pub struct MpcConfig {
    /// Prediction horizon [samples].
    pub np: usize,
    /// Control horizon [samples]; the input is held after `nc` moves.
    pub nc: usize,
    /// Tracking weight.
    pub alpha: f64,
    /// Input-rate weight.
    pub beta: f64,
    pub u_min: f64,
    pub u_max: f64,
    /// Allowed excursion above the reference before the soft output limit
    /// engages [°C]. `f64::INFINITY` removes the output limit.
    pub t_over: f64,
    /// Quadratic penalty on output-limit slack.
    pub slack_weight: f64,
    /// One slack per output shared by all prediction steps instead of one
    /// per output and step.
    pub shared_slack: bool,
    /// Gain of the filter estimating a constant disturbance on the one-step
    /// model equation from its prediction error; 0 disables the estimate.
    pub disturbance_gain: f64,
    pub qp_tol: f64,
    pub qp_max_iter: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            np: 40,
            nc: 5,
            alpha: 1.0,
            beta: 0.01,
            u_min: 0.0,
            u_max: 500.0,
            t_over: 0.0,
            slack_weight: 1e4,
            shared_slack: true,
            disturbance_gain: 0.0,
            qp_tol: 1e-6,
            qp_max_iter: 2000,
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nc == 0 || self.nc > self.np {
            return Err(Error::Config(format!("need 1 ≤ Nc ≤ Np, got Np={}, Nc={}", self.np, self.nc)));
        }
        if !(self.alpha > 0.0 && self.beta > 0.0 && self.slack_weight > 0.0) {
            return Err(Error::Config("alpha, beta and slack_weight must be positive".into()));
        }
        if !(self.u_min.is_finite() && self.u_max.is_finite() && self.u_min < self.u_max) {
            return Err(Error::Config(format!("invalid input bounds [{}, {}]", self.u_min, self.u_max)));
        }
        if self.t_over.is_nan() || self.t_over < 0.0 {
            return Err(Error::Config("t_over must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.disturbance_gain) {
            return Err(Error::Config(format!("disturbance_gain must lie in [0, 1], got {}", self.disturbance_gain)));
        }
        if !(self.qp_tol > 0.0) || self.qp_max_iter == 0 {
            return Err(Error::Config("qp_tol and qp_max_iter must be positive".into()));
        }
        Ok(())
    }

    fn soft_outputs(&self) -> bool {
        self.t_over.is_finite()
    }
}

/// Builds the QP over `x = [δu (Nc·h); s (Np·z)]`.
///
/// * `free` — predicted outputs with all moves at zero;
/// * `reference` — stacked targets over the horizon;
/// * `u_op` — input the moves are measured from;
/// * `u_prev` — input applied last step (enters the first rate term).
///
/// The cost is `α‖r − free − Γδu‖² + β‖Δu‖² + ρ‖s‖²` subject to
/// `u_min ≤ u_op + δu ≤ u_max` and `free + Γδu − s ≤ r + T_over`. The slack
/// needs no sign constraint: a negative value only tightens its row and
/// costs more.
pub fn assemble_qp(
    pred: &Prediction,
    free: &DVector<f64>,
    reference: &DVector<f64>,
    u_op: &DVector<f64>,
    u_prev: &DVector<f64>,
    cfg: &MpcConfig,
) -> Result<QpProblem> {
    let (h, z) = (pred.n_inputs, pred.n_outputs);
    let nu = pred.nc * h;
    let ny = pred.np * z;
    if free.len() != ny || reference.len() != ny || u_op.len() != h || u_prev.len() != h {
        return Err(Error::Dimension("QP data does not match the prediction horizon".into()));
    }
    let ns = match (cfg.soft_outputs(), cfg.shared_slack) {
        (false, _) => 0,
        (true, false) => ny,
        (true, true) => z,
    };
    let n = nu + ns;

    // Rate operator: (Dδu)_k = δu_k − δu_{k−1}, with δu_{−1} = u_prev − u_op.
    let mut d = DMatrix::<f64>::identity(nu, nu);
    for i in h..nu {
        d[(i, i - h)] = -1.0;
    }
    let mut w = DVector::zeros(nu);
    w.rows_mut(0, h).copy_from(&(u_prev - u_op));

    let gamma = &pred.gamma;
    let e = reference - free;
    let mut hessian = DMatrix::zeros(n, n);
    hessian
        .view_mut((0, 0), (nu, nu))
        .copy_from(&((gamma.transpose() * gamma * cfg.alpha + d.transpose() * &d * cfg.beta) * 2.0));
    for i in nu..n {
        hessian[(i, i)] = 2.0 * cfg.slack_weight;
    }
    let mut gradient = DVector::zeros(n);
    gradient
        .rows_mut(0, nu)
        .copy_from(&((gamma.transpose() * &e * cfg.alpha + d.transpose() * &w * cfg.beta) * -2.0));

    let rows = 2 * nu + if ns > 0 { ny } else { 0 };
    let mut c = DMatrix::zeros(rows, n);
    let mut dvec = DVector::zeros(rows);
    for i in 0..nu {
        let j = i % h;
        c[(2 * i, i)] = 1.0;
        dvec[2 * i] = cfg.u_max - u_op[j];
        c[(2 * i + 1, i)] = -1.0;
        dvec[2 * i + 1] = u_op[j] - cfg.u_min;
    }
    if ns > 0 {
        c.view_mut((2 * nu, 0), (ny, nu)).copy_from(gamma);
        for k in 0..ny {
            c[(2 * nu + k, nu + k % ns)] = -1.0;
            dvec[2 * nu + k] = e[k] + cfg.t_over;
        }
    }
    Ok(QpProblem {
        hessian,
        gradient,
        c,
        d: dvec,
    })
}

/// What happened in one control step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub u: Vec<f64>,
    pub qp_iterations: usize,
    pub qp_residual: f64,
    pub slack_max: f64,
    /// The QP failed and the previous input was re-applied.
    pub fallback: bool,
    /// The previous input lay outside the bounds and was clamped first.
    pub clamped_previous: bool,
    /// Predicted outputs over the horizon under the planned moves, one row
    /// per step.
    pub predicted: Vec<Vec<f64>>,
    /// Planned inputs for the `Nc` free moves; the last is held beyond.
    pub planned: Vec<Vec<f64>>,
}

fn horizon_rows(stacked: &DVector<f64>, z: usize) -> Vec<Vec<f64>> {
    stacked.as_slice().chunks(z).map(<[f64]>::to_vec).collect()
}

#[derive(Debug, Clone)]
pub struct MpcController {
    model: NarxModel,
    config: MpcConfig,
    y_hist: VecDeque<Vec<f64>>,
    u_hist: VecDeque<Vec<f64>>,
    disturbance: DVector<f64>,
}

impl MpcController {
    /// Starts with a history in which the plant has sat at `y0` under `u0`.
    pub fn new(model: NarxModel, config: MpcConfig, y0: &[f64], u0: &[f64]) -> Result<Self> {
        config.validate()?;
        let l = model.layout;
        if y0.len() != l.z || u0.len() != l.h {
            return Err(Error::Dimension(format!(
                "initial history has {} outputs / {} inputs, model expects {} / {}",
                y0.len(),
                u0.len(),
                l.z,
                l.h
            )));
        }
        Ok(Self {
            y_hist: std::iter::repeat(y0.to_vec()).take(l.n).collect(),
            u_hist: std::iter::repeat(u0.to_vec()).take(l.m.max(1)).collect(),
            disturbance: DVector::zeros(l.z),
            model,
            config,
        })
    }

    pub fn config(&self) -> &MpcConfig {
        &self.config
    }

    pub fn model(&self) -> &NarxModel {
        &self.model
    }

    pub fn last_input(&self) -> &[f64] {
        self.u_hist.back().expect("history is never empty")
    }

    /// Current estimate of the disturbance on the one-step model equation.
    pub fn disturbance(&self) -> &[f64] {
        self.disturbance.as_slice()
    }

    /// Regressor predicting the next output with the latest input `u_op`.
    fn operating_regressor(&self, u_op: &[f64]) -> Vec<f64> {
        let l = self.model.layout;
        let mut x = vec![0.0; l.dim()];
        let ny = self.y_hist.len();
        let nu = self.u_hist.len();
        for lag in 1..=l.n {
            for c in 0..l.z {
                x[l.y_index(lag, c)] = self.y_hist[ny - lag][c];
            }
        }
        for lag in 1..=l.m {
            for c in 0..l.h {
                x[l.u_index(lag, c)] = if lag == 1 { u_op[c] } else { self.u_hist[nu + 1 - lag][c] };
            }
        }
        x
    }

    /// Consumes the latest measurement [°C] and returns the input to apply
    /// until the next sample. `reference` holds one target per output and is
    /// taken as constant over the horizon.
    pub fn step(&mut self, measurement: &[f64], reference: &[f64]) -> Result<StepReport> {
        let l = self.model.layout;
        if measurement.len() != l.z || reference.len() != l.z {
            return Err(Error::Dimension("measurement or reference has the wrong length".into()));
        }
        if measurement.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("non-finite measurement".into()));
        }
        if self.config.disturbance_gain > 0.0 {
            let expected = self.model.eval(&self.operating_regressor(self.last_input()));
            for (c, d) in self.disturbance.iter_mut().enumerate() {
                *d += self.config.disturbance_gain * (measurement[c] - expected[c] - *d);
            }
        }
        self.y_hist.pop_front();
        self.y_hist.push_back(measurement.to_vec());

        let cfg = &self.config;
        let u_prev = DVector::from_column_slice(self.last_input());
        let u_op = u_prev.map(|v| v.clamp(cfg.u_min, cfg.u_max));
        let clamped_previous = u_op != u_prev;
        if clamped_previous {
            log::warn!("previous input outside [{}, {}]; clamped", cfg.u_min, cfg.u_max);
        }

        let x_op = self.operating_regressor(u_op.as_slice());
        let plant = linearize(&self.model, &x_op, u_op.as_slice())?;
        let pred = build_prediction(&plant, cfg.np, cfg.nc)?;
        // The operating regressor already is the step-1 state, so the drift
        // only enters from the second prediction on. The disturbance adds to
        // every predicted output and, through the output lags, to the state.
        let drift = plant.drift() + &plant.b1 * &self.disturbance;
        let mut free = DVector::zeros(cfg.np * l.z);
        for i in 0..cfg.np {
            let mut block = free.rows_mut(i * l.z, l.z);
            block += &plant.y_op + &self.disturbance;
            if i > 0 {
                block += pred.psi.rows((i - 1) * l.z, l.z) * &drift;
            }
        }
        let target = DVector::from_fn(cfg.np * l.z, |k, _| reference[k % l.z]);
        let qp = assemble_qp(&pred, &free, &target, &u_op, &u_op, cfg)?;
        let settings = QpSettings {
            tol: cfg.qp_tol,
            max_iter: cfg.qp_max_iter,
        };
        let nu = cfg.nc * l.h;
        let report = match solve_qp(&qp, &settings) {
            Ok(sol) => {
                let du = sol.x.rows(0, l.h).into_owned();
                let u = (&u_op + &du).map(|v| v.clamp(cfg.u_min, cfg.u_max));
                let predicted = &free + &pred.gamma * sol.x.rows(0, nu);
                StepReport {
                    u: u.iter().copied().collect(),
                    qp_iterations: sol.iterations,
                    qp_residual: sol.kkt_residual,
                    slack_max: sol.x.rows(nu, sol.x.len() - nu).iter().fold(0.0f64, |m, s| m.max(*s)),
                    fallback: false,
                    clamped_previous,
                    predicted: horizon_rows(&predicted, l.z),
                    planned: (0..cfg.nc)
                        .map(|k| (&u_op + sol.x.rows(k * l.h, l.h)).iter().map(|v| v.clamp(cfg.u_min, cfg.u_max)).collect())
                        .collect(),
                }
            }
            Err(Error::Solver { iterations, residual, .. }) => {
                log::warn!("QP failed after {iterations} iterations (residual {residual:e}); holding input");
                StepReport {
                    u: u_op.iter().copied().collect(),
                    qp_iterations: iterations,
                    qp_residual: residual,
                    slack_max: f64::NAN,
                    fallback: true,
                    clamped_previous,
                    predicted: horizon_rows(&free, l.z),
                    planned: vec![u_op.iter().copied().collect()],
                }
            }
            Err(e) => return Err(e),
        };
        self.u_hist.pop_front();
        self.u_hist.push_back(report.u.clone());
        Ok(report)
    }
}
