//! Constrained linear MPC on successive linearizations of a NARX model.

pub mod controller;
pub mod predict;
pub mod qp;

pub use controller::{assemble_qp, MpcConfig, MpcController, StepReport};
pub use predict::{build_prediction, Prediction};
pub use qp::{solve_qp, QpProblem, QpSettings, QpSolution};
