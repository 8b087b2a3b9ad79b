//! Closed-loop robustness over perturbed plant parameters.
//!
//! The controller's model is identified once at nominal conditions and
//! reused unchanged; only the simulated plant moves.

use rayon::prelude::*;

use super::closed_loop::{run_closed_loop, ClosedLoopOptions};
use super::metrics::Metrics;
use crate::error::{Error, Result};
use crate::mpc::MpcConfig;
use crate::narx::NarxModel;
use crate::thermal::PlantConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    /// Convection coefficient on both faces [W/(m²·K)].
    pub h: Vec<f64>,
    /// Heater-to-sheet gap [m].
    pub d: Vec<f64>,
    pub absorptivity: Vec<f64>,
    /// `(h, d, absorptivity)` of the nominal plant.
    pub nominal: (f64, f64, f64),
    /// Run the full Cartesian product instead of the two slices through
    /// the nominal point.
    pub full: bool,
}

impl Default for SweepGrid {
    fn default() -> Self {
        Self {
            h: vec![2.0, 4.0, 5.0, 6.0, 8.0, 10.0],
            d: vec![0.10, 0.15, 0.20, 0.25],
            absorptivity: vec![0.6, 0.7, 0.8, 0.9],
            nominal: (5.0, 0.15, 0.8),
            full: false,
        }
    }
}

/// One grid point: `(h, d, absorptivity)`.
pub type SweepPoint = (f64, f64, f64);

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        let (h, d, a) = self.nominal;
        if !self.h.contains(&h) || !self.d.contains(&d) || !self.absorptivity.contains(&a) {
            return Err(Error::Config(format!("nominal point ({h}, {d}, {a}) is not on the grid")));
        }
        Ok(())
    }

    /// Grid points sorted by `(h, d, absorptivity)`. Without `full`, the
    /// `h × d` slice at nominal absorptivity and the `h × absorptivity`
    /// slice at nominal gap.
    pub fn points(&self) -> Vec<SweepPoint> {
        let (_, d0, a0) = self.nominal;
        let mut pts = Vec::new();
        for &h in &self.h {
            for &d in &self.d {
                for &a in &self.absorptivity {
                    if self.full || a == a0 || d == d0 {
                        pts.push((h, d, a));
                    }
                }
            }
        }
        pts.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.total_cmp(&y.2)));
        pts.dedup();
        pts
    }

    pub fn apply(&self, base: &PlantConfig, (h, d, a): SweepPoint) -> PlantConfig {
        let mut cfg = base.clone();
        cfg.material.h_top = h;
        cfg.material.h_bot = h;
        cfg.geometry.gap_d = d;
        cfg.material.absorptivity = a;
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: SweepPoint,
    /// Failed runs keep their error message; the sweep carries on.
    pub outcome: std::result::Result<Metrics, String>,
}

pub fn robustness_sweep(
    grid: &SweepGrid,
    base: &PlantConfig,
    model: &NarxModel,
    mpc: &MpcConfig,
    reference: &[f64],
    options: &ClosedLoopOptions,
) -> Result<Vec<SweepRow>> {
    grid.validate()?;
    let rows = grid
        .points()
        .into_par_iter()
        .map(|point| {
            let plant = grid.apply(base, point);
            let outcome = run_closed_loop(&plant, model, mpc, reference, options)
                .map(|run| run.metrics)
                .map_err(|e| {
                    log::warn!("sweep point {point:?} failed: {e}");
                    e.to_string()
                });
            SweepRow { point, outcome }
        })
        .collect();
    Ok(rows)
}
