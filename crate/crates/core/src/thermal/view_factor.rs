//! Heater-to-element view factors for parallel planes.
//!
//! Each sheet element is treated as a differential area at its centre,
//! facing a parallel rectangular heater face at distance `gap_d`. The
//! point-to-rectangle factor comes from superposing the corner-aligned
//! closed form over the four rectangle corners; reciprocity
//! (`A_h F_{h→i} = A_i F_{i→h}`) then gives the heater-to-element factor.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::config::GeometryParams;
use crate::error::{Error, Result};

/// View factor from a differential area to a parallel `a × b` rectangle at
/// distance `c`, with the rectangle's corner on the area's normal.
///
/// Odd in `a` and in `b`, which is what makes signed four-corner
/// superposition work.
pub fn corner_view_factor(a: f64, b: f64, c: f64) -> f64 {
    let ra = a / c;
    let rb = b / c;
    let sa = (1.0 + ra * ra).sqrt();
    let sb = (1.0 + rb * rb).sqrt();
    (ra / sa * (rb / sa).atan() + rb / sb * (ra / sb).atan()) / (2.0 * PI)
}

/// View factor from an upward-facing differential area at `(px, py, 0)` to
/// the rectangle `[x0, x1] × [y0, y1]` in the plane `z = gap`.
pub fn point_to_rectangle(px: f64, py: f64, x0: f64, x1: f64, y0: f64, y1: f64, gap: f64) -> f64 {
    let (ax, bx) = (x0 - px, x1 - px);
    let (ay, by) = (y0 - py, y1 - py);
    corner_view_factor(bx, by, gap) - corner_view_factor(ax, by, gap) - corner_view_factor(bx, ay, gap)
        + corner_view_factor(ax, ay, gap)
}

/// `F[h, i]`: fraction of radiation leaving heater `h` that reaches sheet
/// element `i` (row-major element index `ix * ny + iy`).
#[derive(Debug, Clone, PartialEq)]
pub struct ViewFactorMatrix {
    f: DMatrix<f64>,
}

impl ViewFactorMatrix {
    pub fn from_matrix(f: DMatrix<f64>) -> Self {
        Self { f }
    }

    pub fn n_heaters(&self) -> usize {
        self.f.nrows()
    }

    pub fn n_elements(&self) -> usize {
        self.f.ncols()
    }

    pub fn get(&self, heater: usize, element: usize) -> f64 {
        self.f[(heater, element)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.f
    }

    /// Total fraction of heater `h`'s radiation that lands on the sheet.
    pub fn heater_total(&self, heater: usize) -> f64 {
        self.f.row(heater).sum()
    }
}

pub fn build_view_factors(geom: &GeometryParams) -> Result<ViewFactorMatrix> {
    geom.validate()?;
    if geom.element_area() <= 0.0 || geom.heater_area() <= 0.0 {
        return Err(Error::Config("zero element or heater area".into()));
    }
    let (hw, hh) = (geom.heater_w / 2.0, geom.heater_h / 2.0);
    let ratio = geom.element_area() / geom.heater_area();
    let mut f = DMatrix::zeros(geom.n_heaters(), geom.n_elements());
    for h in 0..geom.n_heaters() {
        let (cx, cy) = geom.heater_center(h);
        for ix in 0..geom.nx {
            for iy in 0..geom.ny {
                let (px, py) = geom.element_center(ix, iy);
                let fe = point_to_rectangle(px, py, cx - hw, cx + hw, cy - hh, cy + hh, geom.gap_d);
                f[(h, ix * geom.ny + iy)] = (ratio * fe).clamp(0.0, 1.0);
            }
        }
    }
    Ok(ViewFactorMatrix { f })
}
