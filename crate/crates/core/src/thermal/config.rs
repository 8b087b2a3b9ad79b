//! Plant parameters: sheet material, geometry, heater bank and environment.
//!
//! Defaults reproduce the laboratory sheet (0.75 m × 0.5 m × 2 mm
//! thermoplastic, 5 × 3 ceramic heater bank at 15 cm). All values are SI;
//! temperatures are absolute (K).

use crate::error::{Error, Result};

/// Stefan–Boltzmann constant [W/(m²·K⁴)].
pub const STEFAN_BOLTZMANN: f64 = 5.670374419e-8;

/// Thermophysical properties of the sheet.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialParams {
    /// Density [kg/m³].
    pub rho: f64,
    /// Specific heat [J/(kg·K)].
    pub cp: f64,
    /// Thermal conductivity [W/(m·K)].
    pub k: f64,
    /// Effective heater-to-sheet emissivity.
    pub eps_e: f64,
    /// Fraction of incident radiation absorbed by the sheet.
    pub absorptivity: f64,
    /// Convection coefficient, top face [W/(m²·K)].
    pub h_top: f64,
    /// Convection coefficient, bottom face [W/(m²·K)].
    pub h_bot: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            rho: 1380.0,
            cp: 1465.0,
            k: 0.18,
            eps_e: 0.95,
            absorptivity: 0.8,
            h_top: 5.0,
            h_bot: 5.0,
        }
    }
}

/// Sheet discretisation and heater-bank layout.
///
/// The sheet occupies `[0, lx] × [0, ly]` in the plane `z = 0`; heater faces
/// lie in the plane `z = gap_d`, one centred over each zone. `heater_w` is
/// the face extent along x, `heater_h` along y.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryParams {
    pub lx: f64,
    pub ly: f64,
    pub dz: f64,
    pub nx: usize,
    pub ny: usize,
    pub gap_d: f64,
    pub heater_rows: usize,
    pub heater_cols: usize,
    pub heater_w: f64,
    pub heater_h: f64,
}

impl Default for GeometryParams {
    fn default() -> Self {
        Self {
            lx: 0.75,
            ly: 0.5,
            dz: 0.002,
            nx: 30,
            ny: 18,
            gap_d: 0.15,
            heater_rows: 5,
            heater_cols: 3,
            heater_w: 0.245,
            heater_h: 0.060,
        }
    }
}

impl GeometryParams {
    pub fn dx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    /// Top-face area of one sheet element.
    pub fn element_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn element_volume(&self) -> f64 {
        self.element_area() * self.dz
    }

    pub fn heater_area(&self) -> f64 {
        self.heater_w * self.heater_h
    }

    pub fn n_elements(&self) -> usize {
        self.nx * self.ny
    }

    pub fn n_heaters(&self) -> usize {
        self.heater_rows * self.heater_cols
    }

    /// Centre of element `(ix, iy)`.
    pub fn element_center(&self, ix: usize, iy: usize) -> (f64, f64) {
        ((ix as f64 + 0.5) * self.dx(), (iy as f64 + 0.5) * self.dy())
    }

    /// Centre of heater `h` (row-major over rows along x, columns along y).
    pub fn heater_center(&self, h: usize) -> (f64, f64) {
        let (row, col) = (h / self.heater_cols, h % self.heater_cols);
        (
            (row as f64 + 0.5) * self.lx / self.heater_rows as f64,
            (col as f64 + 0.5) * self.ly / self.heater_cols as f64,
        )
    }

    /// Zone (= heater index) containing element `(ix, iy)`.
    pub fn zone_of(&self, ix: usize, iy: usize) -> usize {
        let per_x = self.nx / self.heater_rows;
        let per_y = self.ny / self.heater_cols;
        (ix / per_x) * self.heater_cols + iy / per_y
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("Lx", self.lx),
            ("Ly", self.ly),
            ("dz", self.dz),
            ("gap_d", self.gap_d),
            ("heater_w", self.heater_w),
            ("heater_h", self.heater_h),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.nx == 0 || self.ny == 0 || self.heater_rows == 0 || self.heater_cols == 0 {
            return Err(Error::Config("element and heater counts must be non-zero".into()));
        }
        if self.nx % self.heater_rows != 0 {
            return Err(Error::Config(format!(
                "Nx = {} is not divisible by heater_rows = {}",
                self.nx, self.heater_rows
            )));
        }
        if self.ny % self.heater_cols != 0 {
            return Err(Error::Config(format!(
                "Ny = {} is not divisible by heater_cols = {}",
                self.ny, self.heater_cols
            )));
        }
        Ok(())
    }
}

/// Lumped first-order heater surface model.
#[derive(Debug, Clone, PartialEq)]
pub struct HeaterModelParams {
    /// Heat capacity of one heater [J/K].
    pub heat_capacity: f64,
    /// Convective loss coefficient of the heater face [W/(m²·K)].
    pub loss_coeff: f64,
    /// Surface emissivity of the heater face.
    pub eps_h: f64,
    /// Maximum electrical power [W].
    pub p_max: f64,
}

impl Default for HeaterModelParams {
    fn default() -> Self {
        Self {
            heat_capacity: 300.0,
            loss_coeff: 10.0,
            eps_h: 0.9,
            p_max: 500.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvParams {
    /// Ambient temperature [K].
    pub t_amb: f64,
    pub sigma: f64,
}

impl Default for EnvParams {
    fn default() -> Self {
        Self {
            t_amb: 294.15,
            sigma: STEFAN_BOLTZMANN,
        }
    }
}

/// Complete plant description.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantConfig {
    pub material: MaterialParams,
    pub geometry: GeometryParams,
    pub heater: HeaterModelParams,
    pub env: EnvParams,
    /// Explicit integration step [s].
    pub dt_sim: f64,
    /// Standard deviation of the random per-zone heat load applied over each
    /// sampling interval [W]. Zero gives a deterministic plant.
    pub disturbance_std: f64,
}

impl Default for PlantConfig {
    fn default() -> Self {
        Self {
            material: MaterialParams::default(),
            geometry: GeometryParams::default(),
            heater: HeaterModelParams::default(),
            env: EnvParams::default(),
            dt_sim: 0.5,
            disturbance_std: 0.0,
        }
    }
}

impl PlantConfig {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let m = &self.material;
        let positive = [
            ("rho", m.rho),
            ("cp", m.cp),
            ("k", m.k),
            ("h_top", m.h_top),
            ("h_bot", m.h_bot),
            ("heat_capacity", self.heater.heat_capacity),
            ("loss_coeff", self.heater.loss_coeff),
            ("P_max", self.heater.p_max),
            ("T_amb", self.env.t_amb),
            ("sigma", self.env.sigma),
            ("dt_sim", self.dt_sim),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let unit = [
            ("eps_e", m.eps_e),
            ("absorptivity", m.absorptivity),
            ("eps_h", self.heater.eps_h),
        ];
        for (name, v) in unit {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1], got {v}")));
            }
        }
        if !(self.disturbance_std.is_finite() && self.disturbance_std >= 0.0) {
            return Err(Error::Config(format!(
                "disturbance_std must be non-negative, got {}",
                self.disturbance_std
            )));
        }
        Ok(())
    }

    /// Heat capacity ρ·V·c_p of a single sheet element [J/K].
    pub fn element_heat_capacity(&self) -> f64 {
        self.material.rho * self.geometry.element_volume() * self.material.cp
    }
}
