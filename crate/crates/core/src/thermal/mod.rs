//! Physics-based plant: a thermoplastic sheet under a bank of radiant
//! heaters, discretised into finite volumes.
//!
//! Inputs are heater electrical powers [W]; outputs are zone-average sheet
//! temperatures [K], one zone under each heater.

mod config;
mod sim;
mod view_factor;

pub use config::{
    EnvParams, GeometryParams, HeaterModelParams, MaterialParams, PlantConfig, STEFAN_BOLTZMANN,
};
pub use sim::{
    conduction_flux, convection_flux, heater_rate, heater_step, radiation_flux, zone_average, Physics,
    Simulator, ThermalState,
};
pub use view_factor::{build_view_factors, corner_view_factor, point_to_rectangle, ViewFactorMatrix};
