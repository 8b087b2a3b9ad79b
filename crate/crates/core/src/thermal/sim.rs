//! Explicit finite-volume integration of the sheet energy balance.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

use super::config::{EnvParams, GeometryParams, HeaterModelParams, MaterialParams, PlantConfig};
use super::view_factor::{build_view_factors, ViewFactorMatrix};
use crate::error::{Error, Result};

/// Full plant state. Sheet temperatures are stored row-major (`ix * ny + iy`).
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalState {
    pub sheet_t: Vec<f64>,
    pub heater_t: Vec<f64>,
    pub time: f64,
}

impl ThermalState {
    /// Sheet and heaters at a single uniform temperature.
    pub fn uniform(geom: &GeometryParams, temperature: f64) -> Self {
        Self {
            sheet_t: vec![temperature; geom.n_elements()],
            heater_t: vec![temperature; geom.n_heaters()],
            time: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.sheet_t.iter().chain(&self.heater_t).all(|t| t.is_finite() && *t > 0.0)
    }
}

fn check_dims(state: &ThermalState, geom: &GeometryParams) -> Result<()> {
    if state.sheet_t.len() != geom.n_elements() || state.heater_t.len() != geom.n_heaters() {
        return Err(Error::Dimension(format!(
            "state has {} elements / {} heaters, geometry expects {} / {}",
            state.sheet_t.len(),
            state.heater_t.len(),
            geom.n_elements(),
            geom.n_heaters()
        )));
    }
    Ok(())
}

/// Net radiative power absorbed by each element [W].
pub fn radiation_flux(
    state: &ThermalState,
    vf: &ViewFactorMatrix,
    mat: &MaterialParams,
    geom: &GeometryParams,
    env: &EnvParams,
) -> Result<Vec<f64>> {
    check_dims(state, geom)?;
    if vf.n_heaters() != geom.n_heaters() || vf.n_elements() != geom.n_elements() {
        return Err(Error::Dimension("view factor matrix does not match geometry".into()));
    }
    let scale = geom.heater_area() * mat.eps_e * env.sigma * mat.absorptivity;
    let theta4: Vec<f64> = state.heater_t.iter().map(|t| t.powi(4)).collect();
    let f = vf.matrix();
    Ok(state
        .sheet_t
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let t4 = t.powi(4);
            let sum: f64 = (0..geom.n_heaters()).map(|h| f[(h, i)] * (theta4[h] - t4)).sum();
            scale * sum
        })
        .collect())
}

/// Convective exchange with ambient through both faces [W]; negative when
/// the sheet is hotter than ambient.
pub fn convection_flux(
    state: &ThermalState,
    mat: &MaterialParams,
    geom: &GeometryParams,
    env: &EnvParams,
) -> Vec<f64> {
    let g = (mat.h_top + mat.h_bot) * geom.element_area();
    state.sheet_t.iter().map(|&t| g * (env.t_amb - t)).collect()
}

/// In-plane conduction from the four neighbours [W]. Edges are adiabatic.
pub fn conduction_flux(state: &ThermalState, mat: &MaterialParams, geom: &GeometryParams) -> Vec<f64> {
    let (nx, ny) = (geom.nx, geom.ny);
    // Neighbours along x share a face of Δy·Δz, along y of Δx·Δz.
    let gx = mat.k * geom.dy() * geom.dz / geom.dx();
    let gy = mat.k * geom.dx() * geom.dz / geom.dy();
    let t = &state.sheet_t;
    let mut q = vec![0.0; nx * ny];
    for ix in 0..nx {
        for iy in 0..ny {
            let i = ix * ny + iy;
            let mut acc = 0.0;
            if ix > 0 {
                acc += gx * (t[i - ny] - t[i]);
            }
            if ix + 1 < nx {
                acc += gx * (t[i + ny] - t[i]);
            }
            if iy > 0 {
                acc += gy * (t[i - 1] - t[i]);
            }
            if iy + 1 < ny {
                acc += gy * (t[i + 1] - t[i]);
            }
            q[i] = acc;
        }
    }
    q
}

/// Time derivative of one heater's surface temperature [K/s].
pub fn heater_rate(theta: f64, power: f64, hp: &HeaterModelParams, area: f64, env: &EnvParams) -> f64 {
    let radiative = area * hp.eps_h * env.sigma * (theta.powi(4) - env.t_amb.powi(4));
    let convective = hp.loss_coeff * area * (theta - env.t_amb);
    (power - radiative - convective) / hp.heat_capacity
}

/// One explicit update (Heun's method) of the heater surface temperatures.
pub fn heater_step(
    heater_t: &[f64],
    powers: &[f64],
    hp: &HeaterModelParams,
    geom: &GeometryParams,
    env: &EnvParams,
    dt: f64,
) -> Result<Vec<f64>> {
    if heater_t.len() != powers.len() {
        return Err(Error::Dimension(format!(
            "{} heaters but {} powers",
            heater_t.len(),
            powers.len()
        )));
    }
    if !(dt > 0.0) {
        return Err(Error::Input(format!("dt must be positive, got {dt}")));
    }
    check_powers(powers, hp.p_max)?;
    let area = geom.heater_area();
    Ok(heater_t
        .iter()
        .zip(powers)
        .map(|(&theta, &p)| {
            let k1 = heater_rate(theta, p, hp, area, env);
            let k2 = heater_rate(theta + dt * k1, p, hp, area, env);
            theta + 0.5 * dt * (k1 + k2)
        })
        .collect())
}

fn check_powers(powers: &[f64], p_max: f64) -> Result<()> {
    for (h, &p) in powers.iter().enumerate() {
        if !(0.0..=p_max).contains(&p) {
            return Err(Error::Input(format!("heater {} power {p} W outside [0, {p_max}]", h + 1)));
        }
    }
    Ok(())
}

/// Mean element temperature under each heater, in heater order.
pub fn zone_average(state: &ThermalState, geom: &GeometryParams) -> Vec<f64> {
    let mut sums = vec![0.0; geom.n_heaters()];
    for ix in 0..geom.nx {
        for iy in 0..geom.ny {
            sums[geom.zone_of(ix, iy)] += state.sheet_t[ix * geom.ny + iy];
        }
    }
    let count = ((geom.nx / geom.heater_rows) * (geom.ny / geom.heater_cols)) as f64;
    sums.iter().map(|s| s / count).collect()
}

/// Which heat-transfer paths are active. All on for the real plant; tests
/// switch paths off to isolate them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Physics {
    pub radiation: bool,
    pub convection: bool,
    pub conduction: bool,
}

impl Default for Physics {
    fn default() -> Self {
        Self {
            radiation: true,
            convection: true,
            conduction: true,
        }
    }
}

/// The simulated plant. Owns the cached view factors and the disturbance
/// stream; stepping is deterministic for a given seed.
#[derive(Debug, Clone)]
pub struct Simulator {
    config: PlantConfig,
    vf: ViewFactorMatrix,
    physics: Physics,
    // element-major copy of F for the inner loop
    gain: Vec<f64>,
    gain_sum: Vec<f64>,
    rng: ChaCha20Rng,
}

impl Simulator {
    pub fn new(config: PlantConfig) -> Result<Self> {
        config.validate()?;
        let vf = build_view_factors(&config.geometry)?;
        let (nh, ne) = (config.geometry.n_heaters(), config.geometry.n_elements());
        let mut gain = vec![0.0; nh * ne];
        let mut gain_sum = vec![0.0; ne];
        for i in 0..ne {
            for h in 0..nh {
                gain[i * nh + h] = vf.get(h, i);
                gain_sum[i] += vf.get(h, i);
            }
        }
        Ok(Self {
            config,
            vf,
            physics: Physics::default(),
            gain,
            gain_sum,
            rng: ChaCha20Rng::seed_from_u64(0),
        })
    }

    pub fn with_physics(mut self, physics: Physics) -> Self {
        self.physics = physics;
        self
    }

    /// Seeds the per-zone disturbance stream.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng = ChaCha20Rng::seed_from_u64(seed);
        self
    }

    pub fn config(&self) -> &PlantConfig {
        &self.config
    }

    pub fn view_factors(&self) -> &ViewFactorMatrix {
        &self.vf
    }

    pub fn initial_state(&self) -> ThermalState {
        ThermalState::uniform(&self.config.geometry, self.config.env.t_amb)
    }

    pub fn zone_average(&self, state: &ThermalState) -> Vec<f64> {
        zone_average(state, &self.config.geometry)
    }

    /// Number of integration substeps used for one interval of length `dt`.
    pub fn substeps(&self, dt: f64) -> usize {
        (dt / self.config.dt_sim).ceil().max(1.0) as usize
    }

    /// Advances the plant by `dt_control` seconds with heater powers held
    /// constant. Draws one zone disturbance per call when enabled.
    pub fn step(&mut self, state: &ThermalState, powers: &[f64], dt_control: f64) -> Result<ThermalState> {
        let nz = self.config.geometry.n_heaters();
        let loads = if self.config.disturbance_std > 0.0 {
            let normal = Normal::new(0.0, self.config.disturbance_std)
                .map_err(|e| Error::Config(e.to_string()))?;
            (0..nz).map(|_| normal.sample(&mut self.rng)).collect()
        } else {
            vec![0.0; nz]
        };
        self.step_with_loads(state, powers, &loads, dt_control)
    }

    /// As [`Simulator::step`] with an explicit per-zone heat load [W].
    pub fn step_with_loads(
        &self,
        state: &ThermalState,
        powers: &[f64],
        zone_loads: &[f64],
        dt_control: f64,
    ) -> Result<ThermalState> {
        let cfg = &self.config;
        let geom = &cfg.geometry;
        check_dims(state, geom)?;
        if powers.len() != geom.n_heaters() || zone_loads.len() != geom.n_heaters() {
            return Err(Error::Dimension(format!(
                "expected {} powers and zone loads",
                geom.n_heaters()
            )));
        }
        if !(dt_control > 0.0) {
            return Err(Error::Input(format!("dt_control must be positive, got {dt_control}")));
        }
        check_powers(powers, cfg.heater.p_max)?;

        let n = self.substeps(dt_control);
        let dt = dt_control / n as f64;
        let (nx, ny, nh) = (geom.nx, geom.ny, geom.n_heaters());
        let cap = cfg.element_heat_capacity();
        let rad_scale = geom.heater_area() * cfg.material.eps_e * cfg.env.sigma * cfg.material.absorptivity;
        let conv = (cfg.material.h_top + cfg.material.h_bot) * geom.element_area();
        let gx = cfg.material.k * geom.dy() * geom.dz / geom.dx();
        let gy = cfg.material.k * geom.dx() * geom.dz / geom.dy();
        let per_zone = ((nx / geom.heater_rows) * (ny / geom.heater_cols)) as f64;
        let element_load: Vec<f64> = (0..nx * ny)
            .map(|i| zone_loads[geom.zone_of(i / ny, i % ny)] / per_zone)
            .collect();
        let area = geom.heater_area();

        let rates = Rates {
            sim: self,
            powers,
            element_load: &element_load,
            cap,
            rad_scale,
            conv,
            gx,
            gy,
            area,
        };

        // Heun's method on the joint heater/sheet state: an Euler predictor
        // followed by the trapezoidal corrector.
        let mut theta = state.heater_t.clone();
        let mut t = state.sheet_t.clone();
        let (mut k1_th, mut k1_t) = (vec![0.0; nh], vec![0.0; t.len()]);
        let (mut k2_th, mut k2_t) = (vec![0.0; nh], vec![0.0; t.len()]);
        let (mut pred_th, mut pred_t) = (vec![0.0; nh], vec![0.0; t.len()]);
        let mut theta4 = vec![0.0; nh];
        for _ in 0..n {
            rates.eval(&theta, &t, &mut theta4, &mut k1_th, &mut k1_t);
            for i in 0..nh {
                pred_th[i] = theta[i] + dt * k1_th[i];
            }
            for i in 0..t.len() {
                pred_t[i] = t[i] + dt * k1_t[i];
            }
            rates.eval(&pred_th, &pred_t, &mut theta4, &mut k2_th, &mut k2_t);
            for i in 0..nh {
                theta[i] += 0.5 * dt * (k1_th[i] + k2_th[i]);
            }
            for i in 0..t.len() {
                t[i] += 0.5 * dt * (k1_t[i] + k2_t[i]);
            }
        }
        let out = ThermalState {
            sheet_t: t,
            heater_t: theta,
            time: state.time + dt_control,
        };
        if !out.is_finite() {
            return Err(Error::Divergence { time: out.time });
        }
        Ok(out)
    }
}

/// Right-hand side of the plant ODE for one fixed input.
struct Rates<'a> {
    sim: &'a Simulator,
    powers: &'a [f64],
    element_load: &'a [f64],
    cap: f64,
    rad_scale: f64,
    conv: f64,
    gx: f64,
    gy: f64,
    area: f64,
}

impl Rates<'_> {
    /// Writes dθ/dt into `d_theta` and dT/dt into `d_t`; `theta4` is
    /// scratch space.
    fn eval(&self, theta: &[f64], t: &[f64], theta4: &mut [f64], d_theta: &mut [f64], d_t: &mut [f64]) {
        let cfg = &self.sim.config;
        let physics = self.sim.physics;
        let (nx, ny, nh) = (cfg.geometry.nx, cfg.geometry.ny, theta.len());
        for ((d, &th), &p) in d_theta.iter_mut().zip(theta).zip(self.powers) {
            *d = heater_rate(th, p, &cfg.heater, self.area, &cfg.env);
        }
        for (q, th) in theta4.iter_mut().zip(theta) {
            *q = th.powi(4);
        }
        for ix in 0..nx {
            for iy in 0..ny {
                let i = ix * ny + iy;
                let ti = t[i];
                let mut du = self.element_load[i];
                if physics.radiation {
                    let g = &self.sim.gain[i * nh..(i + 1) * nh];
                    let incoming: f64 = g.iter().zip(theta4.iter()).map(|(a, b)| a * b).sum();
                    du += self.rad_scale * (incoming - self.sim.gain_sum[i] * ti.powi(4));
                }
                if physics.convection {
                    du += self.conv * (cfg.env.t_amb - ti);
                }
                if physics.conduction {
                    if ix > 0 {
                        du += self.gx * (t[i - ny] - ti);
                    }
                    if ix + 1 < nx {
                        du += self.gx * (t[i + ny] - ti);
                    }
                    if iy > 0 {
                        du += self.gy * (t[i - 1] - ti);
                    }
                    if iy + 1 < ny {
                        du += self.gy * (t[i + 1] - ti);
                    }
                }
                d_t[i] = du / self.cap;
            }
        }
    }
}
