//! Strict `key = value` configuration files.
//!
//! A flat file configures one type; a pipeline file groups several under
//! `[plant]`, `[mpc]`, `[prbs]`, `[fit]`, `[sweep]` and `[run]` headers.
//! `#` starts a comment. Unknown keys, unknown sections, repeated keys and
//! malformed values are errors that name the file, line and key. Missing
//! keys keep their defaults.
//!
//! ```
//! use thermoform::io::{parse_config, render_config};
//! use thermoform::thermal::PlantConfig;
//!
//! let cfg: PlantConfig = parse_config("gap_d = 0.2  # metres\nNx = 60\n", "plant.conf").unwrap();
//! assert_eq!(cfg.geometry.gap_d, 0.2);
//! assert_eq!(cfg.geometry.nx, 60);
//! assert_eq!(cfg.material.rho, 1380.0);
//!
//! let again: PlantConfig = parse_config(&render_config(&cfg), "again.conf").unwrap();
//! assert_eq!(again, cfg);
//! ```

use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiments::{ClosedLoopOptions, PrbsSchedule, SweepGrid};
use crate::mpc::MpcConfig;
use crate::narx::FitConfig;
use crate::thermal::PlantConfig;

/// A value that can be read from and written to one config line.
pub trait ConfigValue {
    fn parse_from(&mut self, text: &str) -> std::result::Result<(), String>;
    fn render(&self) -> String;
}

fn parse_scalar<T: std::str::FromStr>(text: &str, what: &str) -> std::result::Result<T, String> {
    text.parse().map_err(|_| format!("expected {what}, got `{text}`"))
}

impl ConfigValue for f64 {
    fn parse_from(&mut self, text: &str) -> std::result::Result<(), String> {
        *self = parse_scalar(text, "a number")?;
        Ok(())
    }
    fn render(&self) -> String {
        // shortest representation that reads back bit-exactly
        format!("{self:?}")
    }
}

impl ConfigValue for usize {
    fn parse_from(&mut self, text: &str) -> std::result::Result<(), String> {
        *self = parse_scalar(text, "a non-negative integer")?;
        Ok(())
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for u64 {
    fn parse_from(&mut self, text: &str) -> std::result::Result<(), String> {
        *self = parse_scalar(text, "a non-negative integer")?;
        Ok(())
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

impl ConfigValue for bool {
    fn parse_from(&mut self, text: &str) -> std::result::Result<(), String> {
        *self = parse_scalar(text, "`true` or `false`")?;
        Ok(())
    }
    fn render(&self) -> String {
        self.to_string()
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> std::result::Result<Vec<T>, String> {
    if text.is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(|v| parse_scalar(v.trim(), what)).collect()
}

fn render_list<T: ConfigValue>(values: &[T]) -> String {
    values.iter().map(ConfigValue::render).collect::<Vec<_>>().join(", ")
}

impl ConfigValue for Vec<f64> {
    fn parse_from(&mut self, text: &str) -> std::result::Result<(), String> {
        *self = parse_list(text, "a comma-separated list of numbers")?;
        Ok(())
    }
    fn render(&self) -> String {
        render_list(self)
    }
}

impl ConfigValue for Vec<usize> {
    fn parse_from(&mut self, text: &str) -> std::result::Result<(), String> {
        *self = parse_list(text, "a comma-separated list of integers")?;
        Ok(())
    }
    fn render(&self) -> String {
        render_list(self)
    }
}

impl ConfigValue for (f64, f64, f64) {
    fn parse_from(&mut self, text: &str) -> std::result::Result<(), String> {
        match parse_list::<f64>(text, "three comma-separated numbers")?[..] {
            [a, b, c] => {
                *self = (a, b, c);
                Ok(())
            }
            _ => Err(format!("expected three comma-separated numbers, got `{text}`")),
        }
    }
    fn render(&self) -> String {
        render_list(&[self.0, self.1, self.2])
    }
}

/// A configuration type with a fixed set of named keys.
pub trait KeyValueConfig: Default {
    /// Every key with a handle on its field, in file order.
    fn fields(&mut self) -> Vec<(&'static str, &mut dyn ConfigValue)>;

    fn check(&self) -> Result<()> {
        Ok(())
    }
}

impl KeyValueConfig for PlantConfig {
    fn fields(&mut self) -> Vec<(&'static str, &mut dyn ConfigValue)> {
        let m = &mut self.material;
        let g = &mut self.geometry;
        let h = &mut self.heater;
        vec![
            ("rho", &mut m.rho),
            ("cp", &mut m.cp),
            ("k", &mut m.k),
            ("eps_e", &mut m.eps_e),
            ("absorptivity", &mut m.absorptivity),
            ("h_top", &mut m.h_top),
            ("h_bot", &mut m.h_bot),
            ("Lx", &mut g.lx),
            ("Ly", &mut g.ly),
            ("dz", &mut g.dz),
            ("Nx", &mut g.nx),
            ("Ny", &mut g.ny),
            ("gap_d", &mut g.gap_d),
            ("heater_rows", &mut g.heater_rows),
            ("heater_cols", &mut g.heater_cols),
            ("heater_w", &mut g.heater_w),
            ("heater_h", &mut g.heater_h),
            ("heat_capacity", &mut h.heat_capacity),
            ("loss_coeff", &mut h.loss_coeff),
            ("eps_h", &mut h.eps_h),
            ("P_max", &mut h.p_max),
            ("T_amb", &mut self.env.t_amb),
            ("sigma", &mut self.env.sigma),
            ("dt_sim", &mut self.dt_sim),
            ("disturbance_std", &mut self.disturbance_std),
        ]
    }

    fn check(&self) -> Result<()> {
        self.validate()
    }
}

impl KeyValueConfig for MpcConfig {
    fn fields(&mut self) -> Vec<(&'static str, &mut dyn ConfigValue)> {
        vec![
            ("Np", &mut self.np),
            ("Nc", &mut self.nc),
            ("alpha", &mut self.alpha),
            ("beta", &mut self.beta),
            ("u_min", &mut self.u_min),
            ("u_max", &mut self.u_max),
            ("T_over", &mut self.t_over),
            ("slack_weight", &mut self.slack_weight),
            ("shared_slack", &mut self.shared_slack),
            ("disturbance_gain", &mut self.disturbance_gain),
            ("qp_tol", &mut self.qp_tol),
            ("qp_max_iter", &mut self.qp_max_iter),
        ]
    }

    fn check(&self) -> Result<()> {
        self.validate()
    }
}

impl KeyValueConfig for PrbsSchedule {
    fn fields(&mut self) -> Vec<(&'static str, &mut dyn ConfigValue)> {
        vec![
            ("segment_duration", &mut self.segment_duration),
            ("amplitude_step", &mut self.amplitude_step),
            ("max_level", &mut self.max_level),
            ("switching_period", &mut self.switching_period),
            ("sample_time", &mut self.sample_time),
            ("seed", &mut self.seed),
        ]
    }

    fn check(&self) -> Result<()> {
        self.validate()
    }
}

impl KeyValueConfig for FitConfig {
    fn fields(&mut self) -> Vec<(&'static str, &mut dyn ConfigValue)> {
        vec![
            ("max_projection", &mut self.max_projection),
            ("variance_fraction", &mut self.variance_fraction),
            ("levels", &mut self.levels),
            ("base_cell", &mut self.base_cell),
            ("unit_counts", &mut self.unit_counts),
            ("min_occupancy", &mut self.min_occupancy),
            ("prune_tolerance", &mut self.prune_tolerance),
            ("holdout_fraction", &mut self.holdout_fraction),
            ("difference_lags", &mut self.difference_lags),
        ]
    }
}

impl KeyValueConfig for SweepGrid {
    fn fields(&mut self) -> Vec<(&'static str, &mut dyn ConfigValue)> {
        vec![
            ("h", &mut self.h),
            ("d", &mut self.d),
            ("absorptivity", &mut self.absorptivity),
            ("nominal", &mut self.nominal),
            ("full", &mut self.full),
        ]
    }

    fn check(&self) -> Result<()> {
        self.validate()
    }
}

impl KeyValueConfig for ClosedLoopOptions {
    fn fields(&mut self) -> Vec<(&'static str, &mut dyn ConfigValue)> {
        vec![
            ("duration", &mut self.duration),
            ("sample_time", &mut self.sample_time),
            ("seed", &mut self.seed),
        ]
    }
}

/// One meaningful line: 1-based line number, key and raw value.
#[derive(Debug, Clone)]
struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: &'a str,
}

fn parse_error(path: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        message: message.into(),
    }
}

/// Applies `entries` on top of the defaults of `T`, then validates.
fn apply<T: KeyValueConfig>(entries: &[Entry], path: &str) -> Result<T> {
    let mut cfg = T::default();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    {
        let mut fields = cfg.fields();
        for e in entries {
            if let Some(first) = seen.insert(e.key, e.line) {
                return Err(parse_error(path, e.line, format!("key `{}` repeated (first set on line {first})", e.key)));
            }
            let Some((_, field)) = fields.iter_mut().find(|(k, _)| *k == e.key) else {
                return Err(parse_error(path, e.line, format!("unknown key `{}`", e.key)));
            };
            field
                .parse_from(e.value)
                .map_err(|msg| parse_error(path, e.line, format!("key `{}`: {msg}", e.key)))?;
        }
    }
    cfg.check().map_err(|err| {
        // Validation messages lead with the offending key; point at its line
        // when the file set it.
        let msg = err.to_string();
        let detail = msg.strip_prefix("invalid configuration: ").unwrap_or(&msg);
        let lead: String = detail.chars().take_while(|c| c.is_alphanumeric() || *c == '_').collect();
        match seen.get(lead.as_str()) {
            Some(&line) => parse_error(path, line, detail),
            None => parse_error(path, 0, detail),
        }
    })?;
    Ok(cfg)
}

/// Splits `text` into entries, each tagged with the section it falls under
/// (`""` before the first header).
fn tokenize<'a>(text: &'a str, path: &str) -> Result<Vec<(&'a str, Entry<'a>)>> {
    let mut section = "";
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| parse_error(path, line, format!("malformed section header `{content}`")))?;
            section = name.trim();
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_error(path, line, format!("expected `key = value`, got `{content}`")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(parse_error(path, line, "missing key before `=`"));
        }
        out.push((
            section,
            Entry {
                line,
                key,
                value: value.trim(),
            },
        ));
    }
    Ok(out)
}

/// Parses a flat config file for one type. `path` only labels errors.
pub fn parse_config<T: KeyValueConfig>(text: &str, path: &str) -> Result<T> {
    let tokens = tokenize(text, path)?;
    if let Some((section, e)) = tokens.iter().find(|(s, _)| !s.is_empty()) {
        return Err(parse_error(path, e.line, format!("section `[{section}]` in a single-type config")));
    }
    let entries: Vec<Entry> = tokens.into_iter().map(|(_, e)| e).collect();
    apply(&entries, path)
}

pub fn load_config<T: KeyValueConfig>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text, &path.display().to_string())
}

/// Writes every key of `cfg`, one per line.
pub fn render_config<T: KeyValueConfig + Clone>(cfg: &T) -> String {
    let mut copy = cfg.clone();
    copy.fields()
        .into_iter()
        .map(|(key, value)| format!("{key} = {}\n", value.render()))
        .collect()
}

/// Everything the command-line pipeline needs, one section per stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PipelineConfig {
    pub plant: PlantConfig,
    pub mpc: MpcConfig,
    pub prbs: PrbsSchedule,
    pub fit: FitConfig,
    pub sweep: SweepGrid,
    pub run: ClosedLoopOptions,
}

const SECTIONS: [&str; 6] = ["plant", "mpc", "prbs", "fit", "sweep", "run"];

impl PipelineConfig {
    /// Parses a sectioned file; absent sections keep their defaults.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let tokens = tokenize(text, path)?;
        if let Some((_, e)) = tokens.iter().find(|(s, _)| s.is_empty()) {
            return Err(parse_error(path, e.line, format!("key `{}` outside any section", e.key)));
        }
        if let Some((s, e)) = tokens.iter().find(|(s, _)| !SECTIONS.contains(s)) {
            return Err(parse_error(
                path,
                e.line,
                format!("unknown section `[{s}]` (expected one of {})", SECTIONS.join(", ")),
            ));
        }
        let section = |name: &str| -> Vec<Entry> {
            tokens.iter().filter(|(s, _)| *s == name).map(|(_, e)| e.clone()).collect()
        };
        Ok(Self {
            plant: apply(&section("plant"), path)?,
            mpc: apply(&section("mpc"), path)?,
            prbs: apply(&section("prbs"), path)?,
            fit: apply(&section("fit"), path)?,
            sweep: apply(&section("sweep"), path)?,
            run: apply(&section("run"), path)?,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Full listing of every key; parses back to an equal config.
    pub fn render(&self) -> String {
        [
            ("plant", render_config(&self.plant)),
            ("mpc", render_config(&self.mpc)),
            ("prbs", render_config(&self.prbs)),
            ("fit", render_config(&self.fit)),
            ("sweep", render_config(&self.sweep)),
            ("run", render_config(&self.run)),
        ]
        .iter()
        .map(|(name, body)| format!("[{name}]\n{body}"))
        .collect::<Vec<_>>()
        .join("\n")
    }
}
