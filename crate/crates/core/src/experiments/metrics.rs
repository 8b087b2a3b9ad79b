use crate::error::{Error, Result};

/// Band half-width used for settling [°C].
pub const SETTLING_BAND: f64 = 10.0;
/// Final-error bound for the per-zone terminal check [°C].
pub const TERMINAL_BOUND: f64 = 5.0;

/// Tracking summary of one closed-loop run.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// Mean over zones of |y − r| at the final sample [°C].
    pub avg_final_error: f64,
    /// Largest |y − r| over zones at the final sample [°C].
    pub max_final_error: f64,
    /// Largest excursion above the reference over all zones and samples
    /// [°C]; never negative.
    pub max_overshoot: f64,
    /// Earliest time after which every zone stays inside the band, or
    /// `None` if the run ends outside it.
    pub settling_time: Option<f64>,
    /// Per zone: final error below [`TERMINAL_BOUND`].
    pub terminal_pass: Vec<bool>,
}

impl Metrics {
    pub fn terminal_pass_count(&self) -> usize {
        self.terminal_pass.iter().filter(|p| **p).count()
    }
}

/// Metrics of a trajectory sampled at `times`, one row of zone
/// temperatures per sample, against constant per-zone references.
pub fn compute_metrics(times: &[f64], y: &[Vec<f64>], reference: &[f64], band: f64) -> Result<Metrics> {
    if y.is_empty() {
        return Err(Error::Input("empty trajectory".into()));
    }
    if times.len() != y.len() {
        return Err(Error::Dimension(format!("{} times for {} samples", times.len(), y.len())));
    }
    if let Some(row) = y.iter().find(|row| row.len() != reference.len()) {
        return Err(Error::Dimension(format!(
            "sample has {} zones, reference has {}",
            row.len(),
            reference.len()
        )));
    }

    let max_overshoot = y
        .iter()
        .flat_map(|row| row.iter().zip(reference).map(|(v, r)| v - r))
        .fold(0.0f64, f64::max);

    let inside = |row: &Vec<f64>| row.iter().zip(reference).all(|(v, r)| (v - r).abs() <= band);
    let settling_time = match y.iter().rposition(|row| !inside(row)) {
        None => Some(times[0]),
        Some(last_out) if last_out + 1 < y.len() => Some(times[last_out + 1]),
        Some(_) => None,
    };

    let last = y.last().expect("non-empty");
    let errors: Vec<f64> = last.iter().zip(reference).map(|(v, r)| (v - r).abs()).collect();
    Ok(Metrics {
        avg_final_error: errors.iter().sum::<f64>() / errors.len() as f64,
        max_final_error: errors.iter().copied().fold(0.0, f64::max),
        max_overshoot,
        settling_time,
        terminal_pass: errors.iter().map(|e| *e < TERMINAL_BOUND).collect(),
    })
}
