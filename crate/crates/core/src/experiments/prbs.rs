//! Staircase pseudo-random binary excitation.
//!
//! Each heater toggles between the lower and upper bound of the current
//! segment. The bounds climb in `amplitude_step` increments to `max_level`
//! and then descend the same way, so a full schedule visits every band
//! twice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PrbsSchedule {
    /// Duration of one bound segment [s].
    pub segment_duration: f64,
    /// Width of each band and step between consecutive bands [W].
    pub amplitude_step: f64,
    /// Highest upper bound [W].
    pub max_level: f64,
    /// Clock period of the binary sequence [s].
    pub switching_period: f64,
    pub sample_time: f64,
    pub seed: u64,
}

impl Default for PrbsSchedule {
    fn default() -> Self {
        Self {
            segment_duration: 12_000.0,
            amplitude_step: 100.0,
            max_level: 500.0,
            switching_period: 300.0,
            sample_time: 6.0,
            seed: 1,
        }
    }
}

impl PrbsSchedule {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("segment_duration", self.segment_duration),
            ("amplitude_step", self.amplitude_step),
            ("max_level", self.max_level),
            ("switching_period", self.switching_period),
            ("sample_time", self.sample_time),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        let bands = self.max_level / self.amplitude_step;
        if (bands - bands.round()).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "amplitude_step {} does not divide max_level {}",
                self.amplitude_step, self.max_level
            )));
        }
        if self.switching_period < self.sample_time {
            return Err(Error::Config("switching_period must be at least one sample".into()));
        }
        Ok(())
    }

    pub fn n_bands(&self) -> usize {
        (self.max_level / self.amplitude_step).round() as usize
    }

    /// Samples per segment.
    pub fn segment_samples(&self) -> usize {
        (self.segment_duration / self.sample_time).round() as usize
    }

    /// Up then down: `2 · n_bands` segments.
    pub fn n_segments(&self) -> usize {
        2 * self.n_bands()
    }

    pub fn len(&self) -> usize {
        self.n_segments() * self.segment_samples()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(lower, upper)` bound of segment `s`.
    pub fn segment_bounds(&self, s: usize) -> (f64, f64) {
        let nb = self.n_bands();
        let band = if s < nb { s } else { 2 * nb - 1 - s };
        let lo = band as f64 * self.amplitude_step;
        (lo, lo + self.amplitude_step)
    }
}

/// Input trajectory with one row per sample and one column per heater.
pub fn generate_prbs(schedule: &PrbsSchedule, heaters: usize) -> Result<Vec<Vec<f64>>> {
    schedule.validate()?;
    let len = schedule.len();
    let seg = schedule.segment_samples();
    let clock = (schedule.switching_period / schedule.sample_time).round().max(1.0) as usize;
    let mut out = vec![vec![0.0; heaters]; len];
    for h in 0..heaters {
        // Independent stream per heater from the one seed.
        let mut rng = ChaCha20Rng::seed_from_u64(schedule.seed);
        rng.set_stream(h as u64 + 1);
        let phase = rng.gen_range(0..clock);
        let mut high = rng.gen::<bool>();
        for (t, row) in out.iter_mut().enumerate() {
            if t >= phase && (t - phase) % clock == 0 {
                high = rng.gen();
            }
            let (lo, hi) = schedule.segment_bounds(t / seg);
            row[h] = if high { hi } else { lo };
        }
    }
    Ok(out)
}
