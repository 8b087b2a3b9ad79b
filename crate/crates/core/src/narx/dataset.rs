use crate::error::{Error, Result};

/// Sampled input/output record of one open-loop experiment.
///
/// `u[t]` holds heater powers [W] applied over `[t, t+1)`, `y[t]` the zone
/// temperatures [°C] sampled at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub sample_time: f64,
    pub u: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

/// Fraction of samples used for training; the rest is held out.
pub const TRAIN_FRACTION: f64 = 0.75;

impl Dataset {
    pub fn new(sample_time: f64, u: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> Result<Self> {
        if !(sample_time > 0.0) {
            return Err(Error::Config(format!("sample time must be positive, got {sample_time}")));
        }
        if u.len() != y.len() {
            return Err(Error::Dimension(format!("{} input rows but {} output rows", u.len(), y.len())));
        }
        if let (Some(u0), Some(y0)) = (u.first(), y.first()) {
            if u.iter().any(|r| r.len() != u0.len()) || y.iter().any(|r| r.len() != y0.len()) {
                return Err(Error::Dimension("ragged dataset rows".into()));
            }
        }
        Ok(Self { sample_time, u, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.u.first().map_or(0, Vec::len)
    }

    pub fn n_outputs(&self) -> usize {
        self.y.first().map_or(0, Vec::len)
    }

    /// First sample of the held-out split.
    pub fn split_index(&self) -> usize {
        (self.len() as f64 * TRAIN_FRACTION).floor() as usize
    }

    pub fn train_range(&self) -> std::ops::Range<usize> {
        0..self.split_index()
    }

    pub fn test_range(&self) -> std::ops::Range<usize> {
        self.split_index()..self.len()
    }

    /// Column `c` of the output record over `range`.
    pub fn output_series(&self, c: usize, range: std::ops::Range<usize>) -> Vec<f64> {
        self.y[range].iter().map(|r| r[c]).collect()
    }

    pub fn input_series(&self, c: usize, range: std::ops::Range<usize>) -> Vec<f64> {
        self.u[range].iter().map(|r| r[c]).collect()
    }
}
