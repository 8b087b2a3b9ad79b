use crate::error::{Error, Result};

/// Lag structure shared by every output channel.
///
/// The regressor at time `t` is laid out as
/// `[y_{t-1}, …, y_{t-n}, u_{t-1}, …, u_{t-m}]`, each lag block holding all
/// channels in index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegressorLayout {
    /// Output lags.
    pub n: usize,
    /// Input lags.
    pub m: usize,
    /// Output channels.
    pub z: usize,
    /// Input channels.
    pub h: usize,
}

impl Default for RegressorLayout {
    fn default() -> Self {
        Self { n: 2, m: 2, z: 15, h: 15 }
    }
}

impl RegressorLayout {
    pub fn new(n: usize, m: usize, z: usize, h: usize) -> Result<Self> {
        let layout = Self { n, m, z, h };
        layout.validate()?;
        Ok(layout)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 || self.z == 0 || self.h == 0 {
            return Err(Error::Config(format!("invalid regressor layout {self:?}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.z * self.n + self.h * self.m
    }

    /// Samples of history required before the first regressor.
    pub fn max_lag(&self) -> usize {
        self.n.max(self.m)
    }

    /// Offset of `y_{t-lag}` channel `c` in the regressor (`lag` ≥ 1).
    pub fn y_index(&self, lag: usize, c: usize) -> usize {
        (lag - 1) * self.z + c
    }

    /// Offset of `u_{t-lag}` channel `c` in the regressor (`lag` ≥ 1).
    pub fn u_index(&self, lag: usize, c: usize) -> usize {
        self.z * self.n + (lag - 1) * self.h + c
    }

    /// Builds `X_t` from row-per-sample histories (`y[s]`, `u[s]` are the
    /// vectors at sample `s`).
    pub fn build_regressor<Y, U>(&self, y: &[Y], u: &[U], t: usize) -> Result<Vec<f64>>
    where
        Y: AsRef<[f64]>,
        U: AsRef<[f64]>,
    {
        if t < self.max_lag() || t > y.len() || t > u.len() {
            return Err(Error::History {
                needed: self.max_lag(),
                available: t.min(y.len()).min(u.len()),
            });
        }
        let mut x = Vec::with_capacity(self.dim());
        for lag in 1..=self.n {
            let row = y[t - lag].as_ref();
            if row.len() != self.z {
                return Err(Error::Dimension(format!("output row has {} channels, expected {}", row.len(), self.z)));
            }
            x.extend_from_slice(row);
        }
        for lag in 1..=self.m {
            let row = u[t - lag].as_ref();
            if row.len() != self.h {
                return Err(Error::Dimension(format!("input row has {} channels, expected {}", row.len(), self.h)));
            }
            x.extend_from_slice(row);
        }
        Ok(x)
    }

    /// The regressor one step later: shifts every lag block and inserts
    /// `y_t`, `u_t` in the first slots.
    pub fn shift(&self, x: &[f64], y_t: &[f64], u_t: &[f64]) -> Vec<f64> {
        let mut next = vec![0.0; self.dim()];
        next[..self.z].copy_from_slice(y_t);
        next[self.z..self.z * self.n].copy_from_slice(&x[..self.z * (self.n - 1)]);
        let u0 = self.z * self.n;
        next[u0..u0 + self.h].copy_from_slice(u_t);
        next[u0 + self.h..].copy_from_slice(&x[u0..u0 + self.h * (self.m - 1)]);
        next
    }
}
