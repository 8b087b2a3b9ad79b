//! Wavelet-network output functions.
//!
//! A channel maps a normalized regressor `z` to
//!
//! ```text
//! y = zᵀ·linear + Σ_w weight·ψ(dilation·(Pᵀz − translation))
//!               + Σ_s weight·φ(dilation·(Pᵀz − translation)) + offset
//! ```
//!
//! with the radial Mexican hat `ψ(r) = (p − ‖r‖²)·exp(−‖r‖²/2)` and the
//! Gaussian scaling function `φ(r) = exp(−‖r‖²/2)`, `p` being the projected
//! dimension.

use nalgebra::{DMatrix, DVector};

use super::layout::RegressorLayout;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitKind {
    Wavelet,
    Scaling,
}

/// A dilated and translated radial function.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    pub dilation: f64,
    pub translation: Vec<f64>,
    pub weight: f64,
}

impl Unit {
    /// Unweighted activation at projected point `s`.
    pub fn activation(&self, kind: UnitKind, s: &[f64]) -> f64 {
        let r2 = self.radius2(s);
        let g = (-0.5 * r2).exp();
        match kind {
            UnitKind::Scaling => g,
            UnitKind::Wavelet => (s.len() as f64 - r2) * g,
        }
    }

    fn radius2(&self, s: &[f64]) -> f64 {
        s.iter()
            .zip(&self.translation)
            .map(|(a, b)| {
                let r = self.dilation * (a - b);
                r * r
            })
            .sum()
    }

    /// Adds `weight · ∂activation/∂s` to `grad`.
    fn accumulate_gradient(&self, kind: UnitKind, s: &[f64], grad: &mut [f64]) {
        let r2 = self.radius2(s);
        let g = (-0.5 * r2).exp();
        // dφ/dr = −r·φ ; dψ/dr = −r·g·(2 + p − ‖r‖²); dr/ds = dilation
        let factor = match kind {
            UnitKind::Scaling => -g,
            UnitKind::Wavelet => -g * (2.0 + s.len() as f64 - r2),
        };
        let c = self.weight * factor * self.dilation * self.dilation;
        for ((gk, a), b) in grad.iter_mut().zip(s).zip(&self.translation) {
            *gk += c * (a - b);
        }
    }
}

/// Single-output wavelet network over the normalized regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletChannel {
    /// Coefficients of the linear term, one per regressor entry.
    pub linear: Vec<f64>,
    /// Projection onto the nonlinear subspace (regressor dim × p).
    pub projection: DMatrix<f64>,
    pub offset: f64,
    pub wavelets: Vec<Unit>,
    pub scalings: Vec<Unit>,
}

impl WaveletChannel {
    /// A purely affine channel.
    pub fn affine(linear: Vec<f64>, offset: f64) -> Self {
        let dim = linear.len();
        Self {
            linear,
            projection: DMatrix::zeros(dim, 0),
            offset,
            wavelets: Vec::new(),
            scalings: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn projected_dim(&self) -> usize {
        self.projection.ncols()
    }

    pub fn n_units(&self) -> usize {
        self.wavelets.len() + self.scalings.len()
    }

    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        let p = self.projected_dim();
        let mut s = vec![0.0; p];
        for (k, sk) in s.iter_mut().enumerate() {
            let col = self.projection.column(k);
            *sk = col.iter().zip(z).map(|(a, b)| a * b).sum();
        }
        s
    }

    /// Output for a normalized regressor.
    pub fn eval(&self, z: &[f64]) -> f64 {
        let mut y = self.offset + self.linear.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        if self.n_units() > 0 {
            let s = self.project(z);
            y += self.wavelets.iter().map(|u| u.weight * u.activation(UnitKind::Wavelet, &s)).sum::<f64>();
            y += self.scalings.iter().map(|u| u.weight * u.activation(UnitKind::Scaling, &s)).sum::<f64>();
        }
        y
    }

    /// Gradient of [`WaveletChannel::eval`] with respect to `z`.
    pub fn gradient(&self, z: &[f64]) -> Vec<f64> {
        let mut grad = self.linear.clone();
        if self.n_units() > 0 {
            let s = self.project(z);
            let mut gs = vec![0.0; s.len()];
            for u in &self.wavelets {
                u.accumulate_gradient(UnitKind::Wavelet, &s, &mut gs);
            }
            for u in &self.scalings {
                u.accumulate_gradient(UnitKind::Scaling, &s, &mut gs);
            }
            let back = &self.projection * DVector::from_vec(gs);
            for (g, b) in grad.iter_mut().zip(back.iter()) {
                *g += b;
            }
        }
        grad
    }
}

/// Affine map between raw and normalized regressors: `z = (x − mean) / scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Normalization {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

/// Multi-output NARX model: one wavelet channel per output over a shared
/// regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct NarxModel {
    pub layout: RegressorLayout,
    pub normalization: Normalization,
    pub channels: Vec<WaveletChannel>,
}

impl NarxModel {
    pub fn new(layout: RegressorLayout, normalization: Normalization, channels: Vec<WaveletChannel>) -> Result<Self> {
        let model = Self {
            layout,
            normalization,
            channels,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        let dim = self.layout.dim();
        if self.channels.len() != self.layout.z {
            return Err(Error::Dimension(format!(
                "{} channels for {} outputs",
                self.channels.len(),
                self.layout.z
            )));
        }
        if self.normalization.mean.len() != dim || self.normalization.scale.len() != dim {
            return Err(Error::Dimension("normalization length differs from regressor".into()));
        }
        if self.normalization.scale.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("normalization scales must be positive".into()));
        }
        for (c, ch) in self.channels.iter().enumerate() {
            if ch.dim() != dim || ch.projection.nrows() != dim {
                return Err(Error::Dimension(format!("channel {c} has wrong regressor dimension")));
            }
            let p = ch.projected_dim();
            if p > dim {
                return Err(Error::Dimension(format!("channel {c} projects to {p} > {dim}")));
            }
            for u in ch.wavelets.iter().chain(&ch.scalings) {
                if !(u.dilation > 0.0) || u.translation.len() != p {
                    return Err(Error::Config(format!("channel {c} has an invalid unit")));
                }
            }
        }
        Ok(())
    }

    /// Evaluates one output channel at a raw regressor.
    pub fn eval_channel(&self, channel: usize, x: &[f64]) -> f64 {
        self.channels[channel].eval(&self.normalization.apply(x))
    }

    /// All outputs at a raw regressor.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let z = self.normalization.apply(x);
        self.channels.iter().map(|ch| ch.eval(&z)).collect()
    }

    /// Jacobian `∂y/∂x` at a raw regressor (outputs × regressor dim).
    pub fn jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        let z = self.normalization.apply(x);
        let dim = self.layout.dim();
        let mut jac = DMatrix::zeros(self.layout.z, dim);
        for (c, ch) in self.channels.iter().enumerate() {
            let g = ch.gradient(&z);
            for j in 0..dim {
                jac[(c, j)] = g[j] / self.normalization.scale[j];
            }
        }
        jac
    }
}
