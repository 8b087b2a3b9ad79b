//! Stacked prediction matrices of a linearized plant.
//!
//! Over a horizon of `Np` outputs and `Nc` free input moves (held
//! afterwards),
//!
//! ```text
//! ŷ = 1⊗y_op + Φ·ΔX₀ + Ψ·c + Γ·δu
//! ```
//!
//! where block row `i` (1-based) of `Φ` is `𝒞𝒜ⁱ`, block `(i, j)` of `Γ` is
//! `𝒞𝒜^{i−j}ℬ` for `i ≥ j` (with the last column accumulating every step the
//! input is held), and `Ψ` maps a constant per-step drift `c`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::narx::LinearizedPlant;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub np: usize,
    pub nc: usize,
    pub n_outputs: usize,
    pub n_inputs: usize,
    /// `(Np·z) × dim`.
    pub phi: DMatrix<f64>,
    /// `(Np·z) × (Nc·h)`.
    pub gamma: DMatrix<f64>,
    /// `(Np·z) × dim`, response to a drift entering at every step.
    pub psi: DMatrix<f64>,
}

pub fn build_prediction(plant: &LinearizedPlant, np: usize, nc: usize) -> Result<Prediction> {
    if np == 0 || nc == 0 || nc > np {
        return Err(Error::Config(format!("horizons need 1 ≤ Nc ≤ Np, got Np={np}, Nc={nc}")));
    }
    let z = plant.n_outputs();
    let h = plant.n_inputs();
    let dim = plant.state_dim();
    let c = &plant.fx;

    // markov[k] = 𝒞𝒜ᵏℬ and powers 𝒞𝒜ᵏ for k = 0..Np.
    let mut ca = c.clone();
    let mut ca_pow = Vec::with_capacity(np + 1);
    for _ in 0..=np {
        ca_pow.push(ca.clone());
        ca = &ca * &plant.a_cl;
    }
    let markov: Vec<DMatrix<f64>> = ca_pow.iter().take(np).map(|m| m * &plant.b_cl).collect();

    let mut phi = DMatrix::zeros(np * z, dim);
    let mut psi = DMatrix::zeros(np * z, dim);
    let mut gamma = DMatrix::zeros(np * z, nc * h);
    let mut psi_acc = DMatrix::zeros(z, dim);
    for i in 1..=np {
        let rows = (i - 1) * z;
        phi.view_mut((rows, 0), (z, dim)).copy_from(&ca_pow[i]);
        psi_acc += &ca_pow[i - 1];
        psi.view_mut((rows, 0), (z, dim)).copy_from(&psi_acc);
        for j in 1..=i {
            // move j−1 is applied at step j−1; held moves fold into the last column
            let col = (j.min(nc) - 1) * h;
            let mut block = gamma.view_mut((rows, col), (z, h));
            block += &markov[i - j];
        }
    }
    Ok(Prediction {
        np,
        nc,
        n_outputs: z,
        n_inputs: h,
        phi,
        gamma,
        psi,
    })
}

impl Prediction {
    /// Response with all input moves at zero: `1⊗y_op + Φ·ΔX₀ + Ψ·c`.
    pub fn free_response(&self, y_op: &DVector<f64>, dx0: &DVector<f64>, drift: Option<&DVector<f64>>) -> DVector<f64> {
        let mut f = &self.phi * dx0;
        if let Some(c) = drift {
            f += &self.psi * c;
        }
        for i in 0..self.np {
            let mut block = f.rows_mut(i * self.n_outputs, self.n_outputs);
            block += y_op;
        }
        f
    }

    /// Expands `Nc` moves to the full horizon of `Np` inputs.
    pub fn expand_moves(&self, du: &DVector<f64>) -> Vec<DVector<f64>> {
        (0..self.np)
            .map(|k| du.rows(k.min(self.nc - 1) * self.n_inputs, self.n_inputs).into_owned())
            .collect()
    }
}
