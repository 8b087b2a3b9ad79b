//! Local state-space form of a NARX model.
//!
//! With the regressor as state, `X_{t+1} = A·X_t + B₁·y_t + B₂·u_t` and
//! `y_t = F(X_t)`. Expanding `F` to first order around an operating point
//! gives `ΔX_{t+1} = (A + B₁F_X)·ΔX_t + B₂·Δu_t`, `Δy_t = F_X·ΔX_t`. The
//! regressor only carries lagged inputs, so `F_u = 0` and there is no direct
//! feedthrough.

use nalgebra::{DMatrix, DVector};

use super::layout::RegressorLayout;
use super::wavelet::NarxModel;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedPlant {
    pub layout: RegressorLayout,
    /// Lag-shift matrix.
    pub a: DMatrix<f64>,
    /// Inserts `y_t` into the first output-lag slot.
    pub b1: DMatrix<f64>,
    /// Inserts `u_t` into the first input-lag slot.
    pub b2: DMatrix<f64>,
    /// `F_X`, also the output matrix `C`.
    pub fx: DMatrix<f64>,
    /// `F_u`, identically zero; kept as the feedthrough matrix `D`.
    pub fu: DMatrix<f64>,
    /// `A + B₁·F_X`.
    pub a_cl: DMatrix<f64>,
    /// `B₁·F_u + B₂`.
    pub b_cl: DMatrix<f64>,
    pub x_op: DVector<f64>,
    pub u_op: DVector<f64>,
    pub y_op: DVector<f64>,
}

/// The data-independent selection matrices `(A, B₁, B₂)` of a layout.
pub fn shift_matrices(layout: &RegressorLayout) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let dim = layout.dim();
    let mut a = DMatrix::zeros(dim, dim);
    let mut b1 = DMatrix::zeros(dim, layout.z);
    let mut b2 = DMatrix::zeros(dim, layout.h);
    for c in 0..layout.z {
        b1[(layout.y_index(1, c), c)] = 1.0;
        for lag in 2..=layout.n {
            a[(layout.y_index(lag, c), layout.y_index(lag - 1, c))] = 1.0;
        }
    }
    for c in 0..layout.h {
        b2[(layout.u_index(1, c), c)] = 1.0;
        for lag in 2..=layout.m {
            a[(layout.u_index(lag, c), layout.u_index(lag - 1, c))] = 1.0;
        }
    }
    (a, b1, b2)
}

impl LinearizedPlant {
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b_cl.ncols()
    }

    pub fn n_outputs(&self) -> usize {
        self.fx.nrows()
    }

    /// Constant term of the affine expansion,
    /// `A·X_op + B₁·y_op + B₂·u_op − X_op`: how far the operating point is
    /// from being stationary. Zero at an equilibrium.
    pub fn drift(&self) -> DVector<f64> {
        &self.a * &self.x_op + &self.b1 * &self.y_op + &self.b2 * &self.u_op - &self.x_op
    }

    /// Simulates the deviation model from `dx0` under deviation inputs,
    /// returning `Δy_0 … Δy_{k}` for `k = du.len()`.
    pub fn simulate_deviation(&self, dx0: &DVector<f64>, du: &[DVector<f64>]) -> Vec<DVector<f64>> {
        let mut dx = dx0.clone();
        let mut out = Vec::with_capacity(du.len() + 1);
        out.push(&self.fx * &dx);
        for d in du {
            dx = &self.a_cl * &dx + &self.b_cl * d;
            out.push(&self.fx * &dx);
        }
        out
    }
}

/// Linearizes `model` around regressor `x_op` and input `u_op`.
pub fn linearize(model: &NarxModel, x_op: &[f64], u_op: &[f64]) -> Result<LinearizedPlant> {
    let layout = model.layout;
    if x_op.len() != layout.dim() || u_op.len() != layout.h {
        return Err(Error::Dimension(format!(
            "operating point has {} regressors / {} inputs, expected {} / {}",
            x_op.len(),
            u_op.len(),
            layout.dim(),
            layout.h
        )));
    }
    let (a, b1, b2) = shift_matrices(&layout);
    let fx = model.jacobian(x_op);
    let fu = DMatrix::zeros(layout.z, layout.h);
    let a_cl = &a + &b1 * &fx;
    let b_cl = &b1 * &fu + &b2;
    Ok(LinearizedPlant {
        layout,
        y_op: DVector::from_vec(model.eval(x_op)),
        x_op: DVector::from_column_slice(x_op),
        u_op: DVector::from_column_slice(u_op),
        a,
        b1,
        b2,
        fx,
        fu,
        a_cl,
        b_cl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narx::wavelet::{Normalization, Unit, WaveletChannel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_model(seed: u64) -> NarxModel {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layout = RegressorLayout::new(2, 2, 3, 2).unwrap();
        let dim = layout.dim();
        let p = 4;
        let proj = DMatrix::from_fn(dim, p, |_, _| rng.gen_range(-0.5..0.5));
        let channels = (0..layout.z)
            .map(|_| {
                let unit = |rng: &mut ChaCha8Rng| Unit {
                    dilation: rng.gen_range(0.5..1.5),
                    translation: (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    weight: rng.gen_range(-1.0..1.0),
                };
                WaveletChannel {
                    linear: (0..dim).map(|_| rng.gen_range(-0.3..0.3)).collect(),
                    projection: proj.clone(),
                    offset: rng.gen_range(-1.0..1.0),
                    wavelets: (0..3).map(|_| unit(&mut rng)).collect(),
                    scalings: (0..2).map(|_| unit(&mut rng)).collect(),
                }
            })
            .collect();
        let norm = Normalization {
            mean: (0..dim).map(|_| rng.gen_range(-5.0..5.0)).collect(),
            scale: (0..dim).map(|_| rng.gen_range(0.5..3.0)).collect(),
        };
        NarxModel::new(layout, norm, channels).unwrap()
    }

    #[test]
    fn selection_matrices_follow_the_layout() {
        let layout = RegressorLayout::new(2, 2, 2, 1).unwrap();
        let (a, b1, b2) = shift_matrices(&layout);
        // state = [y1(t-1), y2(t-1), y1(t-2), y2(t-2), u(t-1), u(t-2)]
        #[rustfmt::skip]
        let a_hand = DMatrix::from_row_slice(6, 6, &[
            0., 0., 0., 0., 0., 0.,
            0., 0., 0., 0., 0., 0.,
            1., 0., 0., 0., 0., 0.,
            0., 1., 0., 0., 0., 0.,
            0., 0., 0., 0., 0., 0.,
            0., 0., 0., 0., 1., 0.,
        ]);
        let b1_hand = DMatrix::from_row_slice(6, 2, &[1., 0., 0., 1., 0., 0., 0., 0., 0., 0., 0., 0.]);
        let b2_hand = DMatrix::from_row_slice(6, 1, &[0., 0., 0., 0., 1., 0.]);
        assert_eq!(a, a_hand);
        assert_eq!(b1, b1_hand);
        assert_eq!(b2, b2_hand);
    }

    #[test]
    fn shift_matrices_reproduce_regressor_update() {
        let layout = RegressorLayout::new(2, 3, 3, 2).unwrap();
        let (a, b1, b2) = shift_matrices(&layout);
        let x: Vec<f64> = (0..layout.dim()).map(|i| i as f64 * 1.5 - 3.0).collect();
        let y = [7.0, 8.0, 9.0];
        let u = [-1.0, -2.0];
        let by_matrix = &a * DVector::from_column_slice(&x)
            + &b1 * DVector::from_column_slice(&y)
            + &b2 * DVector::from_column_slice(&u);
        assert_eq!(by_matrix.as_slice(), layout.shift(&x, &y, &u).as_slice());
    }

    #[test]
    fn linear_channel_jacobian_is_constant() {
        let layout = RegressorLayout::new(1, 1, 1, 1).unwrap();
        let norm = Normalization {
            mean: vec![1.0, 2.0],
            scale: vec![2.0, 4.0],
        };
        let model = NarxModel::new(layout, norm, vec![WaveletChannel::affine(vec![0.8, 0.4], 0.0)]).unwrap();
        for x in [[0.0, 0.0], [10.0, -3.0]] {
            let lin = linearize(&model, &x, &[0.0]).unwrap();
            assert_eq!(lin.fx[(0, 0)], 0.4);
            assert_eq!(lin.fx[(0, 1)], 0.1);
        }
    }

    #[test]
    fn analytic_jacobian_matches_finite_differences() {
        let model = random_model(42);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let dim = model.layout.dim();
        for _ in 0..5 {
            let x: Vec<f64> = (0..dim)
                .map(|j| model.normalization.mean[j] + model.normalization.scale[j] * rng.gen_range(-1.0..1.0))
                .collect();
            let lin = linearize(&model, &x, &[0.0, 0.0]).unwrap();
            for j in 0..dim {
                // step of 1e-5 in normalized units
                let h = 1e-5 * model.normalization.scale[j];
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let (yp, ym) = (model.eval(&xp), model.eval(&xm));
                for c in 0..model.layout.z {
                    let fd = (yp[c] - ym[c]) / (2.0 * h);
                    let an = lin.fx[(c, j)];
                    let rel = (fd - an).abs() / an.abs().max(1e-8);
                    assert!(rel < 1e-4, "c={c} j={j}: analytic {an} fd {fd}");
                }
            }
        }
    }

    #[test]
    fn tangent_error_is_second_order() {
        let model = random_model(7);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let dim = model.layout.dim();
        let x: Vec<f64> = model.normalization.mean.clone();
        let lin = linearize(&model, &x, &[0.0, 0.0]).unwrap();
        let dir: Vec<f64> = (0..dim).map(|j| rng.gen_range(-1.0..1.0) * model.normalization.scale[j]).collect();
        let err = |eps: f64| {
            let xp: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + eps * d).collect();
            let dx = DVector::from_iterator(dim, dir.iter().map(|d| eps * d));
            let lin_pred = &lin.y_op + &lin.fx * dx;
            let y = DVector::from_vec(model.eval(&xp));
            (y - lin_pred).norm()
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.2, "halving the step scaled the error by {ratio}");
    }

    #[test]
    fn deviation_model_rests_at_the_operating_point() {
        let model = random_model(3);
        let lin = linearize(&model, &model.normalization.mean.clone(), &[1.0, 2.0]).unwrap();
        let zero_u = vec![DVector::zeros(2); 10];
        let dy = lin.simulate_deviation(&DVector::zeros(lin.state_dim()), &zero_u);
        assert!(dy.iter().all(|v| v.iter().all(|x| *x == 0.0)));
        assert!(lin.fu.iter().all(|v| *v == 0.0));
        assert_eq!(lin.b_cl, lin.b2);
    }
}
