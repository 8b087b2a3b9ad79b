//! Prediction and residual diagnostics for identified models.

use rayon::prelude::*;

use super::dataset::Dataset;
use super::wavelet::NarxModel;
use crate::error::{Error, Result};

/// Two-sided 99% standard-normal quantile.
pub const Z_99: f64 = 2.576;

/// `100·(1 − NRMSE)`, with the RMSE normalized by the range of `y`.
pub fn fit_percent(y: &[f64], y_hat: &[f64]) -> Result<f64> {
    if y.len() != y_hat.len() || y.is_empty() {
        return Err(Error::Dimension(format!(
            "fit_percent needs equal non-empty series, got {} and {}",
            y.len(),
            y_hat.len()
        )));
    }
    let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = y.iter().copied().fold(f64::INFINITY, f64::min);
    let range = max - min;
    if !(range > 0.0) {
        return Err(Error::Degenerate("measured series is constant; NRMSE undefined".into()));
    }
    let mse = y.iter().zip(y_hat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
    Ok(100.0 * (1.0 - mse.sqrt() / range))
}

/// Free-run prediction of `n` samples.
///
/// `y_hist`/`u_hist` hold at least `max_lag` samples ending just before the
/// first predicted sample; `inputs[k]` is applied over step `k`. Model
/// outputs are fed back as lagged outputs.
pub fn predict_n_step(
    model: &NarxModel,
    y_hist: &[Vec<f64>],
    u_hist: &[Vec<f64>],
    inputs: &[Vec<f64>],
    n: usize,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::Input("prediction horizon must be at least 1".into()));
    }
    let layout = &model.layout;
    let lag = layout.max_lag();
    if y_hist.len() < lag || u_hist.len() < lag {
        return Err(Error::History {
            needed: lag,
            available: y_hist.len().min(u_hist.len()),
        });
    }
    if inputs.len() + 1 < n {
        return Err(Error::Dimension(format!("{} inputs for a {n}-step prediction", inputs.len())));
    }
    let t0 = y_hist.len();
    let mut x = layout.build_regressor(y_hist, u_hist, t0)?;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let y = model.eval(&x);
        if k + 1 < n {
            x = layout.shift(&x, &y, &inputs[k]);
        }
        out.push(y);
    }
    Ok(out)
}

/// `N`-step-ahead predictions over a record: for every `t` in `range`, the
/// model starts from measured data up to `t − N` and free-runs to `t`.
/// Samples without enough history are predicted from as far back as the
/// record allows.
pub fn n_step_ahead(model: &NarxModel, data: &Dataset, range: std::ops::Range<usize>, n: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::Input("prediction horizon must be at least 1".into()));
    }
    let lag = model.layout.max_lag();
    if range.start < lag || range.end > data.len() {
        return Err(Error::History {
            needed: lag,
            available: range.start,
        });
    }
    range
        .into_par_iter()
        .map(|t| {
            let start = t.saturating_sub(n - 1).max(lag);
            let steps = t - start + 1;
            let preds = predict_n_step(model, &data.y[..start], &data.u[..start], &data.u[start..t], steps)?;
            Ok(preds.into_iter().last().expect("at least one step"))
        })
        .collect()
}

/// Per-zone fit% of `N`-step-ahead predictions on the held-out split.
pub fn fit_table(model: &NarxModel, data: &Dataset, horizons: &[usize]) -> Result<Vec<Vec<f64>>> {
    let range = data.test_range();
    let range = range.start.max(model.layout.max_lag())..range.end;
    let mut table = vec![Vec::with_capacity(horizons.len()); model.layout.z];
    for &n in horizons {
        let pred = n_step_ahead(model, data, range.clone(), n)?;
        for (c, row) in table.iter_mut().enumerate() {
            let y: Vec<f64> = data.y[range.clone()].iter().map(|r| r[c]).collect();
            let p: Vec<f64> = pred.iter().map(|r| r[c]).collect();
            row.push(fit_percent(&y, &p)?);
        }
    }
    Ok(table)
}

/// One-step prediction errors `y_t − ŷ_t` over `range` (one row per sample).
pub fn one_step_residuals(model: &NarxModel, data: &Dataset, range: std::ops::Range<usize>) -> Result<Vec<Vec<f64>>> {
    let range = range.start.max(model.layout.max_lag())..range.end;
    range
        .map(|t| {
            let x = model.layout.build_regressor(&data.y, &data.u, t)?;
            let y_hat = model.eval(&x);
            Ok(data.y[t].iter().zip(&y_hat).map(|(a, b)| a - b).collect())
        })
        .collect()
}

/// Sample correlation values with their 99% whiteness band.
#[derive(Debug, Clone, PartialEq)]
pub struct Correlogram {
    pub lags: Vec<i64>,
    pub values: Vec<f64>,
    /// Half-width of the 99% band, `2.576/√N`.
    pub bound: f64,
}

impl Correlogram {
    /// Fraction of the given lags whose value lies inside the band.
    pub fn fraction_inside(&self, lag_filter: impl Fn(i64) -> bool) -> f64 {
        let picked: Vec<f64> = self
            .lags
            .iter()
            .zip(&self.values)
            .filter(|(l, _)| lag_filter(**l))
            .map(|(_, v)| *v)
            .collect();
        if picked.is_empty() {
            return 1.0;
        }
        picked.iter().filter(|v| v.abs() <= self.bound).count() as f64 / picked.len() as f64
    }
}

fn centered(x: &[f64], what: &str) -> Result<(Vec<f64>, f64)> {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let ss: f64 = c.iter().map(|v| v * v).sum();
    if !(ss > 0.0) {
        return Err(Error::Degenerate(format!("{what} has zero variance")));
    }
    Ok((c, ss))
}

/// Normalized autocorrelation of `e` for lags `0..=max_lag`.
pub fn residual_autocorrelation(e: &[f64], max_lag: usize) -> Result<Correlogram> {
    if e.len() <= max_lag {
        return Err(Error::Dimension(format!("series of {} samples for max lag {max_lag}", e.len())));
    }
    let (c, ss) = centered(e, "residual series")?;
    let values = (0..=max_lag)
        .map(|k| c.iter().zip(&c[k..]).map(|(a, b)| a * b).sum::<f64>() / ss)
        .collect();
    Ok(Correlogram {
        lags: (0..=max_lag as i64).collect(),
        values,
        bound: Z_99 / (e.len() as f64).sqrt(),
    })
}

/// Normalized cross-correlation between `u_t` and `e_{t+k}` for
/// `k = −max_lag..=max_lag`.
pub fn input_residual_crosscorrelation(u: &[f64], e: &[f64], max_lag: usize) -> Result<Correlogram> {
    if u.len() != e.len() || e.len() <= max_lag {
        return Err(Error::Dimension(format!(
            "cross-correlation needs equal series longer than {max_lag}, got {} and {}",
            u.len(),
            e.len()
        )));
    }
    let (cu, su) = centered(u, "input series")?;
    let (ce, se) = centered(e, "residual series")?;
    let norm = (su * se).sqrt();
    let m = max_lag as i64;
    let mut lags = Vec::with_capacity(2 * max_lag + 1);
    let mut values = Vec::with_capacity(2 * max_lag + 1);
    for k in -m..=m {
        let sum: f64 = if k >= 0 {
            cu.iter().zip(&ce[k as usize..]).map(|(a, b)| a * b).sum()
        } else {
            cu[(-k) as usize..].iter().zip(&ce).map(|(a, b)| a * b).sum()
        };
        lags.push(k);
        values.push(sum / norm);
    }
    Ok(Correlogram {
        lags,
        values,
        bound: Z_99 / (e.len() as f64).sqrt(),
    })
}

/// Per-zone share of correlation lags inside the 99% band on the held-out
/// split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Whiteness {
    /// Residual autocorrelation, lags `1..=max_lag`.
    pub auto_inside: f64,
    /// Cross-correlation of residual `j` with input `j`, lags
    /// `−max_lag..=max_lag`.
    pub cross_inside: f64,
}

pub fn whiteness(model: &NarxModel, data: &Dataset, max_lag: usize) -> Result<Vec<Whiteness>> {
    let range = data.test_range();
    let range = range.start.max(model.layout.max_lag())..range.end;
    let residuals = one_step_residuals(model, data, range.clone())?;
    (0..model.layout.z)
        .map(|j| {
            let e: Vec<f64> = residuals.iter().map(|r| r[j]).collect();
            let auto = residual_autocorrelation(&e, max_lag)?;
            let cross = input_residual_crosscorrelation(&data.input_series(j, range.clone()), &e, max_lag)?;
            Ok(Whiteness {
                auto_inside: auto.fraction_inside(|k| k >= 1),
                cross_inside: cross.fraction_inside(|_| true),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::narx::layout::RegressorLayout;
    use crate::narx::wavelet::{Normalization, WaveletChannel};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn perfect_and_hand_fits() {
        let y = [1.0, 4.0, 2.0, 8.0];
        assert_eq!(fit_percent(&y, &y).unwrap(), 100.0);
        assert_eq!(fit_percent(&[0.0, 10.0], &[5.0, 5.0]).unwrap(), 50.0);
        assert!(matches!(fit_percent(&[3.0, 3.0], &[3.0, 2.0]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn fit_is_affine_invariant() {
        let y = [1.0, 4.0, 2.0, 8.0, -1.0];
        let p = [1.5, 3.0, 2.5, 7.0, 0.0];
        let a = fit_percent(&y, &p).unwrap();
        let ys: Vec<f64> = y.iter().map(|v| 3.0 * v - 7.0).collect();
        let ps: Vec<f64> = p.iter().map(|v| 3.0 * v - 7.0).collect();
        assert!((fit_percent(&ys, &ps).unwrap() - a).abs() < 1e-12);
    }

    #[test]
    fn alternating_series_has_negative_lag_one() {
        let e: Vec<f64> = (0..1000).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = residual_autocorrelation(&e, 25).unwrap();
        assert_eq!(r.values[0], 1.0);
        assert!((r.values[1] + 1.0).abs() < 2e-3);
        assert!((r.bound - 2.576 / 1000f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn white_noise_stays_in_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut inside = 0usize;
        let mut total = 0usize;
        for _ in 0..200 {
            let e: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let r = residual_autocorrelation(&e, 25).unwrap();
            inside += r.values[1..].iter().filter(|v| v.abs() <= r.bound).count();
            total += 25;
        }
        assert!(inside as f64 / total as f64 >= 0.95);
    }

    #[test]
    fn independent_input_stays_in_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut inside = 0usize;
        let mut total = 0usize;
        for _ in 0..100 {
            let u: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let e: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let r = input_residual_crosscorrelation(&u, &e, 25).unwrap();
            inside += r.values.iter().filter(|v| v.abs() <= r.bound).count();
            total += r.values.len();
        }
        assert!(inside as f64 / total as f64 >= 0.95);
    }

    #[test]
    fn shifted_input_peaks_at_its_lag() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let u: Vec<f64> = (0..3000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let k = 4;
        let e: Vec<f64> = (0..3000).map(|t| if t >= k { u[t - k] } else { 0.0 }).collect();
        let r = input_residual_crosscorrelation(&u, &e, 10).unwrap();
        let peak = r.lags.iter().zip(&r.values).max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        assert_eq!(*peak.0, k as i64);
        assert!(*peak.1 > 0.99);
    }

    #[test]
    fn zero_input_is_degenerate() {
        let e: Vec<f64> = (0..100).map(|t| (t as f64).sin()).collect();
        assert!(matches!(
            input_residual_crosscorrelation(&[0.0; 100], &e, 5),
            Err(Error::Degenerate(_))
        ));
        assert!(matches!(residual_autocorrelation(&[1.0; 100], 5), Err(Error::Degenerate(_))));
    }

    fn scalar_arx() -> NarxModel {
        // y_t = 0.9 y_{t-1} + 0.5 u_{t-1} + 1
        let layout = RegressorLayout::new(1, 1, 1, 1).unwrap();
        NarxModel::new(layout, Normalization::identity(2), vec![WaveletChannel::affine(vec![0.9, 0.5], 1.0)]).unwrap()
    }

    #[test]
    fn one_step_prediction_is_a_single_evaluation() {
        let model = scalar_arx();
        let y = vec![vec![2.0]];
        let u = vec![vec![3.0]];
        let p = predict_n_step(&model, &y, &u, &[], 1).unwrap();
        assert_eq!(p, vec![vec![0.9 * 2.0 + 0.5 * 3.0 + 1.0]]);
    }

    #[test]
    fn rollout_matches_closed_form_recursion() {
        let model = scalar_arx();
        let inputs: Vec<Vec<f64>> = (0..30).map(|k| vec![(k % 5) as f64]).collect();
        let p = predict_n_step(&model, &[vec![2.0]], &[vec![1.0]], &inputs, 30).unwrap();
        // y_k = a^{k+1} y_{-1} + Σ_j a^{k-j} (b u_{j-1} + c), with u_{-1} = 1.
        let (a, b, c) = (0.9f64, 0.5, 1.0);
        for k in 0..30 {
            let mut expected = a.powi(k as i32 + 1) * 2.0;
            for j in 0..=k {
                let u_prev = if j == 0 { 1.0 } else { inputs[j - 1][0] };
                expected += a.powi((k - j) as i32) * (b * u_prev + c);
            }
            assert!((p[k][0] - expected).abs() < 1e-10, "step {k}");
        }
    }
}
