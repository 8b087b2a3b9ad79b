//! Least-squares identification of wavelet-network NARX models.
//!
//! The regressors are z-scored, projected onto their leading principal
//! directions, and covered by a coarse-to-fine lattice of candidate units.
//! For each candidate network size the linear term, unit weights and offset
//! are solved jointly by least squares; the size with the best held-out
//! one-step error wins, negligible units are pruned and the survivors
//! re-fitted on the full training split.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;

use super::dataset::Dataset;
use super::layout::RegressorLayout;
use super::validate::fit_percent;
use super::wavelet::{NarxModel, Normalization, Unit, UnitKind, WaveletChannel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    /// Cap on the projected dimension.
    pub max_projection: usize,
    /// Variance fraction the projection must retain (subject to the cap).
    pub variance_fraction: f64,
    /// Number of lattice refinement levels for wavelet units.
    pub levels: usize,
    /// Level-0 lattice spacing, in standard deviations of the leading
    /// principal component.
    pub base_cell: f64,
    /// Candidate network sizes compared on held-out data.
    pub unit_counts: Vec<usize>,
    /// Minimum number of training points in a lattice cell for it to seed a
    /// unit.
    pub min_occupancy: usize,
    /// Units whose |weight| is below this fraction of the largest unit
    /// weight are pruned.
    pub prune_tolerance: f64,
    /// Trailing fraction of the training split used to pick the size.
    pub holdout_fraction: f64,
    /// Fit in lag-difference coordinates: lag 1 as is, every later lag
    /// replaced by its difference to the previous one.
    pub difference_lags: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_projection: 20,
            variance_fraction: 0.999,
            levels: 3,
            base_cell: 2.0,
            unit_counts: vec![0, 5, 10, 20, 40],
            min_occupancy: 20,
            prune_tolerance: 1e-6,
            holdout_fraction: 0.2,
            difference_lags: true,
        }
    }
}

/// Regression matrix and targets built from one contiguous sample range.
#[derive(Debug, Clone)]
pub struct RegressionData {
    /// One regressor per row.
    pub x: DMatrix<f64>,
    /// One output vector per row.
    pub y: DMatrix<f64>,
}

impl RegressionData {
    pub fn from_dataset(data: &Dataset, layout: &RegressorLayout, range: std::ops::Range<usize>) -> Result<Self> {
        if data.n_outputs() != layout.z || data.n_inputs() != layout.h {
            return Err(Error::Dimension(format!(
                "dataset has {} inputs / {} outputs, layout expects {} / {}",
                data.n_inputs(),
                data.n_outputs(),
                layout.h,
                layout.z
            )));
        }
        let start = range.start + layout.max_lag();
        if start >= range.end {
            return Err(Error::History {
                needed: layout.max_lag(),
                available: range.len(),
            });
        }
        let rows = range.end - start;
        let mut x = DMatrix::zeros(rows, layout.dim());
        let mut y = DMatrix::zeros(rows, layout.z);
        for (r, t) in (start..range.end).enumerate() {
            let reg = layout.build_regressor(&data.y, &data.u, t)?;
            for (j, v) in reg.into_iter().enumerate() {
                x[(r, j)] = v;
            }
            for c in 0..layout.z {
                y[(r, c)] = data.y[t][c];
            }
        }
        Ok(Self { x, y })
    }
}

/// Describes which regressor entry index `j` is, for error messages.
fn describe_regressor(layout: &RegressorLayout, j: usize) -> (usize, String) {
    if j < layout.z * layout.n {
        let c = j % layout.z;
        (c + 1, format!("output y{} lag {}", c + 1, j / layout.z + 1))
    } else {
        let k = j - layout.z * layout.n;
        let c = k % layout.h;
        (c + 1, format!("input u{} lag {}", c + 1, k / layout.h + 1))
    }
}

fn normalization(x: &DMatrix<f64>, layout: &RegressorLayout) -> Result<Normalization> {
    let n = x.nrows() as f64;
    let mut mean = Vec::with_capacity(x.ncols());
    let mut scale = Vec::with_capacity(x.ncols());
    for j in 0..x.ncols() {
        let col = x.column(j);
        let m = col.sum() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        let s = var.sqrt();
        if !(s > 1e-12 * (1.0 + m.abs())) {
            let (channel, what) = describe_regressor(layout, j);
            return Err(Error::Fit {
                channel,
                reason: format!("regressor matrix is rank deficient: {what} is constant"),
            });
        }
        mean.push(m);
        scale.push(s);
    }
    Ok(Normalization { mean, scale })
}

/// `T` with `Tx` keeping lag 1 of every channel and replacing lag `k ≥ 2`
/// by `x_{k−1} − x_k`.
fn lag_differences(layout: &RegressorLayout) -> DMatrix<f64> {
    let mut t = DMatrix::identity(layout.dim(), layout.dim());
    for lag in 2..=layout.n {
        for c in 0..layout.z {
            t[(layout.y_index(lag, c), layout.y_index(lag - 1, c))] = 1.0;
            t[(layout.y_index(lag, c), layout.y_index(lag, c))] = -1.0;
        }
    }
    for lag in 2..=layout.m {
        for c in 0..layout.h {
            t[(layout.u_index(lag, c), layout.u_index(lag - 1, c))] = 1.0;
            t[(layout.u_index(lag, c), layout.u_index(lag, c))] = -1.0;
        }
    }
    t
}

fn normalize(x: &DMatrix<f64>, norm: &Normalization) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| (x[(i, j)] - norm.mean[j]) / norm.scale[j])
}

/// Leading principal directions of the normalized regressors and the
/// standard deviation along the first one.
fn principal_directions(z: &DMatrix<f64>, cfg: &FitConfig) -> (DMatrix<f64>, f64) {
    let n = z.nrows() as f64;
    let cov = z.transpose() * z / n;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let total: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0)).sum();
    let cap = cfg.max_projection.min(z.ncols());
    let mut p = 0;
    let mut acc = 0.0;
    while p < cap && acc < cfg.variance_fraction * total {
        acc += eig.eigenvalues[order[p]].max(0.0);
        p += 1;
    }
    let p = p.max(1);
    let mut proj = DMatrix::zeros(z.ncols(), p);
    for (k, &idx) in order.iter().take(p).enumerate() {
        let mut v = eig.eigenvectors.column(idx).clone_owned();
        // Fix the sign so the largest-magnitude entry is positive.
        let (imax, _) = v.iter().enumerate().fold((0, 0.0f64), |best, (i, x)| {
            if x.abs() > best.1 {
                (i, x.abs())
            } else {
                best
            }
        });
        if v[imax] < 0.0 {
            v.neg_mut();
        }
        proj.set_column(k, &v);
    }
    let sd = eig.eigenvalues[order[0]].max(f64::MIN_POSITIVE).sqrt();
    (proj, sd)
}

#[derive(Debug, Clone)]
struct Candidate {
    kind: UnitKind,
    dilation: f64,
    translation: Vec<f64>,
}

/// Lattice-seeded candidate units, coarse to fine and by decreasing
/// occupancy within a level.
fn candidate_units(s: &DMatrix<f64>, sd: f64, cfg: &FitConfig) -> Vec<Candidate> {
    let mut out = Vec::new();
    let kinds = std::iter::once((UnitKind::Scaling, 0)).chain((0..cfg.levels).map(|j| (UnitKind::Wavelet, j)));
    for (kind, level) in kinds {
        let cell = cfg.base_cell * sd / (1u64 << level) as f64;
        let mut counts: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
        for row in s.row_iter() {
            let key: Vec<i64> = row.iter().map(|v| (v / cell).round() as i64).collect();
            *counts.entry(key).or_insert(0) += 1;
        }
        let mut cells: Vec<(Vec<i64>, usize)> =
            counts.into_iter().filter(|(_, c)| *c >= cfg.min_occupancy).collect();
        cells.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        for (key, _) in cells {
            out.push(Candidate {
                kind,
                dilation: 1.0 / cell,
                translation: key.iter().map(|k| *k as f64 * cell).collect(),
            });
        }
    }
    out
}

fn candidate_unit(c: &Candidate) -> Unit {
    Unit {
        dilation: c.dilation,
        translation: c.translation.clone(),
        weight: 0.0,
    }
}

/// Design matrix `[z | unit activations | 1]`.
fn design(z: &DMatrix<f64>, s: &DMatrix<f64>, units: &[&Candidate]) -> DMatrix<f64> {
    let (rows, dim) = (z.nrows(), z.ncols());
    let cols = dim + units.len() + 1;
    let mut d = DMatrix::zeros(rows, cols);
    d.view_mut((0, 0), (rows, dim)).copy_from(z);
    for (k, c) in units.iter().enumerate() {
        let unit = candidate_unit(c);
        for i in 0..rows {
            let si: Vec<f64> = s.row(i).iter().copied().collect();
            d[(i, dim + k)] = unit.activation(c.kind, &si);
        }
    }
    d.column_mut(cols - 1).fill(1.0);
    d
}

/// Least-squares solution of `design · w ≈ targets` (one column per
/// target) via Householder QR. `None` when the design is rank deficient.
fn least_squares(design: &DMatrix<f64>, targets: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let cols = design.ncols();
    let rows = design.nrows();
    if rows < cols {
        return None;
    }
    let qr = design.clone().qr();
    let r = qr.r();
    let rmax = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if r.diagonal().iter().any(|v| !(v.abs() > 1e-10 * rmax)) {
        return None;
    }
    let mut qtb = targets.clone();
    qr.q_tr_mul(&mut qtb);
    let top = qtb.rows(0, cols).clone_owned();
    r.solve_upper_triangular(&top)
}

/// Result of fitting one output channel on a fixed regression problem.
struct ChannelFit {
    linear: Vec<f64>,
    units: Vec<(Candidate, f64)>,
    offset: f64,
}

fn unpack(dim: usize, units: &[&Candidate], w: &DVector<f64>) -> ChannelFit {
    ChannelFit {
        linear: w.rows(0, dim).iter().copied().collect(),
        units: units.iter().enumerate().map(|(k, c)| ((*c).clone(), w[dim + k])).collect(),
        offset: w[w.len() - 1],
    }
}

/// Drops units whose weight is negligible and re-solves until stable.
fn prune_and_refit(
    channel: usize,
    z: &DMatrix<f64>,
    s: &DMatrix<f64>,
    target: &DVector<f64>,
    mut units: Vec<&Candidate>,
    mut w: DVector<f64>,
    tol: f64,
) -> Result<ChannelFit> {
    let dim = z.ncols();
    loop {
        let largest = (0..units.len()).fold(0.0f64, |m, k| m.max(w[dim + k].abs()));
        let keep: Vec<usize> = (0..units.len()).filter(|&k| w[dim + k].abs() >= tol * largest && largest > 0.0).collect();
        if keep.len() == units.len() {
            return Ok(unpack(dim, &units, &w));
        }
        units = keep.iter().map(|&k| units[k]).collect();
        let d = design(z, s, &units);
        let t = DMatrix::from_column_slice(target.len(), 1, target.as_slice());
        w = least_squares(&d, &t)
            .ok_or_else(|| Error::Fit {
                channel: channel + 1,
                reason: "rank-deficient regressor matrix after pruning".into(),
            })?
            .column(0)
            .clone_owned();
    }
}

/// Fits every channel on pre-built regression data.
pub fn fit_regression(data: &RegressionData, layout: &RegressorLayout, cfg: &FitConfig) -> Result<NarxModel> {
    let dim = layout.dim();
    if data.x.ncols() != dim || data.y.ncols() != layout.z || data.x.nrows() != data.y.nrows() {
        return Err(Error::Dimension("regression data does not match layout".into()));
    }
    let rows = data.x.nrows();
    let min_rows = |units: usize| 10 * (dim + units + 1);
    if rows < min_rows(0) {
        return Err(Error::Config(format!(
            "training split has {rows} usable rows, need at least {}",
            min_rows(0)
        )));
    }

    let norm = normalization(&data.x, layout)?;
    // `to_model` maps fitting coordinates back onto the model's z-scores.
    let (z, to_model) = if cfg.difference_lags {
        let t = lag_differences(layout);
        let xd = &data.x * t.transpose();
        let nd = normalization(&xd, layout)?;
        let m = DMatrix::from_fn(dim, dim, |i, j| t[(i, j)] * norm.scale[j] / nd.scale[i]);
        (normalize(&xd, &nd), Some(m))
    } else {
        (normalize(&data.x, &norm), None)
    };
    let (proj, sd) = principal_directions(&z, cfg);
    let s = &z * &proj;
    let candidates = candidate_units(&s, sd, cfg);

    let mut counts: Vec<usize> = cfg
        .unit_counts
        .iter()
        .map(|&k| k.min(candidates.len()))
        .filter(|&k| rows >= min_rows(k))
        .collect();
    counts.sort_unstable();
    counts.dedup();
    if counts.is_empty() {
        counts.push(0);
    }

    // Pick the network size per channel on the tail of the training split.
    let split = ((1.0 - cfg.holdout_fraction) * rows as f64).floor() as usize;
    let holdout = split < rows && split >= min_rows(0);
    let z_fit = z.rows(0, split).clone_owned();
    let s_fit = s.rows(0, split).clone_owned();
    let y_fit = data.y.rows(0, split).clone_owned();
    let mut best: Vec<(f64, usize)> = vec![(f64::NEG_INFINITY, counts[0]); layout.z];
    if holdout && counts.len() > 1 {
        let z_val = z.rows(split, rows - split).clone_owned();
        let s_val = s.rows(split, rows - split).clone_owned();
        let scored: Vec<(usize, Option<Vec<f64>>)> = counts
            .par_iter()
            .map(|&k| {
                let units: Vec<&Candidate> = candidates.iter().take(k).collect();
                let Some(w) = least_squares(&design(&z_fit, &s_fit, &units), &y_fit) else {
                    return (k, None);
                };
                let pred = design(&z_val, &s_val, &units) * w;
                let scores = (0..layout.z)
                    .map(|c| {
                        let y: Vec<f64> = data.y.column(c).rows(split, rows - split).iter().copied().collect();
                        let p: Vec<f64> = pred.column(c).iter().copied().collect();
                        fit_percent(&y, &p).unwrap_or(f64::NEG_INFINITY)
                    })
                    .collect();
                (k, Some(scores))
            })
            .collect();
        for (k, scores) in scored {
            if let Some(scores) = scores {
                for (c, score) in scores.into_iter().enumerate() {
                    if score > best[c].0 + 1e-9 {
                        best[c] = (score, k);
                    }
                }
            }
        }
    } else {
        let k = *counts.last().unwrap_or(&0);
        best.iter_mut().for_each(|b| b.1 = k);
    }

    let mut by_size: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (c, (_, k)) in best.iter().enumerate() {
        by_size.entry(*k).or_default().push(c);
    }
    let mut fits: Vec<Option<ChannelFit>> = (0..layout.z).map(|_| None).collect();
    for (k, channels) in by_size {
        let units: Vec<&Candidate> = candidates.iter().take(k).collect();
        let d = design(&z, &s, &units);
        let targets = DMatrix::from_fn(rows, channels.len(), |i, j| data.y[(i, channels[j])]);
        let w = least_squares(&d, &targets).ok_or_else(|| Error::Fit {
            channel: channels[0] + 1,
            reason: "rank-deficient regressor matrix".into(),
        })?;
        let results: Vec<Result<ChannelFit>> = channels
            .par_iter()
            .enumerate()
            .map(|(j, &c)| {
                let target = data.y.column(c).clone_owned();
                prune_and_refit(c, &z, &s, &target, units.clone(), w.column(j).clone_owned(), cfg.prune_tolerance)
            })
            .collect();
        for (&c, r) in channels.iter().zip(results) {
            fits[c] = Some(r?);
        }
    }

    let channels = fits
        .into_iter()
        .map(|f| {
            let f = f.expect("every channel assigned a size");
            let projection = if f.units.is_empty() { DMatrix::zeros(dim, 0) } else { proj.clone() };
            let (linear, projection) = match &to_model {
                Some(m) => (
                    (m.transpose() * DVector::from_vec(f.linear)).iter().copied().collect(),
                    m.transpose() * projection,
                ),
                None => (f.linear, projection),
            };
            let mut ch = WaveletChannel {
                linear,
                projection,
                offset: f.offset,
                wavelets: Vec::new(),
                scalings: Vec::new(),
            };
            for (c, weight) in f.units {
                let unit = Unit {
                    weight,
                    ..candidate_unit(&c)
                };
                match c.kind {
                    UnitKind::Wavelet => ch.wavelets.push(unit),
                    UnitKind::Scaling => ch.scalings.push(unit),
                }
            }
            ch
        })
        .collect();
    NarxModel::new(*layout, norm, channels)
}

/// Identifies a model from the training split of `data`.
pub fn fit_narx(data: &Dataset, layout: &RegressorLayout, cfg: &FitConfig) -> Result<NarxModel> {
    layout.validate()?;
    let reg = RegressionData::from_dataset(data, layout, data.train_range())?;
    fit_regression(&reg, layout, cfg)
}
