//! Pooled regressions from per-patient sufficient statistics.
//!
//! Each patient contributes shifted first and second moments of its lagged
//! rows. A bootstrap replicate is then a multiplicity-weighted sum of those
//! moments, which is equivalent to stacking the resampled patients' rows.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{FitResult, LagSpec, Model};
use crate::error::{Error, Result};
use crate::timeline::AlignedTimeline;

/// Eigenvalues of the scaled centred Gram matrix below this fraction of the
/// largest are treated as null directions.
pub const GRAM_RTOL: f64 = 1e-12;

/// Shifted moments of `p` columns (predictors then target).
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    p: usize,
    n: f64,
    sum: Vec<f64>,
    /// packed upper triangle, row-major
    cross: Vec<f64>,
}

impl Moments {
    pub fn new(p: usize) -> Self {
        Moments {
            p,
            n: 0.0,
            sum: vec![0.0; p],
            cross: vec![0.0; p * (p + 1) / 2],
        }
    }

    pub fn count(&self) -> f64 {
        self.n
    }

    pub fn add_row(&mut self, row: &[f64], shift: &[f64], buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(row.iter().zip(shift).map(|(v, s)| v - s));
        self.n += 1.0;
        let mut idx = 0;
        for i in 0..self.p {
            let vi = buf[i];
            self.sum[i] += vi;
            for &vj in &buf[i..] {
                self.cross[idx] += vi * vj;
                idx += 1;
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Moments, w: f64) {
        self.n += w * other.n;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += w * b;
        }
        for (a, b) in self.cross.iter_mut().zip(&other.cross) {
            *a += w * b;
        }
    }

    /// Centred cross-product matrix and column means (in original units).
    fn centred(&self, shift: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.p;
        let mut c = vec![0.0; p * p];
        let mut idx = 0;
        for i in 0..p {
            for j in i..p {
                let v = self.cross[idx] - self.sum[i] * self.sum[j] / self.n;
                c[i * p + j] = v;
                c[j * p + i] = v;
                idx += 1;
            }
        }
        let means = (0..p).map(|i| shift[i] + self.sum[i] / self.n).collect();
        (c, means)
    }
}

/// Solution of a pooled regression with an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledSolution {
    pub coef: Vec<f64>,
    pub intercept: f64,
    /// Includes the intercept.
    pub rank: usize,
    pub rss: f64,
    pub rows: usize,
}

/// Minimum-norm (in the column-standardized basis) regression of the last
/// column on the others plus an intercept.
pub fn solve_moments(m: &Moments, shift: &[f64]) -> Result<PooledSolution> {
    if m.n <= 0.0 {
        return Err(Error::InsufficientData("pooled design has no rows".into()));
    }
    let p = m.p;
    let k = p - 1;
    let (c, means) = m.centred(shift);
    let cyy = c[k * p + k].max(0.0);
    let diag_max = (0..k).map(|j| c[j * p + j]).fold(0.0, f64::max);
    let active: Vec<usize> = (0..k)
        .filter(|&j| c[j * p + j] > 1e-12 * diag_max && c[j * p + j] > 0.0)
        .collect();

    let mut coef = vec![0.0; k];
    let mut kept = 0;
    if !active.is_empty() {
        let scale: Vec<f64> = active.iter().map(|&j| 1.0 / c[j * p + j].sqrt()).collect();
        let a = active.len();
        let gram = DMatrix::from_fn(a, a, |r, s| c[active[r] * p + active[s]] * scale[r] * scale[s]);
        let rhs: Vec<f64> = active.iter().zip(&scale).map(|(&j, s)| c[j * p + k] * s).collect();
        let eig = SymmetricEigen::new(gram);
        let lmax = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        let mut b = vec![0.0; a];
        // fixed eigen-index order keeps the summation deterministic
        for (i, &lambda) in eig.eigenvalues.iter().enumerate() {
            if lambda <= GRAM_RTOL * lmax || lambda <= 0.0 {
                continue;
            }
            kept += 1;
            let v = eig.eigenvectors.column(i);
            let proj: f64 = v.iter().zip(&rhs).map(|(x, r)| x * r).sum::<f64>() / lambda;
            for (bi, vi) in b.iter_mut().zip(v.iter()) {
                *bi += proj * vi;
            }
        }
        for ((&j, s), bj) in active.iter().zip(&scale).zip(&b) {
            coef[j] = bj * s;
        }
    }
    let intercept = means[k] - coef.iter().zip(&means).map(|(b, x)| b * x).sum::<f64>();
    let explained: f64 = (0..k).map(|j| coef[j] * c[j * p + k]).sum();
    Ok(PooledSolution {
        coef,
        intercept,
        rank: kept + 1,
        rss: (cyy - explained).max(0.0),
        rows: m.n.round() as usize,
    })
}

/// Per-patient moments for one lag model, ready for full-cohort or
/// resampled fits.
#[derive(Debug, Clone)]
pub struct PooledStats {
    spec: LagSpec,
    shift: Vec<f64>,
    /// joint: one entry per patient; independent: `max_lag` entries per patient
    per_patient: Vec<Vec<Moments>>,
}

fn channel_means(timelines: &[AlignedTimeline]) -> [f64; 3] {
    let mut sums = [0.0; 3];
    let mut n = 0usize;
    for tl in timelines {
        for (s, ch) in sums.iter_mut().zip(tl.channels()) {
            *s += ch.iter().sum::<f64>();
        }
        n += tl.len();
    }
    if n == 0 {
        return [0.0; 3];
    }
    sums.map(|s| s / n as f64)
}

impl PooledStats {
    pub fn new(timelines: &[AlignedTimeline], spec: &LagSpec) -> Self {
        let [my, mx, mz] = channel_means(timelines);
        let l = spec.max_lag;
        let mut buf = Vec::new();
        match spec.model {
            Model::Joint => {
                let blocks = if spec.include_context { 3 } else { 2 };
                let mut shift = Vec::with_capacity(blocks * l + 1);
                shift.extend(std::iter::repeat_n(mx, l));
                shift.extend(std::iter::repeat_n(my, l));
                if spec.include_context {
                    shift.extend(std::iter::repeat_n(mz, l));
                }
                shift.push(my);
                let p = shift.len();
                let mut row = vec![0.0; p];
                let per_patient = timelines
                    .iter()
                    .map(|tl| {
                        let mut m = Moments::new(p);
                        for t in l..tl.len() {
                            for tau in 1..=l {
                                row[tau - 1] = tl.x[t - tau];
                                row[l + tau - 1] = tl.y[t - tau];
                                if spec.include_context {
                                    row[2 * l + tau - 1] = tl.z[t - tau];
                                }
                            }
                            row[p - 1] = tl.y[t];
                            m.add_row(&row, &shift, &mut buf);
                        }
                        vec![m]
                    })
                    .collect();
                PooledStats {
                    spec: spec.clone(),
                    shift,
                    per_patient,
                }
            }
            Model::Independent => {
                let shift = vec![mx, my];
                let per_patient = timelines
                    .iter()
                    .map(|tl| {
                        (1..=l)
                            .map(|tau| {
                                let mut m = Moments::new(2);
                                for t in tau..tl.len() {
                                    m.add_row(&[tl.x[t - tau], tl.y[t]], &shift, &mut buf);
                                }
                                m
                            })
                            .collect()
                    })
                    .collect();
                PooledStats {
                    spec: spec.clone(),
                    shift,
                    per_patient,
                }
            }
        }
    }

    pub fn patients(&self) -> usize {
        self.per_patient.len()
    }

    pub fn spec(&self) -> &LagSpec {
        &self.spec
    }

    fn combine(&self, slot: usize, weights: Option<&[u32]>) -> Moments {
        let p = self.per_patient.first().map_or(1, |v| v[slot].p);
        let mut total = Moments::new(p);
        for (i, stats) in self.per_patient.iter().enumerate() {
            let w = weights.map_or(1, |w| w[i]);
            if w > 0 {
                total.add_scaled(&stats[slot], w as f64);
            }
        }
        total
    }

    /// Fit on the whole cohort (`weights = None`) or on a resample given as
    /// per-patient multiplicities.
    pub fn fit(&self, weights: Option<&[u32]>) -> Result<FitResult> {
        if let Some(w) = weights {
            assert_eq!(w.len(), self.patients());
        }
        let l = self.spec.max_lag;
        match self.spec.model {
            Model::Joint => {
                if self.per_patient.is_empty() {
                    return Err(Error::InsufficientData("cohort has no patients".into()));
                }
                let total = self.combine(0, weights);
                let sol = solve_moments(&total, &self.shift)?;
                Ok(FitResult::from_joint(&self.spec, sol.coef, sol.intercept, sol.rank, sol.rss, sol.rows))
            }
            Model::Independent => {
                let lags = (0..l)
                    .map(|slot| {
                        if self.per_patient.is_empty() {
                            return None;
                        }
                        let total = self.combine(slot, weights);
                        simple_slope(&total, &self.shift)
                    })
                    .collect();
                Ok(FitResult::from_independent(lags))
            }
        }
    }
}

/// Per-lag result of a two-column (slope + intercept) regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LagSlope {
    pub slope: f64,
    pub intercept: f64,
    pub rss: f64,
    pub rows: usize,
}

/// Closed-form simple regression; `None` for no rows or zero predictor
/// variance.
pub fn simple_slope(m: &Moments, shift: &[f64]) -> Option<LagSlope> {
    assert_eq!(m.p, 2);
    if m.n <= 0.0 {
        return None;
    }
    let (c, means) = m.centred(shift);
    let (cxx, cxy, cyy) = (c[0], c[1], c[3]);
    let raw_xx = cxx + m.n * means[0] * means[0];
    if cxx <= 1e-12 * raw_xx || cxx <= 0.0 {
        return None;
    }
    let slope = cxy / cxx;
    Some(LagSlope {
        slope,
        intercept: means[1] - slope * means[0],
        rss: (cyy - slope * cxy).max(0.0),
        rows: m.n.round() as usize,
    })
}

/// Simple regression of `ys` on `xs` through the pooled-moment path.
pub fn simple_regression(xs: &[f64], ys: &[f64]) -> Option<LagSlope> {
    assert_eq!(xs.len(), ys.len());
    let shift = [0.0, 0.0];
    let mut m = Moments::new(2);
    let mut buf = Vec::new();
    for (x, y) in xs.iter().zip(ys) {
        m.add_row(&[*x, *y], &shift, &mut buf);
    }
    simple_slope(&m, &shift)
}
