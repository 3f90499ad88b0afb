//! Dense least squares through Householder QR with column pivoting.
//!
//! Rank-deficient problems are finished with a complete orthogonal
//! decomposition, giving the minimum-norm solution.

use crate::error::{Error, Result};

/// Relative tolerance on `|R_jj|` against the largest column norm of `X`.
pub const RANK_RTOL: f64 = 1e-10;

/// Row-major dense design.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Design {
    pub cols: usize,
    pub data: Vec<f64>,
    pub target: Vec<f64>,
}

impl Design {
    pub fn new(cols: usize) -> Self {
        Design {
            cols,
            data: Vec::new(),
            target: Vec::new(),
        }
    }

    pub fn rows(&self) -> usize {
        self.target.len()
    }

    pub fn push_row(&mut self, row: &[f64], target: f64) {
        debug_assert_eq!(row.len(), self.cols);
        self.data.extend_from_slice(row);
        self.target.push(target);
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn append(&mut self, other: &Design) {
        assert_eq!(self.cols, other.cols);
        self.data.extend_from_slice(&other.data);
        self.target.extend_from_slice(&other.target);
    }

    pub fn predict(&self, coef: &[f64]) -> Vec<f64> {
        (0..self.rows())
            .map(|i| self.row(i).iter().zip(coef).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coef: Vec<f64>,
    pub rank: usize,
    pub residuals: Vec<f64>,
}

impl LeastSquares {
    pub fn rss(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

/// Householder reflector for `x`: returns `(v, tau, alpha)` with
/// `(I - tau v v^T) x = alpha e_1` and `v[0] = 1`.
fn householder(x: &[f64]) -> (Vec<f64>, f64, f64) {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut v = x.to_vec();
    if norm == 0.0 {
        v[0] = 1.0;
        return (v, 0.0, 0.0);
    }
    let alpha = if x[0] > 0.0 { -norm } else { norm };
    let v0 = x[0] - alpha;
    for e in v.iter_mut().skip(1) {
        *e /= v0;
    }
    v[0] = 1.0;
    let tau = (alpha - x[0]) / alpha;
    (v, tau, alpha)
}

fn apply_reflector(v: &[f64], tau: f64, col: &mut [f64]) {
    if tau == 0.0 {
        return;
    }
    let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
    let s = tau * dot;
    for (c, a) in col.iter_mut().zip(v) {
        *c -= s * a;
    }
}

/// Minimum-norm solution of `min ||X b - y||` with effective rank under
/// [`RANK_RTOL`].
pub fn least_squares(design: &Design) -> Result<LeastSquares> {
    let m = design.rows();
    let n = design.cols;
    if m == 0 {
        return Err(Error::InsufficientData("design has no rows".into()));
    }

    // column-major working copy
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| design.data[i * n + j]).collect()).collect();
    let mut qty = design.target.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    let col_norm = |c: &[f64]| c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let max_norm = a.iter().map(|c| col_norm(c)).fold(0.0, f64::max);
    let tol = RANK_RTOL * max_norm;

    let steps = m.min(n);
    let mut rank = 0;
    for j in 0..steps {
        // pivot on the largest remaining partial column norm
        let (p, best) = (j..n)
            .map(|c| (c, col_norm(&a[c][j..])))
            .fold((j, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best <= tol {
            break;
        }
        a.swap(j, p);
        perm.swap(j, p);
        let (v, tau, alpha) = householder(&a[j][j..]);
        a[j][j] = alpha;
        for e in a[j][j + 1..].iter_mut() {
            *e = 0.0;
        }
        for c in a.iter_mut().skip(j + 1) {
            apply_reflector(&v, tau, &mut c[j..]);
        }
        apply_reflector(&v, tau, &mut qty[j..]);
        rank += 1;
    }

    let r = rank;
    let mut z = vec![0.0; n];
    if r > 0 {
        if r == n {
            for i in (0..n).rev() {
                let s: f64 = (i + 1..n).map(|k| a[k][i] * z[k]).sum();
                z[i] = (qty[i] - s) / a[i][i];
            }
        } else {
            // T = [R11 R12] is r x n with full row rank; factor T^T = Q2 R2
            // and take z = Q2 R2^{-T} c for the minimum-norm solution.
            let mut t: Vec<Vec<f64>> = (0..r).map(|i| (0..n).map(|k| a[k][i]).collect()).collect();
            let mut reflectors = Vec::with_capacity(r);
            for i in 0..r {
                let (v, tau, alpha) = householder(&t[i][i..]);
                t[i][i] = alpha;
                for e in t[i][i + 1..].iter_mut() {
                    *e = 0.0;
                }
                for c in t.iter_mut().skip(i + 1) {
                    apply_reflector(&v, tau, &mut c[i..]);
                }
                reflectors.push((v, tau));
            }
            // R2^T w = c; R2[k][i] (k <= i) is stored at t[i][k]
            let mut w = vec![0.0; r];
            for i in 0..r {
                let s: f64 = (0..i).map(|k| t[i][k] * w[k]).sum();
                w[i] = (qty[i] - s) / t[i][i];
            }
            let mut y = vec![0.0; n];
            y[..r].copy_from_slice(&w);
            for (i, (v, tau)) in reflectors.iter().enumerate().rev() {
                apply_reflector(v, *tau, &mut y[i..]);
            }
            z = y;
        }
    }

    let mut coef = vec![0.0; n];
    for (k, &p) in perm.iter().enumerate() {
        coef[p] = z[k];
    }
    let fitted = design.predict(&coef);
    let residuals = design.target.iter().zip(fitted).map(|(y, f)| y - f).collect();
    Ok(LeastSquares { coef, rank, residuals })
}
