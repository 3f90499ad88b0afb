//! Rater agreement (Cohen's kappa) and Pearson correlation with a Fisher
//! interval.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cohort::{Direction, GoldStandard};
use crate::error::{Error, Result};
use crate::evaluate::{percentile, Z_95};

pub const KAPPA_RESAMPLES: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaWeighting {
    Unweighted,
    /// Agreement weight `1 - |i - j| / 2` on the three ordered categories.
    Linear,
    /// Agreement weight `1 - ((i - j) / 2)^2`.
    Quadratic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaResult {
    pub kappa: f64,
    pub observed_agreement: f64,
    pub expected_agreement: f64,
    pub ci: (f64, f64),
    pub items: usize,
}

fn weight(w: KappaWeighting, i: usize, j: usize) -> f64 {
    match w {
        KappaWeighting::Unweighted => (i == j) as u8 as f64,
        KappaWeighting::Linear => 1.0 - (i as f64 - j as f64).abs() / 2.0,
        KappaWeighting::Quadratic => 1.0 - ((i as f64 - j as f64) / 2.0).powi(2),
    }
}

fn category(d: Direction) -> usize {
    (d.as_i8() + 1) as usize
}

/// Point kappa over the given item indices; `None` when chance agreement
/// is 1 and observed agreement is not.
fn kappa_over(a: &[Direction], b: &[Direction], idx: &[usize], w: KappaWeighting) -> Option<(f64, f64, f64)> {
    let n = idx.len() as f64;
    let mut table = [[0.0f64; 3]; 3];
    for &i in idx {
        table[category(a[i])][category(b[i])] += 1.0 / n;
    }
    let rows: Vec<f64> = (0..3).map(|i| table[i].iter().sum()).collect();
    let cols: Vec<f64> = (0..3).map(|j| (0..3).map(|i| table[i][j]).sum()).collect();
    let mut po = 0.0;
    let mut pe = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            po += weight(w, i, j) * table[i][j];
            pe += weight(w, i, j) * rows[i] * cols[j];
        }
    }
    if (1.0 - pe).abs() < 1e-12 {
        // both raters constant on the same category
        return if (1.0 - po).abs() < 1e-12 { Some((1.0, po, pe)) } else { None };
    }
    Some(((po - pe) / (1.0 - pe), po, pe))
}

/// Cohen's kappa with a percentile bootstrap interval over items.
pub fn cohens_kappa(
    a: &[Direction],
    b: &[Direction],
    weighting: KappaWeighting,
    resamples: usize,
    seed: u64,
) -> Result<KappaResult> {
    if a.len() != b.len() {
        return Err(Error::Invalid(format!("rater lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::Invalid("no items to compare".into()));
    }
    let all: Vec<usize> = (0..a.len()).collect();
    let (kappa, po, pe) =
        kappa_over(a, b, &all, weighting).ok_or_else(|| Error::Invalid("kappa undefined".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(resamples);
    let mut idx = vec![0usize; a.len()];
    for _ in 0..resamples {
        for slot in idx.iter_mut() {
            *slot = rng.random_range(0..a.len());
        }
        if let Some((k, _, _)) = kappa_over(a, b, &idx, weighting) {
            draws.push(k);
        }
    }
    draws.sort_by(f64::total_cmp);
    let ci = if draws.is_empty() {
        (kappa, kappa)
    } else {
        (percentile(&draws, 0.025), percentile(&draws, 0.975))
    };
    Ok(KappaResult {
        kappa,
        observed_agreement: po,
        expected_agreement: pe,
        ci,
        items: a.len(),
    })
}

/// Kappa between two gold standards over their shared pairs (in the first
/// standard's order).
pub fn gold_kappa(
    a: &GoldStandard,
    b: &GoldStandard,
    weighting: KappaWeighting,
    resamples: usize,
    seed: u64,
) -> Result<KappaResult> {
    let (da, db): (Vec<_>, Vec<_>) = a
        .entries
        .iter()
        .filter_map(|e| b.get(&e.pair).map(|d| (e.direction, d)))
        .unzip();
    if da.is_empty() {
        return Err(Error::Invalid(format!("gold standards {} and {} share no pairs", a.label, b.label)));
    }
    cohens_kappa(&da, &db, weighting, resamples, seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Correlation {
    pub r: f64,
    pub ci: (f64, f64),
    pub n: usize,
}

/// Pearson correlation with the Fisher-z 95% interval.
pub fn pearson_fisher(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::Invalid("correlation inputs differ in length".into()));
    }
    let n = x.len();
    if n < 4 {
        return Err(Error::InsufficientData(format!("correlation needs at least 4 points, got {n}")));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::InsufficientData("correlation of a constant series".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let z = r.clamp(-0.999_999_999, 0.999_999_999).atanh();
    let half = Z_95 / ((n - 3) as f64).sqrt();
    Ok(Correlation {
        r,
        ci: ((z - half).tanh(), (z + half).tanh()),
        n,
    })
}
