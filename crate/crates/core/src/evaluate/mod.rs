//! Method grid, AUROC against gold standards, group contrasts and agreement
//! statistics.

mod agreement;
mod config;
mod roc;

pub use agreement::{cohens_kappa, gold_kappa, pearson_fisher, Correlation, KappaResult, KappaWeighting, KAPPA_RESAMPLES};
pub use config::{enumerate_grid, GridFilter, MethodConfig, TimeAxis};
pub use roc::{
    auroc, auroc_samples, fold_pairs, gold_auroc, roc_points, scheme_roc_curves, AurocDraws, FoldScheme, Predictions, ScoredPair,
    ROC_THRESHOLDS,
};

use crate::error::{Error, Result};

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959963984540054;

/// Sample standard deviation (n - 1); 0 for fewer than two values.
pub fn sample_sd(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

/// Linear-interpolated quantile of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// AUROC of one configuration against one gold standard.
#[derive(Debug, Clone, PartialEq)]
pub struct AurocReport {
    pub config: MethodConfig,
    pub gold: String,
    pub auroc: f64,
    pub draws: Vec<f64>,
    pub sd: f64,
    /// Named ROC curves as `(fpr, tpr)` points.
    pub curves: Vec<(String, Vec<(f64, f64)>)>,
}

/// Difference of mean AUROC between two groups of configurations.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupContrast {
    pub difference: f64,
    pub sd: f64,
    pub ci: (f64, f64),
    pub size_a: usize,
    pub size_b: usize,
}

/// Contrast of group means from `(draws, point)` members. Draw `b` of every
/// member must come from the same resample so the per-draw differences
/// are paired.
pub fn contrast_draws(a: &[(&[f64], f64)], b: &[(&[f64], f64)]) -> Result<GroupContrast> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Invalid("contrast groups must be non-empty".into()));
    }
    let draws = a[0].0.len();
    if a.iter().chain(b).any(|(d, _)| d.len() != draws) {
        return Err(Error::Invalid("contrast members have different draw counts".into()));
    }
    let mean = |g: &[(&[f64], f64)]| g.iter().map(|m| m.1).sum::<f64>() / g.len() as f64;
    let difference = mean(a) - mean(b);
    let per_draw: Vec<f64> = (0..draws)
        .map(|i| {
            let ma = a.iter().map(|m| m.0[i]).sum::<f64>() / a.len() as f64;
            let mb = b.iter().map(|m| m.0[i]).sum::<f64>() / b.len() as f64;
            ma - mb
        })
        .collect();
    let sd = sample_sd(&per_draw);
    Ok(GroupContrast {
        difference,
        sd,
        ci: (difference - Z_95 * sd, difference + Z_95 * sd),
        size_a: a.len(),
        size_b: b.len(),
    })
}

/// Mean-AUROC contrast between two disjoint configuration groups, looked
/// up in `reports` (all against the same gold standard).
pub fn compare_groups(a: &[MethodConfig], b: &[MethodConfig], reports: &[AurocReport]) -> Result<GroupContrast> {
    if a.iter().any(|c| b.contains(c)) {
        return Err(Error::Invalid("contrast groups overlap".into()));
    }
    let lookup = |g: &[MethodConfig]| {
        g.iter()
            .map(|c| {
                reports
                    .iter()
                    .find(|r| r.config == *c)
                    .map(|r| (r.draws.as_slice(), r.auroc))
                    .ok_or_else(|| Error::Invalid(format!("no AUROC report for {c}")))
            })
            .collect::<Result<Vec<_>>>()
    };
    contrast_draws(&lookup(a)?, &lookup(b)?)
}
