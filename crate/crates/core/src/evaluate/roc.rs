//! Two-threshold ROC scoring of directional predictions against a gold
//! standard.

use std::collections::BTreeMap;

use crate::cohort::{Direction, GoldStandard, PairId};
use crate::error::{Error, Result};
use crate::evaluate::sample_sd;

/// Decision thresholds on the {-1, 0, +1} score scale.
pub const ROC_THRESHOLDS: [f64; 2] = [-0.5, 0.5];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoredPair {
    pub positive: bool,
    pub score: i8,
}

/// How ordinal gold and predictions become a binary task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FoldScheme {
    /// Gold effects are positives scored `prediction * sign(gold)`; gold
    /// zeros are negatives scored `|prediction|`.
    #[default]
    Folded,
    /// Mean of the "increase" task (gold +1 vs rest, score = prediction) and
    /// the "decrease" task (gold -1 vs rest, score = -prediction).
    Ordinal,
}

pub type Predictions = BTreeMap<PairId, Direction>;

/// A labelled ROC curve as `(fpr, tpr)` points.
pub type NamedCurve = (String, Vec<(f64, f64)>);

pub fn fold_pairs(gold: &GoldStandard, predictions: &Predictions) -> Result<Vec<ScoredPair>> {
    gold.entries
        .iter()
        .map(|e| {
            let pred = predictions
                .get(&e.pair)
                .ok_or_else(|| Error::Invalid(format!("no prediction for gold pair {}", e.pair)))?
                .as_i8();
            Ok(match e.direction {
                Direction::NoEffect => ScoredPair {
                    positive: false,
                    score: pred.abs(),
                },
                g => ScoredPair {
                    positive: true,
                    score: pred * g.as_i8(),
                },
            })
        })
        .collect()
}

/// ROC points `(fpr, tpr)` at each threshold, with the (0,0) and (1,1)
/// anchors, sorted by FPR.
pub fn roc_points(pairs: &[ScoredPair]) -> Result<Vec<(f64, f64)>> {
    let pos = pairs.iter().filter(|p| p.positive).count();
    let neg = pairs.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateGold(format!("{pos} positives and {neg} negatives")));
    }
    let mut pts = vec![(0.0, 0.0)];
    for thr in ROC_THRESHOLDS {
        let above = |want: bool| {
            pairs
                .iter()
                .filter(|p| p.positive == want && p.score as f64 > thr)
                .count()
        };
        pts.push((above(false) as f64 / neg as f64, above(true) as f64 / pos as f64));
    }
    pts.push((1.0, 1.0));
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    Ok(pts)
}

/// Trapezoidal area under the two-threshold ROC curve.
pub fn auroc(pairs: &[ScoredPair]) -> Result<f64> {
    let pts = roc_points(pairs)?;
    Ok(pts
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum())
}

fn one_vs_rest(gold: &GoldStandard, predictions: &Predictions, target: Direction) -> Result<Vec<ScoredPair>> {
    gold.entries
        .iter()
        .map(|e| {
            let pred = predictions
                .get(&e.pair)
                .ok_or_else(|| Error::Invalid(format!("no prediction for gold pair {}", e.pair)))?
                .as_i8();
            Ok(ScoredPair {
                positive: e.direction == target,
                score: pred * target.as_i8(),
            })
        })
        .collect()
}

pub fn gold_auroc(gold: &GoldStandard, predictions: &Predictions, scheme: FoldScheme) -> Result<f64> {
    match scheme {
        FoldScheme::Folded => auroc(&fold_pairs(gold, predictions)?),
        FoldScheme::Ordinal => {
            let mut areas = Vec::new();
            for target in [Direction::Increase, Direction::Decrease] {
                match auroc(&one_vs_rest(gold, predictions, target)?) {
                    Ok(a) => areas.push(a),
                    Err(Error::DegenerateGold(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            if areas.is_empty() {
                return Err(Error::DegenerateGold("no directional gold entries".into()));
            }
            Ok(areas.iter().sum::<f64>() / areas.len() as f64)
        }
    }
}

/// ROC curves behind [`gold_auroc`]: one `folded` curve, or `increase` and
/// `decrease` curves for the ordinal scheme (skipping degenerate tasks).
pub fn scheme_roc_curves(
    gold: &GoldStandard,
    predictions: &Predictions,
    scheme: FoldScheme,
) -> Result<Vec<NamedCurve>> {
    match scheme {
        FoldScheme::Folded => Ok(vec![("folded".into(), roc_points(&fold_pairs(gold, predictions)?)?)]),
        FoldScheme::Ordinal => {
            let mut out = Vec::new();
            for (name, target) in [("increase", Direction::Increase), ("decrease", Direction::Decrease)] {
                match roc_points(&one_vs_rest(gold, predictions, target)?) {
                    Ok(p) => out.push((name.to_string(), p)),
                    Err(Error::DegenerateGold(_)) => {}
                    Err(e) => return Err(e),
                }
            }
            Ok(out)
        }
    }
}

/// AUROC draws from per-pair bootstrap classifications: draw `b` scores
/// the `b`-th direction of every pair.
#[derive(Debug, Clone, PartialEq)]
pub struct AurocDraws {
    pub draws: Vec<f64>,
    pub sd: f64,
}

pub fn auroc_samples(
    gold: &GoldStandard,
    samples: &BTreeMap<PairId, Vec<Direction>>,
    scheme: FoldScheme,
) -> Result<AurocDraws> {
    let mut count = None;
    for e in &gold.entries {
        let s = samples
            .get(&e.pair)
            .ok_or_else(|| Error::Invalid(format!("no samples for gold pair {}", e.pair)))?;
        match count {
            None => count = Some(s.len()),
            Some(c) if c != s.len() => {
                return Err(Error::Invalid(format!(
                    "pair {} has {} samples, expected {c}",
                    e.pair,
                    s.len()
                )))
            }
            _ => {}
        }
    }
    let b = count.unwrap_or(0);
    let draws = (0..b)
        .map(|i| {
            let preds: Predictions = gold
                .entries
                .iter()
                .map(|e| (e.pair.clone(), samples[&e.pair][i]))
                .collect();
            gold_auroc(gold, &preds, scheme)
        })
        .collect::<Result<Vec<_>>>()?;
    let sd = sample_sd(&draws);
    Ok(AurocDraws { draws, sd })
}
