//! Folded and ordinal AUROC of ordinal predictions against a gold
//! standard, with ROC points.

use lagged_ehr::cohort::Direction;
use lagged_ehr::evaluate::{gold_auroc, scheme_roc_curves, FoldScheme, Predictions};
use lagged_ehr::reference::expert_gold;

fn main() -> lagged_ehr::Result<()> {
    let gold = expert_gold();
    let silent: Predictions = gold.entries.iter().map(|e| (e.pair.clone(), Direction::NoEffect)).collect();
    let perfect: Predictions = gold.entries.iter().map(|e| (e.pair.clone(), e.direction)).collect();
    // Flip every third call to get something in between.
    let noisy: Predictions = gold
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.pair.clone(), if i % 3 == 0 { e.direction.negate() } else { e.direction }))
        .collect();
    for (name, p) in [("all zero", &silent), ("perfect", &perfect), ("noisy", &noisy)] {
        println!(
            "{name:>9}: folded {:.3} ordinal {:.3}",
            gold_auroc(&gold, p, FoldScheme::Folded)?,
            gold_auroc(&gold, p, FoldScheme::Ordinal)?
        );
    }
    for (curve, pts) in scheme_roc_curves(&gold, &noisy, FoldScheme::Folded)? {
        println!("{curve}: {pts:?}");
    }
    Ok(())
}
