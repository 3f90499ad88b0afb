//! Agreement between the two shipped gold standards, and the correlation
//! between the two AUROC columns of the published grid table.

use lagged_ehr::evaluate::{gold_kappa, pearson_fisher, KappaWeighting, KAPPA_RESAMPLES};
use lagged_ehr::reference::{expert_gold, knowledge_base_gold, published_grid};

fn main() -> lagged_ehr::Result<()> {
    let (kb, expert) = (knowledge_base_gold(), expert_gold());
    println!("tallies (decrease, none, increase): kb {:?} expert {:?}", kb.tally(), expert.tally());
    for w in [KappaWeighting::Unweighted, KappaWeighting::Linear, KappaWeighting::Quadratic] {
        let k = gold_kappa(&kb, &expert, w, KAPPA_RESAMPLES, 1)?;
        println!(
            "{w:?}: agreement {:.3} kappa {:.3} CI [{:.3}, {:.3}]",
            k.observed_agreement, k.kappa, k.ci.0, k.ci.1
        );
    }
    let (labels, rows) = published_grid();
    let col = |i: usize| rows.iter().map(|r| r.scores[i].0).collect::<Vec<_>>();
    let c = pearson_fisher(&col(0), &col(1))?;
    println!("{} vs {}: r {:.3} CI [{:.3}, {:.3}] over {} configs", labels[0], labels[1], c.r, c.ci.0, c.ci.1, c.n);
    Ok(())
}
