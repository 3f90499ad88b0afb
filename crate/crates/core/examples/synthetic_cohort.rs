//! Synthetic cohort generation: planted effects, informed sampling and the
//! 28-pair reference design.

use lagged_ehr::cohort::{Channel, Direction, PairId};
use lagged_ehr::synth::{generate_cohort_detailed, generate_grid_study, reference_specs, SynthSpec};

fn main() -> lagged_ehr::Result<()> {
    let spec = SynthSpec { patients: 200, effect_direction: Direction::Decrease, seed: 5, ..SynthSpec::default() };
    let patients = generate_cohort_detailed(&spec, &PairId::new("d", "l"))?;
    // Mean measured lab 5 days after vs 5 days before each target order.
    let day = 86_400;
    let mut contrasts = Vec::new();
    for p in &patients {
        let labs: Vec<_> = p.events.events.iter().filter(|e| e.channel == Channel::Lab).collect();
        for o in p.events.events.iter().filter(|e| e.channel == Channel::TargetDrug) {
            let mean = |lo: i64, hi: i64| {
                let v: Vec<f64> = labs.iter().filter(|e| e.time >= lo && e.time < hi).filter_map(|e| e.value).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            };
            if let (Some(pre), Some(post)) = (mean(o.time - 5 * day, o.time), mean(o.time, o.time + 5 * day)) {
                contrasts.push(post - pre);
            }
        }
    }
    let m = contrasts.iter().sum::<f64>() / contrasts.len() as f64;
    println!("planted decrease: mean post-minus-pre {m:+.3} over {} orders", contrasts.len());
    let events: usize = patients.iter().map(|p| p.events.events.len()).sum();
    println!("{} patients, {:.1} events each", patients.len(), events as f64 / patients.len() as f64);

    let study = generate_grid_study(&reference_specs(&SynthSpec { patients: 30, ..SynthSpec::default() }, 1)?)?;
    println!("reference design: {} cohorts, gold tally {:?}", study.cohorts.len(), study.gold.tally());
    Ok(())
}
