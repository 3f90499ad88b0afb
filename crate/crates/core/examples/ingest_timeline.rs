//! Parse an event file, screen eligibility and walk one patient through
//! the timeline and transform stages.

use lagged_ehr::cohort::{filter_eligible, parse_events, serialize_events, PairId};
use lagged_ehr::timeline::{build_clock_timeline, resample_daily, to_sequence_time};
use lagged_ehr::transform::{difference, normalize_patient, NormalizeScope};

fn main() -> lagged_ehr::Result<()> {
    // Patient "a" has 33 countable events; "b" has too few and is dropped.
    let mut text = String::from("patient_id,time_seconds,channel,value\n");
    for i in 0..28 {
        text.push_str(&format!("a,{},LAB,{}\n", i * 21_600, 1.0 + (i % 5) as f64 * 0.1));
    }
    for (t, ch) in [(0, "ADMISSION"), (40_000, "TARGET_DRUG"), (90_000, "TARGET_DRUG"), (300_000, "OTHER_DRUG"), (320_000, "TARGET_DRUG"), (480_000, "OTHER_DRUG")] {
        text.push_str(&format!("a,{t},{ch},\n"));
    }
    text.push_str("b,0,LAB,2.0\nb,100,TARGET_DRUG,\n");

    let candidate = parse_events(&text)?;
    // Serialization is canonical (time-ordered), so a second pass is stable.
    let canonical = serialize_events(&candidate.patients);
    assert_eq!(serialize_events(&parse_events(&canonical)?.patients), canonical);
    let (cohort, report) = filter_eligible(candidate, PairId::new("warfarin", "inr"), "inline");
    println!("eligible {} dropped {}", report.retained, report.dropped);

    let patient = &cohort.patients[0];
    let plain = build_clock_timeline(patient, false);
    let binned = build_clock_timeline(patient, true);
    println!("clock points {}; drug channel sum {:.2} unbinned vs {:.2} binned", plain.len(), plain.x.iter().sum::<f64>(), binned.x.iter().sum::<f64>());

    let daily = resample_daily(&plain);
    println!("daily grid: {} points", daily.len());

    let seq = to_sequence_time(plain);
    let (norm, flags) = normalize_patient(seq, NormalizeScope::LabOnly);
    let diffed = difference(&norm).expect("long enough to difference");
    println!("sequence/normalized/differenced: {} points, degenerate {:?}", diffed.len(), flags.any());
    print!("{}", diffed.to_text().lines().take(6).collect::<Vec<_>>().join("\n"));
    println!();
    Ok(())
}
