//! End-to-end grid run on a small synthetic study: content-addressed store,
//! resumption, AUROC per configuration and the report files.
//!
//! `cargo run --release --example grid_run [out_dir]`

use lagged_ehr::report::{canonical_contrasts, run_contrast, write_report};
use lagged_ehr::store::{run_grid, Store};
use lagged_ehr::study::Study;

const STUDY: &str = r#"
max_lag = 30
replicates = 20
seed = 1
grid = "time=seq,ctx=no"

[synth]
patients = 80
"#;

fn main() -> lagged_ehr::Result<()> {
    env_logger::init();
    let out = std::env::args().nth(1).unwrap_or_else(|| "grid-run-example".into());
    let mut study = Study::parse(STUDY, std::path::Path::new("."))?;
    study.out_dir = out.into();

    let first = run_grid(&study)?;
    let again = run_grid(&study)?;
    println!("first run computed {}, second run reused {}", first.computed, again.reused);

    let store = Store::open(&study.out_dir)?;
    let reports = store.evaluate()?;
    for r in &reports[0] {
        println!("{:<36} AUROC {:.3} (sd {:.3})", r.config.key(), r.auroc, r.sd);
    }
    for spec in canonical_contrasts() {
        if let Some(c) = run_contrast(&spec, &reports[0])? {
            println!("{}: {:+.3} [{:+.3}, {:+.3}]", spec.name, c.difference, c.ci.0, c.ci.1);
        }
    }
    for p in write_report(&store)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
