use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lagged_ehr::cohort::{ingest_events, is_eligible, load_gold_standard, GoldStandard};
use lagged_ehr::evaluate::{gold_kappa, GridFilter, KappaWeighting, KAPPA_RESAMPLES};
use lagged_ehr::reference::{expert_gold, knowledge_base_gold};
use lagged_ehr::report::{compare, write_report};
use lagged_ehr::store::{run_grid, Store};
use lagged_ehr::study::{Overrides, Study, StudyInput, DEFAULT_STUDY};
use lagged_ehr::{Error, Result};

#[derive(Parser)]
#[command(name = "lagged-ehr", version, about = "Lagged regression method grid over clinical event streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct StudyArgs {
    /// Study file; the built-in synthetic study when omitted.
    #[arg(long)]
    study: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Filter over the six axes, e.g. "time=seq,model=joint | diff=no".
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic study's cohorts, gold standard and study file.
    Synth {
        #[arg(long)]
        study: Option<PathBuf>,
        #[arg(long, default_value = "synthetic-study")]
        out: PathBuf,
        /// Data seed of the generator.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate event files and report eligibility counts.
    Ingest {
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run the configuration grid with bootstrap into a results store.
    Run {
        #[command(flatten)]
        study: StudyArgs,
        /// Worker threads; defaults to available parallelism.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write report tables and plot data for a results store.
    Report {
        #[command(flatten)]
        study: StudyArgs,
    },
    /// Contrast two configuration groups in a results store.
    Compare {
        #[command(flatten)]
        study: StudyArgs,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
    },
    /// Agreement between two gold standards.
    Kappa {
        /// Defaults to the shipped knowledge-base standard.
        #[arg(long)]
        first: Option<PathBuf>,
        /// Defaults to the shipped expert standard.
        #[arg(long)]
        second: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Weighting::Unweighted)]
        weighting: Weighting,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Weighting {
    Unweighted,
    Linear,
    Quadratic,
}

fn load_study(path: Option<&Path>) -> Result<Study> {
    match path {
        Some(p) => Study::load(p),
        None => Study::parse(DEFAULT_STUDY, Path::new(".")),
    }
}

impl StudyArgs {
    fn resolve(&self) -> Result<Study> {
        let mut s = load_study(self.study.as_deref())?;
        s.apply(&Overrides {
            out_dir: self.out.clone(),
            seed: self.seed,
            replicates: self.replicates,
            grid: self.grid.clone(),
        })?;
        Ok(s)
    }

    /// Results directory: `--out` when given, else the study's.
    fn store_dir(&self) -> Result<PathBuf> {
        match &self.out {
            Some(d) => Ok(d.clone()),
            None => Ok(load_study(self.study.as_deref())?.out_dir),
        }
    }
}

fn gold_or(path: Option<&Path>, label: &str, fallback: fn() -> GoldStandard) -> Result<GoldStandard> {
    match path {
        Some(p) => load_gold_standard(label, p),
        None => Ok(fallback()),
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth { study, out, seed } => {
            let mut s = load_study(study.as_deref())?;
            let StudyInput::Synthetic { data_seed, .. } = &mut s.input else {
                return Err(Error::Config("synth needs a study with a [synth] section".into()));
            };
            if let Some(seed) = seed {
                *data_seed = seed;
            }
            let path = s.materialize(&out)?;
            println!("wrote {}", path.display());
        }
        Command::Ingest { files } => {
            for f in files {
                let c = ingest_events(&f)?;
                let eligible = c.patients.iter().filter(|p| is_eligible(p)).count();
                let events: usize = c.patients.iter().map(|p| p.events.len()).sum();
                println!(
                    "{}: {} patients, {} events, {} eligible",
                    f.display(),
                    c.patients.len(),
                    events,
                    eligible
                );
            }
        }
        Command::Run { study, workers } => {
            let s = study.resolve()?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers.unwrap_or(0))
                .build()
                .map_err(|e| Error::Invalid(format!("worker pool: {e}")))?;
            let summary = pool.install(|| run_grid(&s))?;
            println!(
                "{} cells ({} computed, {} reused) in {}",
                summary.cells,
                summary.computed,
                summary.reused,
                s.out_dir.display()
            );
        }
        Command::Report { study } => {
            let store = Store::open(study.store_dir()?)?;
            for p in write_report(&store)? {
                println!("wrote {}", p.display());
            }
        }
        Command::Compare { study, a, b } => {
            let store = Store::open(study.store_dir()?)?;
            let (fa, fb): (GridFilter, GridFilter) = (a.parse()?, b.parse()?);
            println!("gold,difference,sd,ci_low,ci_high,size_a,size_b");
            for (gold, c) in compare(&store, &fa, &fb)? {
                match c {
                    Some(c) => println!(
                        "{gold},{:.4},{:.4},{:.4},{:.4},{},{}",
                        c.difference, c.sd, c.ci.0, c.ci.1, c.size_a, c.size_b
                    ),
                    None => println!("{gold},,,,,0,0"),
                }
            }
        }
        Command::Kappa {
            first,
            second,
            weighting,
            seed,
        } => {
            let a = gold_or(first.as_deref(), "first", knowledge_base_gold)?;
            let b = gold_or(second.as_deref(), "second", expert_gold)?;
            let w = match weighting {
                Weighting::Unweighted => KappaWeighting::Unweighted,
                Weighting::Linear => KappaWeighting::Linear,
                Weighting::Quadratic => KappaWeighting::Quadratic,
            };
            let k = gold_kappa(&a, &b, w, KAPPA_RESAMPLES, seed)?;
            println!(
                "items {}\nobserved agreement {:.4}\nexpected agreement {:.4}\nkappa {:.4}\n95% CI [{:.4}, {:.4}]",
                k.items, k.observed_agreement, k.expected_agreement, k.kappa, k.ci.0, k.ci.1
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
