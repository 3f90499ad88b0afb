//! Content-addressed results store and the grid runner.
//!
//! Layout under the output directory:
//!
//! - `cells/<digest>.profile`: lag profile with bootstrap samples
//! - `cells/<digest>.calls`: point and per-replicate classifications
//! - `gold/<label>.csv`: copies of the gold standards used
//! - `auroc/<label>.csv`: per-configuration AUROC, sd and draws
//! - `manifest.tsv`: run parameters and the cell index
//!
//! A cell digest covers the cohort content, the pair, the configuration,
//! lag window, replicate count, seed, pipeline options and crate version,
//! so any change to those produces a new cell and reruns skip nothing
//! stale.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::cohort::{parse_gold_standard, serialize_events, Cohort, Direction, GoldStandard, PairId};
use crate::error::{Error, Result};
use crate::evaluate::{auroc_samples, gold_auroc, scheme_roc_curves, AurocReport, FoldScheme, MethodConfig};
use crate::inference::{classify_profile, classify_samples, BootstrapSpec, LagProfile, PointEstimate};
use crate::pipeline::{profile_config, CohortTimelines, PipelineOptions};
use crate::study::{fold_scheme_name, parse_fold_scheme, Study};
use crate::transform::NormalizeScope;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
const MANIFEST: &str = "manifest.tsv";

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(bytes.len() * 2), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

/// Bootstrap seed for one pair, derived from the master seed and the pair
/// identity so cohort order does not matter.
pub fn pair_seed(seed: u64, pair: &PairId) -> u64 {
    let d = Sha256::digest(format!("pair-seed\n{seed}\n{}\n{}", pair.drug, pair.lab).as_bytes());
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Everything that determines a cell's contents.
#[derive(Debug, Clone, PartialEq)]
pub struct CellKey<'a> {
    pub cohort_digest: &'a str,
    pub pair: &'a PairId,
    pub config: MethodConfig,
    pub options: PipelineOptions,
    pub replicates: usize,
    pub seed: u64,
    pub point: PointEstimate,
}

impl CellKey<'_> {
    pub fn digest(&self) -> String {
        let scope = match self.options.normalize_scope {
            NormalizeScope::LabOnly => "lab",
            NormalizeScope::AllChannels => "all",
        };
        let point = match self.point {
            PointEstimate::FullCohort => "full",
            PointEstimate::BootstrapMean => "bootstrap-mean",
        };
        let text = format!(
            "lagged-ehr cell\nversion {VERSION}\ncohort {}\ndrug {}\nlab {}\nconfig {}\nmax_lag {}\nreplicates {}\nseed {}\nnormalize {scope}\nnormalize_order {}\npoint {point}\n",
            self.cohort_digest,
            self.pair.drug,
            self.pair.lab,
            self.config.key(),
            self.options.max_lag,
            self.replicates,
            self.seed,
            self.options.normalize_order.name(),
        );
        sha256_hex(text.as_bytes())
    }
}

pub fn cohort_digest(cohort: &Cohort) -> String {
    sha256_hex(serialize_events(&cohort.patients).as_bytes())
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn direction_char(d: Direction) -> char {
    match d {
        Direction::Increase => '+',
        Direction::NoEffect => '0',
        Direction::Decrease => '-',
    }
}

fn parse_direction_char(c: char) -> Option<Direction> {
    match c {
        '+' => Some(Direction::Increase),
        '0' => Some(Direction::NoEffect),
        '-' => Some(Direction::Decrease),
        _ => None,
    }
}

fn calls_text(digest: &str, point: Direction, samples: &[Direction]) -> String {
    let s: String = samples.iter().map(|&d| direction_char(d)).collect();
    format!("# cell {digest}\ndirection {}\nsamples {s}\n", point.as_i8())
}

fn parse_calls(digest: &str, text: &str) -> Result<(Direction, Vec<Direction>)> {
    let mut lines = text.lines();
    if lines.next() != Some(&format!("# cell {digest}")) {
        return Err(Error::Store(format!("calls file header does not match digest {digest}")));
    }
    let point = lines
        .next()
        .and_then(|l| l.strip_prefix("direction "))
        .and_then(|v| v.parse::<i8>().ok())
        .and_then(Direction::from_i8)
        .ok_or_else(|| Error::Store(format!("cell {digest}: bad direction line")))?;
    let samples = lines
        .next()
        .and_then(|l| l.strip_prefix("samples "))
        .ok_or_else(|| Error::Store(format!("cell {digest}: missing samples line")))?
        .chars()
        .map(parse_direction_char)
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| Error::Store(format!("cell {digest}: bad sample directions")))?;
    Ok((point, samples))
}

/// One (pair, configuration) result.
#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub pair: PairId,
    pub config: MethodConfig,
    pub digest: String,
    /// Loaded without the replicate block.
    pub profile: LagProfile,
    pub direction: Direction,
    pub sample_directions: Vec<Direction>,
}

fn cell_paths(dir: &Path, digest: &str) -> (PathBuf, PathBuf) {
    let cells = dir.join("cells");
    (cells.join(format!("{digest}.profile")), cells.join(format!("{digest}.calls")))
}

/// Load and verify a stored cell.
pub fn load_cell(dir: &Path, pair: &PairId, config: MethodConfig, digest: &str) -> Result<CellRecord> {
    let (pp, cp) = cell_paths(dir, digest);
    let ptext = fs::read_to_string(&pp).map_err(|e| Error::io(&pp, e))?;
    let (mut profile, header, _) = LagProfile::from_text(&ptext)?;
    if header != digest {
        return Err(Error::Store(format!(
            "digest mismatch: {} declares {header}",
            pp.display()
        )));
    }
    let ctext = fs::read_to_string(&cp).map_err(|e| Error::io(&cp, e))?;
    let (direction, sample_directions) = parse_calls(digest, &ctext)?;
    if sample_directions.len() != profile.replicates() {
        return Err(Error::Store(format!("cell {digest}: calls and samples disagree in count")));
    }
    profile.samples.clear();
    profile.empty_replicates.clear();
    Ok(CellRecord {
        pair: pair.clone(),
        config,
        digest: digest.to_string(),
        profile,
        direction,
        sample_directions,
    })
}

fn cell_exists(dir: &Path, digest: &str) -> bool {
    let (p, c) = cell_paths(dir, digest);
    p.exists() && c.exists()
}

/// Parameters and index of a results directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub version: String,
    pub max_lag: usize,
    pub replicates: usize,
    pub seed: u64,
    pub fold_scheme: FoldScheme,
    pub golds: Vec<String>,
    /// `(pair, config, digest)` in run order.
    pub cells: Vec<(PairId, MethodConfig, String)>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "# lagged-ehr results\nversion\t{}\nmax_lag\t{}\nreplicates\t{}\nseed\t{}\nfold_scheme\t{}\n",
            self.version,
            self.max_lag,
            self.replicates,
            self.seed,
            fold_scheme_name(self.fold_scheme)
        );
        for g in &self.golds {
            s.push_str(&format!("gold\t{g}\n"));
        }
        for (pair, cfg, d) in &self.cells {
            s.push_str(&format!("cell\t{}\t{}\t{}\t{d}\n", pair.drug, pair.lab, cfg.key()));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let mut m = Manifest {
            version: String::new(),
            max_lag: 0,
            replicates: 0,
            seed: 0,
            fold_scheme: FoldScheme::Folded,
            golds: Vec::new(),
            cells: Vec::new(),
        };
        let bad = |i: usize, what: &str| Error::Store(format!("manifest line {}: {what}", i + 1));
        for (i, line) in text.lines().enumerate() {
            if line.starts_with('#') || line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            match (f[0], f.len()) {
                ("version", 2) => m.version = f[1].to_string(),
                ("max_lag", 2) => m.max_lag = f[1].parse().map_err(|_| bad(i, "max_lag"))?,
                ("replicates", 2) => m.replicates = f[1].parse().map_err(|_| bad(i, "replicates"))?,
                ("seed", 2) => m.seed = f[1].parse().map_err(|_| bad(i, "seed"))?,
                ("fold_scheme", 2) => m.fold_scheme = parse_fold_scheme(f[1])?,
                ("gold", 2) => m.golds.push(f[1].to_string()),
                ("cell", 5) => m.cells.push((
                    PairId::new(f[1], f[2]),
                    f[3].parse().map_err(|_| bad(i, "config key"))?,
                    f[4].to_string(),
                )),
                _ => return Err(bad(i, "unrecognized entry")),
            }
        }
        if m.version.is_empty() {
            return Err(Error::Store("manifest has no version".into()));
        }
        Ok(m)
    }
}

/// A loaded results directory.
#[derive(Debug, Clone)]
pub struct Store {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub golds: Vec<GoldStandard>,
    pub cells: Vec<CellRecord>,
}

impl Store {
    pub fn open(dir: impl AsRef<Path>) -> Result<Store> {
        let dir = dir.as_ref().to_path_buf();
        let mpath = dir.join(MANIFEST);
        let text = fs::read_to_string(&mpath)
            .map_err(|_| Error::Store(format!("{} has no manifest; run the grid first", dir.display())))?;
        let manifest = Manifest::parse(&text)?;
        let golds = manifest
            .golds
            .iter()
            .map(|label| {
                let p = dir.join("gold").join(format!("{label}.csv"));
                let t = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
                parse_gold_standard(label, &t)
            })
            .collect::<Result<Vec<_>>>()?;
        let cells = manifest
            .cells
            .par_iter()
            .map(|(pair, cfg, d)| {
                if !cell_exists(&dir, d) {
                    return Err(Error::Store(format!("incomplete store: cell {d} ({pair}, {cfg}) missing")));
                }
                load_cell(&dir, pair, *cfg, d)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Store {
            dir,
            manifest,
            golds,
            cells,
        })
    }

    /// Configurations in grid order.
    pub fn configs(&self) -> Vec<MethodConfig> {
        let mut c: Vec<MethodConfig> = self.cells.iter().map(|c| c.config).collect();
        c.sort_by_key(MethodConfig::index);
        c.dedup();
        c
    }

    pub fn cell(&self, pair: &PairId, config: MethodConfig) -> Option<&CellRecord> {
        self.cells.iter().find(|c| &c.pair == pair && c.config == config)
    }

    /// Per-configuration AUROC against every gold standard, in gold order
    /// then grid order.
    pub fn evaluate(&self) -> Result<Vec<Vec<AurocReport>>> {
        evaluate_cells(&self.cells, &self.golds, self.manifest.fold_scheme)
    }
}

pub fn evaluate_cells(
    cells: &[CellRecord],
    golds: &[GoldStandard],
    scheme: FoldScheme,
) -> Result<Vec<Vec<AurocReport>>> {
    let mut by_config: BTreeMap<usize, Vec<&CellRecord>> = BTreeMap::new();
    for c in cells {
        by_config.entry(c.config.index()).or_default().push(c);
    }
    golds
        .iter()
        .map(|gold| {
            by_config
                .values()
                .collect::<Vec<_>>()
                .par_iter()
                .map(|group| {
                    let preds: BTreeMap<PairId, Direction> =
                        group.iter().map(|c| (c.pair.clone(), c.direction)).collect();
                    let samples: BTreeMap<PairId, Vec<Direction>> =
                        group.iter().map(|c| (c.pair.clone(), c.sample_directions.clone())).collect();
                    let auroc = gold_auroc(gold, &preds, scheme)?;
                    let draws = auroc_samples(gold, &samples, scheme)?;
                    Ok(AurocReport {
                        config: group[0].config,
                        gold: gold.label.clone(),
                        auroc,
                        sd: draws.sd,
                        draws: draws.draws,
                        curves: scheme_roc_curves(gold, &preds, scheme)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

pub fn auroc_table_text(reports: &[AurocReport]) -> String {
    let mut s = String::from("config,auroc,sd,draws\n");
    for r in reports {
        let draws: Vec<String> = r.draws.iter().map(f64::to_string).collect();
        s.push_str(&format!("{},{},{},{}\n", r.config.key(), r.auroc, r.sd, draws.join(" ")));
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSummary {
    pub cells: usize,
    pub computed: usize,
    pub reused: usize,
}

/// Run every (cohort, configuration) cell of a study, reusing cells whose
/// digest is already present, then write the manifest, gold copies and
/// AUROC tables. Parallelism comes from the ambient rayon pool.
pub fn run_grid(study: &Study) -> Result<RunSummary> {
    let (cohorts, golds) = study.load_inputs()?;
    let configs = study.configs();
    if configs.is_empty() {
        return Err(Error::Config(format!("grid filter {:?} selects no configurations", study.grid)));
    }
    let dir = &study.out_dir;
    for sub in ["cells", "gold", "auroc"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let options = study.pipeline_options();
    let digests: Vec<String> = cohorts.par_iter().map(cohort_digest).collect();

    let mut cells = Vec::new();
    for (ci, cohort) in cohorts.iter().enumerate() {
        for &config in &configs {
            let key = CellKey {
                cohort_digest: &digests[ci],
                pair: &cohort.pair,
                config,
                options,
                replicates: study.replicates,
                seed: study.seed,
                point: study.point_estimate,
            };
            cells.push((ci, config, key.digest()));
        }
    }
    let missing: Vec<bool> = cells.iter().map(|(_, _, d)| !cell_exists(dir, d)).collect();
    let need_timelines: Vec<bool> = (0..cohorts.len())
        .map(|ci| cells.iter().zip(&missing).any(|((c, _, _), m)| *c == ci && *m))
        .collect();
    let timelines: Vec<Option<CohortTimelines>> = cohorts
        .par_iter()
        .zip(need_timelines.par_iter())
        .map(|(c, need)| need.then(|| CohortTimelines::build(c)))
        .collect();

    let total = cells.len();
    let done = AtomicUsize::new(0);
    let computed = AtomicUsize::new(0);
    let step = (total / 20).max(1);
    let records = cells
        .par_iter()
        .zip(missing.par_iter())
        .map(|((ci, config, digest), &miss)| {
            let pair = &cohorts[*ci].pair;
            if miss {
                let spec = BootstrapSpec {
                    replicates: study.replicates,
                    seed: pair_seed(study.seed, pair),
                    point: study.point_estimate,
                };
                let tl = timelines[*ci].as_ref().expect("timelines built for missing cells");
                let profile = profile_config(tl, config, &options, &spec)?;
                let point = classify_profile(&profile);
                let samples = classify_samples(&profile);
                let (pp, cp) = cell_paths(dir, digest);
                write_atomic(&pp, &profile.to_text(digest, spec.seed, true))?;
                write_atomic(&cp, &calls_text(digest, point, &samples))?;
                computed.fetch_add(1, Ordering::Relaxed);
            }
            let record = load_cell(dir, pair, *config, digest)?;
            let n = done.fetch_add(1, Ordering::Relaxed) + 1;
            if n.is_multiple_of(step) || n == total {
                log::info!("cells {n}/{total}");
            }
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;

    for g in &golds {
        let p = dir.join("gold").join(format!("{}.csv", g.label));
        write_atomic(&p, &g.to_text())?;
    }
    let reports = evaluate_cells(&records, &golds, study.fold_scheme)?;
    for (g, r) in golds.iter().zip(&reports) {
        let p = dir.join("auroc").join(format!("{}.csv", g.label));
        write_atomic(&p, &auroc_table_text(r))?;
    }
    let manifest = Manifest {
        version: VERSION.to_string(),
        max_lag: study.max_lag,
        replicates: study.replicates,
        seed: study.seed,
        fold_scheme: study.fold_scheme,
        golds: golds.iter().map(|g| g.label.clone()).collect(),
        cells: cells
            .iter()
            .map(|(ci, cfg, d)| (cohorts[*ci].pair.clone(), *cfg, d.clone()))
            .collect(),
    };
    write_atomic(&dir.join(MANIFEST), &manifest.to_text())?;
    let computed = computed.into_inner();
    Ok(RunSummary {
        cells: total,
        computed,
        reused: total - computed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluate::enumerate_grid;

    #[test]
    fn digest_changes_with_inputs() {
        let pair = PairId::new("d", "l");
        let key = CellKey {
            cohort_digest: "abc",
            pair: &pair,
            config: enumerate_grid()[3],
            options: PipelineOptions::default(),
            replicates: 10,
            seed: 1,
            point: PointEstimate::FullCohort,
        };
        let base = key.digest();
        assert_eq!(base.len(), 64);
        assert_eq!(base, key.clone().digest());
        assert_ne!(base, CellKey { seed: 2, ..key.clone() }.digest());
        assert_ne!(base, CellKey { replicates: 11, ..key.clone() }.digest());
        assert_ne!(base, CellKey { config: enumerate_grid()[4], ..key.clone() }.digest());
        let options = PipelineOptions {
            normalize_order: crate::pipeline::NormalizeOrder::AfterDifferencing,
            ..Default::default()
        };
        assert_ne!(base, CellKey { options, ..key.clone() }.digest());
        assert_ne!(base, CellKey { cohort_digest: "abd", ..key }.digest());
    }

    #[test]
    fn manifest_round_trip() {
        let m = Manifest {
            version: "1".into(),
            max_lag: 30,
            replicates: 5,
            seed: 3,
            fold_scheme: FoldScheme::Ordinal,
            golds: vec!["expert".into()],
            cells: vec![(PairId::new("Amphotericin B", "Potassium"), enumerate_grid()[7], "ff".into())],
        };
        assert_eq!(Manifest::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn calls_round_trip() {
        let s = [Direction::Increase, Direction::NoEffect, Direction::Decrease];
        let t = calls_text("dd", Direction::Decrease, &s);
        assert_eq!(parse_calls("dd", &t).unwrap(), (Direction::Decrease, s.to_vec()));
        assert!(parse_calls("de", &t).is_err());
    }

    #[test]
    fn pair_seed_depends_on_pair() {
        let a = PairId::new("a", "b");
        assert_eq!(pair_seed(1, &a), pair_seed(1, &a));
        assert_ne!(pair_seed(1, &a), pair_seed(2, &a));
        assert_ne!(pair_seed(1, &a), pair_seed(1, &PairId::new("a", "c")));
    }
}
