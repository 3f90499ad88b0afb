//! Study configuration files.
//!
//! A study names its inputs (event files or a synthetic section), gold
//! standards, the lag window, bootstrap size, master seed, an optional grid
//! restriction and the output directory. Relative paths resolve against the
//! study file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::cohort::{
    filter_eligible, ingest_events, load_gold_standard, serialize_events, Cohort, GoldStandard, PairId,
};
use crate::error::{Error, Result};
use crate::evaluate::{FoldScheme, GridFilter, MethodConfig};
use crate::inference::{PointEstimate, DEFAULT_REPLICATES};
use crate::lagreg::DEFAULT_MAX_LAG;
use crate::pipeline::{NormalizeOrder, PipelineOptions};
use crate::synth::{generate_grid_study, reference_specs, SynthSpec};
use crate::transform::NormalizeScope;

/// Default study shipped with the crate: the 28-pair synthetic design.
pub const DEFAULT_STUDY: &str = include_str!("../data/default_study.toml");

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct StudyFile {
    out_dir: Option<String>,
    max_lag: Option<usize>,
    replicates: Option<usize>,
    seed: Option<u64>,
    grid: Option<String>,
    fold_scheme: Option<String>,
    normalize_scope: Option<String>,
    normalize_order: Option<String>,
    point_estimate: Option<String>,
    #[serde(default)]
    gold: Vec<GoldRef>,
    #[serde(default)]
    cohort: Vec<CohortRef>,
    synth: Option<SynthSection>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct GoldRef {
    label: String,
    path: String,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct CohortRef {
    drug: String,
    lab: String,
    path: String,
}

#[derive(Debug, Clone, Default, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
struct SynthSection {
    seed: Option<u64>,
    patients: Option<usize>,
    mean_events_per_patient: Option<f64>,
    effect_magnitude: Option<f64>,
    effect_onset: Option<f64>,
    effect_decay: Option<f64>,
    baseline_sd: Option<f64>,
    walk_sd: Option<f64>,
    noise_sd: Option<f64>,
    sampling_bias: Option<f64>,
    admission_rate: Option<f64>,
    span_days: Option<f64>,
}

impl SynthSection {
    fn to_spec(&self) -> SynthSpec {
        let d = SynthSpec::default();
        SynthSpec {
            patients: self.patients.unwrap_or(d.patients),
            mean_events_per_patient: self.mean_events_per_patient.unwrap_or(d.mean_events_per_patient),
            effect_magnitude: self.effect_magnitude.unwrap_or(d.effect_magnitude),
            effect_onset: self.effect_onset.unwrap_or(d.effect_onset),
            effect_decay: self.effect_decay.unwrap_or(d.effect_decay),
            baseline_sd: self.baseline_sd.unwrap_or(d.baseline_sd),
            walk_sd: self.walk_sd.unwrap_or(d.walk_sd),
            noise_sd: self.noise_sd.unwrap_or(d.noise_sd),
            sampling_bias: self.sampling_bias.unwrap_or(d.sampling_bias),
            admission_rate: self.admission_rate.unwrap_or(d.admission_rate),
            span_days: self.span_days.unwrap_or(d.span_days),
            ..d
        }
    }
}

/// Where cohorts come from.
#[derive(Debug, Clone, PartialEq)]
pub enum StudyInput {
    Files(Vec<(PairId, PathBuf)>),
    /// Base spec and data seed for the 28 reference pairs.
    Synthetic { base: SynthSpec, data_seed: u64 },
}

/// A resolved study.
#[derive(Debug, Clone, PartialEq)]
pub struct Study {
    pub out_dir: PathBuf,
    pub max_lag: usize,
    pub replicates: usize,
    pub seed: u64,
    pub grid: String,
    pub fold_scheme: FoldScheme,
    pub normalize_scope: NormalizeScope,
    pub normalize_order: NormalizeOrder,
    pub point_estimate: PointEstimate,
    pub golds: Vec<(String, PathBuf)>,
    pub input: StudyInput,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub grid: Option<String>,
}

pub fn parse_fold_scheme(s: &str) -> Result<FoldScheme> {
    match s {
        "folded" => Ok(FoldScheme::Folded),
        "ordinal" => Ok(FoldScheme::Ordinal),
        _ => Err(Error::Config(format!("fold_scheme must be folded or ordinal, got {s:?}"))),
    }
}

pub fn fold_scheme_name(s: FoldScheme) -> &'static str {
    match s {
        FoldScheme::Folded => "folded",
        FoldScheme::Ordinal => "ordinal",
    }
}

impl Study {
    /// Parse study text; `base_dir` anchors relative paths.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Study> {
        let file: StudyFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let resolve = |p: &str| {
            let p = PathBuf::from(p);
            if p.is_absolute() {
                p
            } else {
                base_dir.join(p)
            }
        };
        let input = match (&file.synth, file.cohort.is_empty()) {
            (Some(_), false) => {
                return Err(Error::Config("a study takes either [synth] or [[cohort]] entries, not both".into()))
            }
            (None, true) => return Err(Error::Config("study names no cohorts and no [synth] section".into())),
            (Some(s), true) => StudyInput::Synthetic {
                base: s.to_spec(),
                data_seed: s.seed.or(file.seed).unwrap_or(1),
            },
            (None, false) => StudyInput::Files(
                file.cohort
                    .iter()
                    .map(|c| (PairId::new(c.drug.clone(), c.lab.clone()), resolve(&c.path)))
                    .collect(),
            ),
        };
        if let StudyInput::Synthetic { base, .. } = &input {
            base.validate()?;
        }
        let mut golds: Vec<(String, PathBuf)> = file.gold.iter().map(|g| (g.label.clone(), resolve(&g.path))).collect();
        let mut labels: Vec<&str> = golds.iter().map(|g| g.0.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("gold labels must be unique".into()));
        }
        if golds.iter().any(|g| !valid_label(&g.0)) {
            return Err(Error::Config("gold labels may use only letters, digits, '-' and '_'".into()));
        }
        if golds.is_empty() && !matches!(input, StudyInput::Synthetic { .. }) {
            return Err(Error::Config("study names no gold standard".into()));
        }
        if matches!(input, StudyInput::Synthetic { .. }) && !golds.iter().any(|g| g.0 == "synthetic") {
            golds.insert(0, ("synthetic".into(), PathBuf::new()));
        }
        let max_lag = file.max_lag.unwrap_or(DEFAULT_MAX_LAG);
        if max_lag == 0 {
            return Err(Error::Config("max_lag must be at least 1".into()));
        }
        let replicates = file.replicates.unwrap_or(DEFAULT_REPLICATES);
        if replicates < 2 {
            return Err(Error::Config("replicates must be at least 2".into()));
        }
        let grid = file.grid.unwrap_or_else(|| "all".into());
        grid.parse::<GridFilter>()?;
        Ok(Study {
            out_dir: resolve(file.out_dir.as_deref().unwrap_or("results")),
            max_lag,
            replicates,
            seed: file.seed.unwrap_or(1),
            grid,
            fold_scheme: parse_fold_scheme(file.fold_scheme.as_deref().unwrap_or("folded"))?,
            normalize_scope: match file.normalize_scope.as_deref().unwrap_or("lab") {
                "lab" => NormalizeScope::LabOnly,
                "all" => NormalizeScope::AllChannels,
                other => return Err(Error::Config(format!("normalize_scope must be lab or all, got {other:?}"))),
            },
            normalize_order: file.normalize_order.as_deref().unwrap_or("before-diff").parse()?,
            point_estimate: match file.point_estimate.as_deref().unwrap_or("full") {
                "full" => PointEstimate::FullCohort,
                "bootstrap-mean" => PointEstimate::BootstrapMean,
                other => {
                    return Err(Error::Config(format!(
                        "point_estimate must be full or bootstrap-mean, got {other:?}"
                    )))
                }
            },
            golds,
            input,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Study> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Study::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if let Some(d) = &o.out_dir {
            self.out_dir = d.clone();
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(b) = o.replicates {
            if b < 2 {
                return Err(Error::Config("replicates must be at least 2".into()));
            }
            self.replicates = b;
        }
        if let Some(g) = &o.grid {
            g.parse::<GridFilter>()?;
            self.grid = g.clone();
        }
        Ok(())
    }

    pub fn configs(&self) -> Vec<MethodConfig> {
        self.grid.parse::<GridFilter>().expect("validated at load").select()
    }

    pub fn pipeline_options(&self) -> PipelineOptions {
        PipelineOptions {
            max_lag: self.max_lag,
            normalize_scope: self.normalize_scope,
            normalize_order: self.normalize_order,
        }
    }

    /// Materialize cohorts and gold standards.
    pub fn load_inputs(&self) -> Result<(Vec<Cohort>, Vec<GoldStandard>)> {
        let (cohorts, synthetic_gold) = match &self.input {
            StudyInput::Files(files) => {
                let mut cohorts = Vec::new();
                for (pair, path) in files {
                    let candidate = ingest_events(path)?;
                    let (cohort, report) = filter_eligible(candidate, pair.clone(), path.display().to_string());
                    log::info!("{pair}: {} eligible, {} dropped", report.retained, report.dropped);
                    if cohort.patients.is_empty() {
                        return Err(Error::InsufficientData(format!("{pair}: no eligible patients")));
                    }
                    cohorts.push(cohort);
                }
                (cohorts, None)
            }
            StudyInput::Synthetic { base, data_seed } => {
                let study = generate_grid_study(&reference_specs(base, *data_seed)?)?;
                (study.cohorts, Some(study.gold))
            }
        };
        let mut pairs: Vec<&PairId> = cohorts.iter().map(|c| &c.pair).collect();
        pairs.sort();
        if pairs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate cohort pair".into()));
        }
        let mut golds = Vec::new();
        for (label, path) in &self.golds {
            let g = if label == "synthetic" && path.as_os_str().is_empty() {
                synthetic_gold
                    .clone()
                    .ok_or_else(|| Error::Config("gold 'synthetic' needs a path outside synthetic studies".into()))?
            } else {
                load_gold_standard(label, path)?
            };
            for e in &g.entries {
                if !cohorts.iter().any(|c| c.pair == e.pair) {
                    return Err(Error::Config(format!("gold {label}: no cohort for pair {}", e.pair)));
                }
            }
            golds.push(g);
        }
        Ok((cohorts, golds))
    }
}

impl Study {
    /// Write the study's cohorts and gold standards as files under `dir`,
    /// plus a `study.toml` that reads them back. The new study keeps every
    /// run setting and writes results to `dir/results`.
    pub fn materialize(&self, dir: &Path) -> Result<PathBuf> {
        let (cohorts, golds) = self.load_inputs()?;
        for sub in ["cohorts", "gold"] {
            let p = dir.join(sub);
            std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        }
        let quote = |s: &str| toml::Value::String(s.to_string()).to_string();
        let mut text = format!(
            "out_dir = \"results\"\nmax_lag = {}\nreplicates = {}\nseed = {}\ngrid = {}\nfold_scheme = {}\nnormalize_scope = {}\nnormalize_order = {}\npoint_estimate = {}\n",
            self.max_lag,
            self.replicates,
            self.seed,
            quote(&self.grid),
            quote(fold_scheme_name(self.fold_scheme)),
            quote(match self.normalize_scope {
                NormalizeScope::LabOnly => "lab",
                NormalizeScope::AllChannels => "all",
            }),
            quote(self.normalize_order.name()),
            quote(match self.point_estimate {
                PointEstimate::FullCohort => "full",
                PointEstimate::BootstrapMean => "bootstrap-mean",
            }),
        );
        for g in &golds {
            let rel = format!("gold/{}.csv", g.label);
            let p = dir.join(&rel);
            std::fs::write(&p, g.to_text()).map_err(|e| Error::io(&p, e))?;
            text.push_str(&format!("\n[[gold]]\nlabel = {}\npath = {}\n", quote(&g.label), quote(&rel)));
        }
        for c in &cohorts {
            let rel = format!("cohorts/{}.csv", c.pair.slug());
            let p = dir.join(&rel);
            std::fs::write(&p, serialize_events(&c.patients)).map_err(|e| Error::io(&p, e))?;
            text.push_str(&format!(
                "\n[[cohort]]\ndrug = {}\nlab = {}\npath = {}\n",
                quote(&c.pair.drug),
                quote(&c.pair.lab),
                quote(&rel)
            ));
        }
        let p = dir.join("study.toml");
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }
}

pub(crate) fn valid_label(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_study_parses() {
        let s = Study::parse(DEFAULT_STUDY, Path::new("/base")).unwrap();
        assert!(matches!(s.input, StudyInput::Synthetic { .. }));
        assert_eq!(s.golds[0].0, "synthetic");
        assert_eq!(s.configs().len(), 64);
    }

    #[test]
    fn file_study_resolves_paths() {
        let text = r#"
out_dir = "out"
replicates = 10
grid = "time=seq"

[[gold]]
label = "expert"
path = "g.csv"

[[cohort]]
drug = "D"
lab = "L"
path = "/abs/c.csv"
"#;
        let mut s = Study::parse(text, Path::new("/base")).unwrap();
        assert_eq!(s.out_dir, PathBuf::from("/base/out"));
        assert_eq!(s.golds, vec![("expert".to_string(), PathBuf::from("/base/g.csv"))]);
        assert_eq!(s.configs().len(), 32);
        s.apply(&Overrides {
            seed: Some(9),
            grid: Some("all".into()),
            ..Default::default()
        })
        .unwrap();
        assert_eq!((s.seed, s.configs().len()), (9, 64));
    }

    #[test]
    fn rejects_bad_studies() {
        let base = Path::new(".");
        assert!(Study::parse("replicates = 1\n[synth]\n", base).is_err());
        assert!(Study::parse("bogus = 1\n[synth]\n", base).is_err());
        assert!(Study::parse("seed = 1\n", base).is_err());
        assert!(Study::parse("grid = \"time=soon\"\n[synth]\n", base).is_err());
        assert!(Study::parse("[synth]\nsampling_bias = 2.0\n", base).is_err());
    }

    #[test]
    fn materialized_study_reloads_same_inputs() {
        let text = "replicates = 7\ngrid = \"time=seq\"\n[synth]\npatients = 40\n";
        let s = Study::parse(text, Path::new(".")).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = s.materialize(dir.path()).unwrap();
        let t = Study::load(&path).unwrap();
        assert_eq!((t.replicates, t.configs().len()), (7, 32));
        assert_eq!(t.out_dir, dir.path().join("results"));
        let (a, ga) = s.load_inputs().unwrap();
        let (b, gb) = t.load_inputs().unwrap();
        assert_eq!(a.len(), 28);
        assert!(a.iter().zip(&b).all(|(x, y)| x.pair == y.pair && x.patients == y.patients));
        assert_eq!(ga[0].entries, gb[0].entries);
    }
}
