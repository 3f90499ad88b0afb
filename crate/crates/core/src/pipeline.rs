//! Applies one method configuration to a cohort: timeline construction,
//! time axis, normalization, differencing and lag fitting.

use crate::cohort::Cohort;
use crate::error::Result;
use crate::evaluate::{MethodConfig, TimeAxis};
use crate::inference::{bootstrap_stats, BootstrapSpec, LagProfile};
use crate::lagreg::{LagSpec, PooledStats};
use crate::timeline::{build_clock_timeline, resample_daily, to_sequence_time, AlignedTimeline};
use crate::transform::{difference, normalize_patient, NormalizeScope};

/// Whether z-scoring sees levels or first differences when a configuration
/// uses both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizeOrder {
    #[default]
    BeforeDifferencing,
    AfterDifferencing,
}

impl NormalizeOrder {
    pub fn name(self) -> &'static str {
        match self {
            NormalizeOrder::BeforeDifferencing => "before-diff",
            NormalizeOrder::AfterDifferencing => "after-diff",
        }
    }
}

impl std::str::FromStr for NormalizeOrder {
    type Err = crate::error::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "before-diff" => Ok(NormalizeOrder::BeforeDifferencing),
            "after-diff" => Ok(NormalizeOrder::AfterDifferencing),
            _ => Err(crate::error::Error::Config(format!(
                "normalize_order must be before-diff or after-diff, got {s:?}"
            ))),
        }
    }
}

/// Knobs shared by every configuration in a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PipelineOptions {
    pub max_lag: usize,
    pub normalize_scope: NormalizeScope,
    pub normalize_order: NormalizeOrder,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            max_lag: crate::lagreg::DEFAULT_MAX_LAG,
            normalize_scope: NormalizeScope::LabOnly,
            normalize_order: NormalizeOrder::BeforeDifferencing,
        }
    }
}

/// Clock-time timelines for one cohort, built once per binning choice.
#[derive(Debug, Clone)]
pub struct CohortTimelines {
    pub unbinned: Vec<AlignedTimeline>,
    pub binned: Vec<AlignedTimeline>,
}

impl CohortTimelines {
    pub fn build(cohort: &Cohort) -> Self {
        CohortTimelines {
            unbinned: cohort.patients.iter().map(|p| build_clock_timeline(p, false)).collect(),
            binned: cohort.patients.iter().map(|p| build_clock_timeline(p, true)).collect(),
        }
    }
}

/// Apply the non-binning steps of `config` to one clock timeline. A patient
/// too short to difference yields an empty timeline so patient indices stay
/// aligned with the cohort.
pub fn prepare_timeline(clock: &AlignedTimeline, config: &MethodConfig, options: &PipelineOptions) -> AlignedTimeline {
    let mut tl = match config.time {
        TimeAxis::Real => resample_daily(clock),
        TimeAxis::Sequence => to_sequence_time(clock.clone()),
    };
    let late = options.normalize_order == NormalizeOrder::AfterDifferencing;
    if config.normalized && !late {
        tl = normalize_patient(tl, options.normalize_scope).0;
    }
    if config.differenced {
        tl = difference(&tl).unwrap_or_else(|| AlignedTimeline {
            patient_id: tl.patient_id.clone(),
            parameterization: tl.parameterization,
            times: Vec::new(),
            y: Vec::new(),
            x: Vec::new(),
            z: Vec::new(),
        });
    }
    if config.normalized && late && !tl.is_empty() {
        tl = normalize_patient(tl, options.normalize_scope).0;
    }
    tl
}

/// One prepared timeline per cohort patient, in cohort order.
pub fn prepare_cohort(timelines: &CohortTimelines, config: &MethodConfig, options: &PipelineOptions) -> Vec<AlignedTimeline> {
    let src = if config.binned { &timelines.binned } else { &timelines.unbinned };
    src.iter().map(|tl| prepare_timeline(tl, config, options)).collect()
}

pub fn lag_spec(config: &MethodConfig, options: &PipelineOptions) -> LagSpec {
    LagSpec::new(options.max_lag, config.model, config.context)
}

/// Bootstrap lag profile for one configuration.
pub fn profile_config(
    timelines: &CohortTimelines,
    config: &MethodConfig,
    options: &PipelineOptions,
    bootstrap: &BootstrapSpec,
) -> Result<LagProfile> {
    let prepared = prepare_cohort(timelines, config, options);
    let stats = PooledStats::new(&prepared, &lag_spec(config, options));
    bootstrap_stats(&stats, bootstrap)
}

/// Convenience wrapper building the timelines first.
pub fn bootstrap_profiles(
    cohort: &Cohort,
    config: &MethodConfig,
    options: &PipelineOptions,
    bootstrap: &BootstrapSpec,
) -> Result<LagProfile> {
    profile_config(&CohortTimelines::build(cohort), config, options, bootstrap)
}
