//! Synthetic cohorts with a planted drug effect, informed lab sampling and
//! admission-driven order bursts.
//!
//! Lab values follow a latent process (patient baseline + random walk +
//! drug response). Orders cluster around admissions, labs are sampled more
//! often while the latent value is far from baseline, and measurements add
//! white noise. Lab units are chosen so the effect magnitude is expressed in
//! standard deviations of the measured lab.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::cohort::{
    is_eligible, parse_gold_standard, Channel, Cohort, Direction, Event, GoldEntry, GoldStandard, PairId,
    PatientEvents,
};
use crate::error::{Error, Result};
use crate::timeline::SECONDS_PER_DAY;

/// Expert-curated directions for the 28 reference drug/lab pairs.
pub const REFERENCE_GOLD: &str = include_str!("../data/gold_expert.csv");

/// Attempts per patient before giving up on eligibility.
const MAX_ATTEMPTS: u64 = 1000;
/// Lab sampling grid step, in days.
const SAMPLING_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub patients: usize,
    /// Expected lab measurements plus drug orders per patient.
    pub mean_events_per_patient: f64,
    pub effect_direction: Direction,
    /// Peak response to one order, in lab sd units.
    pub effect_magnitude: f64,
    /// Rise time constant of the response, days.
    pub effect_onset: f64,
    /// Decay time constant of the response, days.
    pub effect_decay: f64,
    pub baseline_sd: f64,
    /// Random-walk step sd per day.
    pub walk_sd: f64,
    pub noise_sd: f64,
    /// In `[0, 1]`; lab intensity is scaled by `1 + bias * |deviation|`.
    pub sampling_bias: f64,
    /// Admissions per day.
    pub admission_rate: f64,
    /// Observation window per patient, days.
    pub span_days: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            patients: 250,
            mean_events_per_patient: 50.0,
            effect_direction: Direction::NoEffect,
            effect_magnitude: 1.0,
            effect_onset: 2.0,
            effect_decay: 60.0,
            baseline_sd: 1.0,
            walk_sd: 0.05,
            noise_sd: 0.5,
            sampling_bias: 0.5,
            admission_rate: 0.02,
            span_days: 180.0,
            seed: 1,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Invalid(format!("synthetic spec: {m}")));
        if self.patients == 0 {
            return bad("patients must be positive");
        }
        if self.mean_events_per_patient.is_nan() || self.mean_events_per_patient <= 31.0 {
            return bad("mean_events_per_patient must exceed 31 so patients can be eligible");
        }
        for (name, v) in [
            ("effect_magnitude", self.effect_magnitude),
            ("baseline_sd", self.baseline_sd),
            ("walk_sd", self.walk_sd),
            ("noise_sd", self.noise_sd),
            ("admission_rate", self.admission_rate),
        ] {
            if !v.is_finite() || v < 0.0 {
                return bad(&format!("{name} must be a nonnegative number"));
            }
        }
        for (name, v) in [
            ("effect_onset", self.effect_onset),
            ("effect_decay", self.effect_decay),
            ("span_days", self.span_days),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return bad(&format!("{name} must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.sampling_bias) {
            return bad("sampling_bias must lie in [0, 1]");
        }
        Ok(())
    }

    /// Response to one order `delta` days after it, scaled to peak at 1.
    pub fn kernel(&self, delta: f64) -> f64 {
        if delta <= 0.0 {
            return 0.0;
        }
        let (on, off) = (self.effect_onset, self.effect_decay);
        let shape = |d: f64| (1.0 - (-d / on).exp()) * (-d / off).exp();
        let peak_at = on * (1.0 + off / on).ln();
        shape(delta) / shape(peak_at)
    }
}

/// splitmix64 finalizer, used to derive independent child seeds.
pub fn mix_seed(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        .wrapping_add(a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(b.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Latent trajectory of one patient, kept for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentPath {
    pub baseline: f64,
    /// Random-walk value at each whole day.
    pub walk: Vec<f64>,
    /// Target-order times, days.
    pub orders: Vec<f64>,
    pub direction: f64,
}

impl LatentPath {
    /// Latent deviation from baseline at `t` days.
    pub fn deviation(&self, spec: &SynthSpec, t: f64) -> f64 {
        let i = (t.floor() as usize).min(self.walk.len() - 2);
        let w = t - i as f64;
        let walk = self.walk[i] * (1.0 - w) + self.walk[i + 1] * w;
        let effect: f64 = self.orders.iter().map(|&s| spec.kernel(t - s)).sum();
        walk + self.direction * spec.effect_magnitude * effect
    }
}

/// One generated patient before eligibility filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthPatient {
    pub events: PatientEvents,
    pub latent: LatentPath,
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map(|p| p.sample(rng) as usize).unwrap_or(0)
}

/// Events are written at whole seconds; collisions within a channel are
/// nudged forward so every (time, channel) is unique.
fn to_seconds(days: &mut [f64]) -> Vec<i64> {
    days.sort_by(f64::total_cmp);
    let mut out: Vec<i64> = Vec::with_capacity(days.len());
    for &d in days.iter() {
        let mut s = (d * SECONDS_PER_DAY).round() as i64;
        if let Some(&last) = out.last() {
            if s <= last {
                s = last + 1;
            }
        }
        out.push(s);
    }
    out
}

/// Generate one patient from its own seed (no eligibility check).
pub fn generate_patient(spec: &SynthSpec, id: &str, seed: u64) -> SynthPatient {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let span = spec.span_days * rng.random_range(0.75..1.25);

    // admissions, at least one
    let n_adm = poisson(&mut rng, spec.admission_rate * span).max(1);
    let mut admissions: Vec<f64> = (0..n_adm).map(|_| rng.random_range(0.0..span * 0.8)).collect();
    admissions.sort_by(f64::total_cmp);

    // order bursts in the days after each admission, plus background orders
    let order_budget = spec.mean_events_per_patient / 3.0;
    let per_burst = (order_budget * 0.5 / n_adm as f64).max(1.0);
    let mut targets = Vec::new();
    let mut others = Vec::new();
    for &a in &admissions {
        let k = 1 + poisson(&mut rng, (per_burst * 0.5 - 1.0).max(0.0));
        targets.extend((0..k).map(|_| a + rng.random_range(0.0..3.0)));
        let k = poisson(&mut rng, per_burst * 0.5);
        others.extend((0..k).map(|_| a + rng.random_range(0.0..3.0)));
        // admission and discharge orders bracket each burst
        others.push(a - rng.random_range(0.0..0.5));
        others.push(a + rng.random_range(3.0..5.0));
    }
    let background = (order_budget - targets.len() as f64 - others.len() as f64).max(order_budget * 0.25);
    let n_bg = poisson(&mut rng, background);
    others.extend((0..n_bg).map(|_| rng.random_range(0.0..span)));

    let days = span.ceil() as usize + 2;
    let mut walk = Vec::with_capacity(days);
    let mut level = 0.0;
    for _ in 0..days {
        walk.push(level);
        level += spec.walk_sd * std_normal.sample(&mut rng);
    }
    let latent = LatentPath {
        baseline: spec.baseline_sd * std_normal.sample(&mut rng),
        walk,
        orders: targets.clone(),
        direction: spec.effect_direction.as_i8() as f64,
    };

    // informed lab sampling on a fine grid, busier around admissions
    let lab_budget = spec.mean_events_per_patient - order_budget;
    let base_rate = lab_budget / (span * 1.6);
    let mut lab_days = Vec::new();
    let mut t = 0.0;
    while t < span {
        let near_adm = admissions.iter().any(|&a| t >= a && t < a + 5.0);
        let busy = if near_adm { 4.0 } else { 1.0 };
        let dev = latent.deviation(spec, t).abs();
        let rate = base_rate * busy * (1.0 + spec.sampling_bias * dev);
        if rng.random::<f64>() < (rate * SAMPLING_STEP).min(1.0) {
            lab_days.push(t + rng.random_range(0.0..SAMPLING_STEP));
        }
        t += SAMPLING_STEP;
    }

    let mut events = Vec::new();
    let lab_secs = to_seconds(&mut lab_days);
    for s in lab_secs {
        let d = s as f64 / SECONDS_PER_DAY;
        let value = latent.baseline + latent.deviation(spec, d) + spec.noise_sd * std_normal.sample(&mut rng);
        events.push(Event::lab(s, value));
    }
    for (days, channel) in [
        (&mut targets, Channel::TargetDrug),
        (&mut others, Channel::OtherDrug),
        (&mut admissions, Channel::Admission),
    ] {
        for s in to_seconds(days) {
            events.push(Event::marker(s, channel));
        }
    }
    events.sort_by_key(|e| (e.time, e.channel));
    SynthPatient {
        events: PatientEvents {
            id: id.to_string(),
            events,
        },
        latent,
    }
}

/// Generate an eligible cohort; each patient is redrawn with a fresh child
/// seed until it passes the eligibility rule.
pub fn generate_cohort_detailed(spec: &SynthSpec, pair: &PairId) -> Result<Vec<SynthPatient>> {
    spec.validate()?;
    (0..spec.patients)
        .into_par_iter()
        .map(|i| {
            let id = format!("p{:05}", i + 1);
            for attempt in 0..MAX_ATTEMPTS {
                let p = generate_patient(spec, &id, mix_seed(spec.seed, i as u64, attempt));
                if is_eligible(&p.events) {
                    return Ok(p);
                }
            }
            Err(Error::Invalid(format!("{pair}: could not generate an eligible patient {id}")))
        })
        .collect()
}

pub fn generate_cohort(spec: &SynthSpec, pair: PairId) -> Result<(Cohort, Direction)> {
    let patients = generate_cohort_detailed(spec, &pair)?;
    Ok((
        Cohort {
            pair,
            patients: patients.into_iter().map(|p| p.events).collect(),
            provenance: format!("synthetic seed={}", spec.seed),
        },
        spec.effect_direction,
    ))
}

/// A set of synthetic cohorts and the gold standard they were planted
/// from.
#[derive(Debug, Clone, PartialEq)]
pub struct GridStudy {
    pub cohorts: Vec<Cohort>,
    pub gold: GoldStandard,
}

/// Per-pair specs for the 28 reference pairs: `base` with each pair's
/// direction and a seed derived from `study_seed` and the pair position.
pub fn reference_specs(base: &SynthSpec, study_seed: u64) -> Result<Vec<(PairId, SynthSpec)>> {
    let gold = parse_gold_standard("synthetic", REFERENCE_GOLD)?;
    Ok(gold
        .entries
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let spec = SynthSpec {
                effect_direction: e.direction,
                seed: mix_seed(study_seed, k as u64, u64::MAX),
                ..*base
            };
            (e.pair.clone(), spec)
        })
        .collect())
}

pub fn generate_grid_study(specs: &[(PairId, SynthSpec)]) -> Result<GridStudy> {
    let mut cohorts = Vec::with_capacity(specs.len());
    let mut entries = Vec::with_capacity(specs.len());
    for (pair, spec) in specs {
        let (cohort, direction) = generate_cohort(spec, pair.clone())?;
        cohorts.push(cohort);
        entries.push(GoldEntry {
            pair: pair.clone(),
            direction,
        });
    }
    Ok(GridStudy {
        cohorts,
        gold: GoldStandard::new("synthetic", entries)?,
    })
}
