//! Per-patient normalization and first differencing.

use crate::timeline::{AlignedTimeline, Parameterization};

/// Which channels intra-patient normalization touches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NormalizeScope {
    /// Lab only; drug and context keep their 0..1 scale.
    #[default]
    LabOnly,
    AllChannels,
}

/// Channels that were constant (or too short) and were zeroed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DegenerateFlags {
    pub y: bool,
    pub x: bool,
    pub z: bool,
}

impl DegenerateFlags {
    pub fn any(&self) -> bool {
        self.y || self.x || self.z
    }
}

/// Mean and sample (n-1) standard deviation.
pub fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1) as f64).sqrt())
}

/// z-score in place; returns true if the channel was degenerate (zeroed).
pub fn zscore(v: &mut [f64]) -> bool {
    let (mean, sd) = mean_sd(v);
    if v.len() < 2 || sd == 0.0 || !sd.is_finite() {
        v.iter_mut().for_each(|x| *x = 0.0);
        return true;
    }
    v.iter_mut().for_each(|x| *x = (*x - mean) / sd);
    false
}

pub fn normalize_patient(
    mut timeline: AlignedTimeline,
    scope: NormalizeScope,
) -> (AlignedTimeline, DegenerateFlags) {
    let mut flags = DegenerateFlags {
        y: zscore(&mut timeline.y),
        ..Default::default()
    };
    if scope == NormalizeScope::AllChannels {
        flags.x = zscore(&mut timeline.x);
        flags.z = zscore(&mut timeline.z);
    }
    (timeline, flags)
}

pub fn diff(v: &[f64]) -> Vec<f64> {
    v.windows(2).map(|w| w[1] - w[0]).collect()
}

/// First differences of every channel. Returns `None` for fewer than two
/// points; such patients drop out of fitting.
pub fn difference(timeline: &AlignedTimeline) -> Option<AlignedTimeline> {
    if timeline.len() < 2 {
        return None;
    }
    let times = match timeline.parameterization {
        Parameterization::Sequence => (0..timeline.len() - 1).map(|i| i as f64).collect(),
        Parameterization::Clock => timeline.times[1..].to_vec(),
    };
    Some(AlignedTimeline {
        patient_id: timeline.patient_id.clone(),
        parameterization: timeline.parameterization,
        times,
        y: diff(&timeline.y),
        x: diff(&timeline.x),
        z: diff(&timeline.z),
    })
}
