//! Aligned multivariate timelines built from one patient's raw events.
//!
//! Order events become a 0/1 drug channel, admissions become a 0-1-0 context
//! pulse spanning a day either side, and every channel is linearly
//! interpolated onto the union of all observation times.

use crate::cohort::{Channel, Event, PatientEvents};

pub const SECONDS_PER_DAY: f64 = 86_400.0;
/// Half-width of the drug binning window.
pub const BIN_HALF_WIDTH: f64 = 43_200.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parameterization {
    Clock,
    Sequence,
}

/// Observations of one channel with strictly increasing times.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelSeries {
    pub points: Vec<(f64, f64)>,
    /// Target-drug order times; binning windows are centred on these. Empty
    /// for channels other than the drug channel.
    pub anchors: Vec<f64>,
}

impl ChannelSeries {
    pub fn from_points(points: Vec<(f64, f64)>) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0].0 < w[1].0));
        ChannelSeries {
            points,
            anchors: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.0)
    }

    /// Linear interpolation in time, holding the nearest observation beyond
    /// either end. An empty series reads as 0 everywhere.
    pub fn value_at(&self, t: f64) -> f64 {
        interpolate_at(&self.points, t)
    }
}

/// Piecewise-linear evaluation over sorted `(time, value)` knots with
/// constant extrapolation.
pub fn interpolate_at(points: &[(f64, f64)], t: f64) -> f64 {
    let Some(&(t0, v0)) = points.first() else {
        return 0.0;
    };
    if t <= t0 {
        return v0;
    }
    let &(tn, vn) = points.last().unwrap();
    if t >= tn {
        return vn;
    }
    // first knot with time > t; t0 < t < tn so 1 <= i < len
    let i = points.partition_point(|p| p.0 <= t);
    let (ta, va) = points[i - 1];
    if ta == t {
        return va;
    }
    let (tb, vb) = points[i];
    let w = (t - ta) / (tb - ta);
    va + (vb - va) * w
}

/// Collapse co-timed points (input sorted by time) keeping the maximum value.
fn merge_max(mut points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for (t, v) in points {
        match out.last_mut() {
            Some(last) if last.0 == t => last.1 = last.1.max(v),
            _ => out.push((t, v)),
        }
    }
    out
}

pub fn lab_series(events: &[Event]) -> ChannelSeries {
    let points = events
        .iter()
        .filter(|e| e.channel == Channel::Lab)
        .map(|e| (e.time as f64, e.value.expect("lab events carry values")))
        .collect();
    ChannelSeries::from_points(points)
}

/// Target orders become 1, other orders 0; co-timed orders collapse to 1.
pub fn binarize_drugs(events: &[Event]) -> ChannelSeries {
    let points = events
        .iter()
        .filter_map(|e| match e.channel {
            Channel::TargetDrug => Some((e.time as f64, 1.0)),
            Channel::OtherDrug => Some((e.time as f64, 0.0)),
            _ => None,
        })
        .collect();
    let points = merge_max(points);
    let anchors = points.iter().filter(|p| p.1 == 1.0).map(|p| p.0).collect();
    ChannelSeries { points, anchors }
}

/// Each admission at `t` contributes `(t-1d, 0), (t, 1), (t+1d, 0)`; shared
/// times keep the maximum.
pub fn encode_admissions(events: &[Event]) -> ChannelSeries {
    let mut points = Vec::new();
    for e in events.iter().filter(|e| e.channel == Channel::Admission) {
        let t = e.time as f64;
        points.push((t - SECONDS_PER_DAY, 0.0));
        points.push((t, 1.0));
        points.push((t + SECONDS_PER_DAY, 0.0));
    }
    ChannelSeries::from_points(merge_max(points))
}

/// Max-window over the drug channel: any order within 12 h (inclusive) of a
/// target order is set to 1. Times and point count are unchanged.
pub fn bin_drug_channel(drug: &ChannelSeries) -> ChannelSeries {
    let anchors = &drug.anchors;
    let points = drug
        .points
        .iter()
        .map(|&(t, v)| {
            if v >= 1.0 || anchors.is_empty() {
                return (t, v);
            }
            let i = anchors.partition_point(|&a| a < t);
            let near = [i.checked_sub(1), Some(i)]
                .into_iter()
                .flatten()
                .filter_map(|j| anchors.get(j))
                .any(|&a| (a - t).abs() <= BIN_HALF_WIDTH);
            (t, if near { 1.0 } else { v })
        })
        .collect();
    ChannelSeries {
        points,
        anchors: drug.anchors.clone(),
    }
}

/// Lab (`y`), drug (`x`) and context (`z`) values on a shared time axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedTimeline {
    pub patient_id: String,
    pub parameterization: Parameterization,
    pub times: Vec<f64>,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
    pub z: Vec<f64>,
}

impl AlignedTimeline {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn channels(&self) -> [&Vec<f64>; 3] {
        [&self.y, &self.x, &self.z]
    }

    pub fn channels_mut(&mut self) -> [&mut Vec<f64>; 3] {
        [&mut self.y, &mut self.x, &mut self.z]
    }

    /// Debug dump as `time,y,x,z` rows.
    pub fn to_text(&self) -> String {
        let mut out = String::from("time,y,x,z\n");
        for i in 0..self.len() {
            out.push_str(&format!("{},{},{},{}\n", self.times[i], self.y[i], self.x[i], self.z[i]));
        }
        out
    }
}

/// Align the three channels on the sorted union of their observation times.
/// Missing drug or context channels read as 0.
pub fn interpolate(
    patient_id: &str,
    lab: &ChannelSeries,
    drug: &ChannelSeries,
    context: &ChannelSeries,
) -> AlignedTimeline {
    let mut times: Vec<f64> = lab
        .times()
        .chain(drug.times())
        .chain(context.times())
        .collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let eval = |s: &ChannelSeries| times.iter().map(|&t| s.value_at(t)).collect::<Vec<_>>();
    AlignedTimeline {
        patient_id: patient_id.to_string(),
        parameterization: Parameterization::Clock,
        y: eval(lab),
        x: eval(drug),
        z: eval(context),
        times,
    }
}

/// Replace the time axis with `0, 1, ..., n-1`.
pub fn to_sequence_time(mut timeline: AlignedTimeline) -> AlignedTimeline {
    for (i, t) in timeline.times.iter_mut().enumerate() {
        *t = i as f64;
    }
    timeline.parameterization = Parameterization::Sequence;
    timeline
}

/// Re-sample a clock timeline on a whole-day grid starting at its first time.
/// A trailing partial day is dropped.
pub fn resample_daily(timeline: &AlignedTimeline) -> AlignedTimeline {
    assert_eq!(timeline.parameterization, Parameterization::Clock);
    let (Some(&first), Some(&last)) = (timeline.times.first(), timeline.times.last()) else {
        return timeline.clone();
    };
    let days = ((last - first) / SECONDS_PER_DAY).floor() as usize;
    let grid: Vec<f64> = (0..=days).map(|d| first + d as f64 * SECONDS_PER_DAY).collect();
    let knots = |vals: &[f64]| -> Vec<(f64, f64)> {
        timeline.times.iter().copied().zip(vals.iter().copied()).collect()
    };
    let eval = |vals: &[f64]| {
        let k = knots(vals);
        grid.iter().map(|&t| interpolate_at(&k, t)).collect::<Vec<_>>()
    };
    AlignedTimeline {
        patient_id: timeline.patient_id.clone(),
        parameterization: Parameterization::Clock,
        y: eval(&timeline.y),
        x: eval(&timeline.x),
        z: eval(&timeline.z),
        times: grid,
    }
}

/// Events to clock-time timeline, with or without drug binning.
pub fn build_clock_timeline(patient: &PatientEvents, binned: bool) -> AlignedTimeline {
    let lab = lab_series(&patient.events);
    let mut drug = binarize_drugs(&patient.events);
    if binned {
        drug = bin_drug_channel(&drug);
    }
    let context = encode_admissions(&patient.events);
    interpolate(&patient.id, &lab, &drug, &context)
}
