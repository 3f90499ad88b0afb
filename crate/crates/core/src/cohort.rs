//! Patient event streams, cohort eligibility and gold standards.
//!
//! Event files are flat comma-separated tables with the header
//! `patient_id,time_seconds,channel,value`. Gold-standard files use
//! `drug,lab,direction`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

pub const EVENT_HEADER: &str = "patient_id,time_seconds,channel,value";
pub const GOLD_HEADER: &str = "drug,lab,direction";

/// Event channel. The declaration order is the tie-break order for events
/// sharing a timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Channel {
    Lab,
    TargetDrug,
    OtherDrug,
    Admission,
}

impl Channel {
    pub fn tag(self) -> &'static str {
        match self {
            Channel::Lab => "LAB",
            Channel::TargetDrug => "TARGET_DRUG",
            Channel::OtherDrug => "OTHER_DRUG",
            Channel::Admission => "ADMISSION",
        }
    }
}

impl FromStr for Channel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "LAB" => Ok(Channel::Lab),
            "TARGET_DRUG" => Ok(Channel::TargetDrug),
            "OTHER_DRUG" => Ok(Channel::OtherDrug),
            "ADMISSION" => Ok(Channel::Admission),
            other => Err(format!("unknown channel tag {other:?}")),
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// One timestamped observation. Only lab events carry a value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    /// Seconds since the epoch.
    pub time: i64,
    pub channel: Channel,
    pub value: Option<f64>,
}

impl Event {
    pub fn lab(time: i64, value: f64) -> Self {
        Event {
            time,
            channel: Channel::Lab,
            value: Some(value),
        }
    }

    pub fn marker(time: i64, channel: Channel) -> Self {
        debug_assert!(channel != Channel::Lab);
        Event {
            time,
            channel,
            value: None,
        }
    }

    fn sort_key(&self) -> (i64, Channel) {
        (self.time, self.channel)
    }
}

/// All events of one patient, sorted by `(time, channel)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientEvents {
    pub id: String,
    pub events: Vec<Event>,
}

impl PatientEvents {
    pub fn count(&self, channel: Channel) -> usize {
        self.events.iter().filter(|e| e.channel == channel).count()
    }
}

/// Per-patient event lists that parsed cleanly but have not been screened
/// for eligibility. Patients are ordered by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CohortCandidate {
    pub patients: Vec<PatientEvents>,
}

/// Drug/lab pair a cohort was assembled for.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairId {
    pub drug: String,
    pub lab: String,
}

impl PairId {
    pub fn new(drug: impl Into<String>, lab: impl Into<String>) -> Self {
        PairId {
            drug: drug.into(),
            lab: lab.into(),
        }
    }

    /// Filesystem-safe slug.
    pub fn slug(&self) -> String {
        let clean = |s: &str| {
            s.chars()
                .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
                .collect::<String>()
        };
        format!("{}__{}", clean(&self.drug), clean(&self.lab))
    }
}

impl fmt::Display for PairId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} / {}", self.drug, self.lab)
    }
}

/// An eligible cohort for one drug/lab pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Cohort {
    pub pair: PairId,
    pub patients: Vec<PatientEvents>,
    pub provenance: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EligibilityReport {
    pub retained: usize,
    pub dropped: usize,
}

fn parse_event_line(line_no: usize, line: &str) -> Result<(String, Event)> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 4 {
        return Err(Error::parse(
            line_no,
            format!("expected 4 fields, found {}", fields.len()),
        ));
    }
    let id = fields[0].trim();
    if id.is_empty() {
        return Err(Error::parse(line_no, "empty patient_id"));
    }
    let time: i64 = fields[1]
        .trim()
        .parse()
        .map_err(|_| Error::parse(line_no, format!("bad time_seconds {:?}", fields[1])))?;
    let channel: Channel = fields[2]
        .trim()
        .parse()
        .map_err(|e: String| Error::parse(line_no, e))?;
    let raw_value = fields[3].trim();
    let value = match channel {
        Channel::Lab => {
            let v: f64 = raw_value
                .parse()
                .map_err(|_| Error::parse(line_no, format!("bad lab value {raw_value:?}")))?;
            if !v.is_finite() {
                return Err(Error::parse(line_no, format!("non-finite lab value {raw_value}")));
            }
            Some(v)
        }
        _ => {
            if !raw_value.is_empty() {
                return Err(Error::parse(
                    line_no,
                    format!("{channel} rows must have an empty value"),
                ));
            }
            None
        }
    };
    Ok((id.to_string(), Event { time, channel, value }))
}

/// Parse event rows from text. See [`ingest_events`].
pub fn parse_events(text: &str) -> Result<CohortCandidate> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let Some((_, header)) = lines.by_ref().find(|(_, l)| !l.trim().is_empty()) else {
        return Ok(CohortCandidate::default());
    };
    if header.trim() != EVENT_HEADER {
        return Err(Error::parse(1, format!("expected header {EVENT_HEADER:?}")));
    }

    let mut by_patient: BTreeMap<String, Vec<(usize, Event)>> = BTreeMap::new();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let (id, event) = parse_event_line(line_no, line)?;
        by_patient.entry(id).or_default().push((line_no, event));
    }

    let mut patients = Vec::with_capacity(by_patient.len());
    for (id, mut rows) in by_patient {
        rows.sort_by(|a, b| a.1.sort_key().cmp(&b.1.sort_key()).then(a.0.cmp(&b.0)));
        for pair in rows.windows(2) {
            let (_, a) = pair[0];
            let (line_no, b) = pair[1];
            if a.sort_key() == b.sort_key() {
                let message = if a.value.map(f64::to_bits) == b.value.map(f64::to_bits) {
                    format!("duplicate event for patient {id} at t={} ({})", b.time, b.channel)
                } else {
                    format!("conflicting co-timed LAB values for patient {id} at t={}", b.time)
                };
                return Err(Error::parse(line_no, message));
            }
        }
        patients.push(PatientEvents {
            id,
            events: rows.into_iter().map(|(_, e)| e).collect(),
        });
    }
    Ok(CohortCandidate { patients })
}

/// Read an event file, group by patient and sort each patient's events.
pub fn ingest_events(path: impl AsRef<Path>) -> Result<CohortCandidate> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_events(&text)
}

/// Canonical text form: header, then rows ordered by patient id, time, channel.
pub fn serialize_events(patients: &[PatientEvents]) -> String {
    let mut out = String::with_capacity(32 * patients.iter().map(|p| p.events.len()).sum::<usize>());
    out.push_str(EVENT_HEADER);
    out.push('\n');
    for p in patients {
        for e in &p.events {
            out.push_str(&p.id);
            out.push(',');
            out.push_str(&e.time.to_string());
            out.push(',');
            out.push_str(e.channel.tag());
            out.push(',');
            if let Some(v) = e.value {
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
    }
    out
}

/// Cohort entry rule: at least 2 labs, at least 1 target-drug order and more
/// than 30 combined lab and drug-order events. Admissions are not counted.
pub fn is_eligible(p: &PatientEvents) -> bool {
    let labs = p.count(Channel::Lab);
    let target = p.count(Channel::TargetDrug);
    let other = p.count(Channel::OtherDrug);
    labs >= 2 && target >= 1 && labs + target + other > 30
}

pub fn filter_eligible(
    candidate: CohortCandidate,
    pair: PairId,
    provenance: impl Into<String>,
) -> (Cohort, EligibilityReport) {
    let total = candidate.patients.len();
    let patients: Vec<PatientEvents> = candidate.patients.into_iter().filter(is_eligible).collect();
    let report = EligibilityReport {
        retained: patients.len(),
        dropped: total - patients.len(),
    };
    (
        Cohort {
            pair,
            patients,
            provenance: provenance.into(),
        },
        report,
    )
}

impl Cohort {
    /// Re-apply the eligibility rule; a no-op on any cohort built by
    /// [`filter_eligible`].
    pub fn refilter(self) -> (Cohort, EligibilityReport) {
        let Cohort {
            pair,
            patients,
            provenance,
        } = self;
        filter_eligible(CohortCandidate { patients }, pair, provenance)
    }
}

/// Expected direction of a drug's effect on a lab.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Decrease,
    NoEffect,
    Increase,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::Decrease, Direction::NoEffect, Direction::Increase];

    pub fn as_i8(self) -> i8 {
        match self {
            Direction::Decrease => -1,
            Direction::NoEffect => 0,
            Direction::Increase => 1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            -1 => Some(Direction::Decrease),
            0 => Some(Direction::NoEffect),
            1 => Some(Direction::Increase),
            _ => None,
        }
    }

    pub fn negate(self) -> Self {
        Direction::from_i8(-self.as_i8()).unwrap()
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_i8())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldEntry {
    pub pair: PairId,
    pub direction: Direction,
}

/// Expected directions for a set of drug/lab pairs, in file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GoldStandard {
    pub label: String,
    pub entries: Vec<GoldEntry>,
}

impl GoldStandard {
    pub fn new(label: impl Into<String>, entries: Vec<GoldEntry>) -> Result<Self> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(&e.pair) {
                return Err(Error::Invalid(format!("duplicate gold-standard pair {}", e.pair)));
            }
        }
        Ok(GoldStandard {
            label: label.into(),
            entries,
        })
    }

    pub fn get(&self, pair: &PairId) -> Option<Direction> {
        self.entries.iter().find(|e| &e.pair == pair).map(|e| e.direction)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of entries with each direction, ordered (-1, 0, +1).
    pub fn tally(&self) -> [usize; 3] {
        let mut t = [0; 3];
        for e in &self.entries {
            t[(e.direction.as_i8() + 1) as usize] += 1;
        }
        t
    }

    pub fn directions(&self) -> Vec<Direction> {
        self.entries.iter().map(|e| e.direction).collect()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from(GOLD_HEADER);
        out.push('\n');
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.pair.drug, e.pair.lab, e.direction));
        }
        out
    }
}

pub fn parse_gold_standard(label: &str, text: &str) -> Result<GoldStandard> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.by_ref().find(|(_, l)| !l.trim().is_empty()) {
        Some((_, h)) if h.trim() == GOLD_HEADER => {}
        Some((n, _)) => return Err(Error::parse(n, format!("expected header {GOLD_HEADER:?}"))),
        None => return GoldStandard::new(label, Vec::new()),
    }
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(line_no, format!("expected 3 fields, found {}", fields.len())));
        }
        let direction = fields[2]
            .parse::<i8>()
            .ok()
            .and_then(Direction::from_i8)
            .ok_or_else(|| Error::parse(line_no, format!("direction must be -1, 0 or 1, got {:?}", fields[2])))?;
        let pair = PairId::new(fields[0], fields[1]);
        if !seen.insert(pair.clone()) {
            return Err(Error::parse(line_no, format!("duplicate pair {pair}")));
        }
        entries.push(GoldEntry { pair, direction });
    }
    GoldStandard::new(label, entries)
}

pub fn load_gold_standard(label: &str, path: impl AsRef<Path>) -> Result<GoldStandard> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_gold_standard(label, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn candidate(text: &str) -> CohortCandidate {
        parse_events(text).unwrap()
    }

    #[test]
    fn groups_and_sorts() {
        let c = candidate(
            "patient_id,time_seconds,channel,value\n\
             p1,300,LAB,4.5\n\
             p1,100,TARGET_DRUG,\n\
             p1,200,LAB,4.1\n",
        );
        assert_eq!(c.patients.len(), 1);
        let times: Vec<i64> = c.patients[0].events.iter().map(|e| e.time).collect();
        assert_eq!(times, vec![100, 200, 300]);
    }

    #[test]
    fn unknown_channel_names_line() {
        let err = parse_events("patient_id,time_seconds,channel,value\np1,1,LAB,2\np1,2,XYZ,\n")
            .unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("XYZ"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_candidate() {
        assert!(candidate("").patients.is_empty());
        assert!(candidate(EVENT_HEADER).patients.is_empty());
    }

    #[test]
    fn rejects_duplicates_and_bad_values() {
        let dup = "patient_id,time_seconds,channel,value\np1,5,OTHER_DRUG,\np1,5,OTHER_DRUG,\n";
        assert!(matches!(parse_events(dup), Err(Error::Parse { line: 3, .. })));
        let conflict = "patient_id,time_seconds,channel,value\np1,5,LAB,1\np1,5,LAB,2\n";
        assert!(parse_events(conflict).is_err());
        let nan = "patient_id,time_seconds,channel,value\np1,5,LAB,NaN\n";
        assert!(parse_events(nan).is_err());
        let inf = "patient_id,time_seconds,channel,value\np1,5,LAB,inf\n";
        assert!(parse_events(inf).is_err());
        let valued_order = "patient_id,time_seconds,channel,value\np1,5,TARGET_DRUG,1\n";
        assert!(parse_events(valued_order).is_err());
        assert!(parse_events("id,t,c,v\n").is_err());
    }

    #[test]
    fn co_timed_channels_are_kept_in_enum_order() {
        let c = candidate(
            "patient_id,time_seconds,channel,value\n\
             p1,10,ADMISSION,\n\
             p1,10,OTHER_DRUG,\n\
             p1,10,LAB,1.5\n\
             p1,10,TARGET_DRUG,\n",
        );
        let channels: Vec<Channel> = c.patients[0].events.iter().map(|e| e.channel).collect();
        assert_eq!(
            channels,
            vec![Channel::Lab, Channel::TargetDrug, Channel::OtherDrug, Channel::Admission]
        );
    }

    fn patient(labs: usize, target: usize, other: usize) -> PatientEvents {
        let mut events = Vec::new();
        let mut t = 0;
        for _ in 0..labs {
            events.push(Event::lab(t, 1.0));
            t += 1;
        }
        for _ in 0..target {
            events.push(Event::marker(t, Channel::TargetDrug));
            t += 1;
        }
        for _ in 0..other {
            events.push(Event::marker(t, Channel::OtherDrug));
            t += 1;
        }
        // admissions never count toward the >30 rule
        events.push(Event::marker(t, Channel::Admission));
        PatientEvents {
            id: format!("p{labs}-{target}-{other}"),
            events,
        }
    }

    #[test]
    fn eligibility_boundaries() {
        assert!(!is_eligible(&patient(2, 1, 27))); // 30 combined
        assert!(is_eligible(&patient(2, 1, 29))); // 32 combined
        assert!(is_eligible(&patient(2, 1, 28))); // 31 combined
        assert!(!is_eligible(&patient(40, 0, 0)));
        assert!(!is_eligible(&patient(1, 40, 0)));
    }

    #[test]
    fn filter_is_idempotent() {
        let cand = CohortCandidate {
            patients: vec![patient(2, 1, 27), patient(2, 1, 29), patient(40, 0, 0), patient(10, 10, 20)],
        };
        let (once, report) = filter_eligible(cand, PairId::new("d", "l"), "test");
        assert_eq!(report, EligibilityReport { retained: 2, dropped: 2 });
        let (twice, report2) = once.clone().refilter();
        assert_eq!(once, twice);
        assert_eq!(report2.dropped, 0);
    }

    #[test]
    fn gold_validation() {
        let ok = parse_gold_standard("x", "drug,lab,direction\nA,B,1\nA,C,-1\nB,B,0\n").unwrap();
        assert_eq!(ok.tally(), [1, 1, 1]);
        assert!(parse_gold_standard("x", "drug,lab,direction\nA,B,2\n").is_err());
        assert!(parse_gold_standard("x", "drug,lab,direction\nA,B,1\nA,B,0\n").is_err());
        assert_eq!(parse_gold_standard("x", &ok.to_text()).unwrap(), ok);
    }
}
