//! The six binary method axes and the 64-configuration grid.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lagreg::Model;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimeAxis {
    Sequence,
    Real,
}

/// One combination of the six method axes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MethodConfig {
    pub time: TimeAxis,
    pub binned: bool,
    pub normalized: bool,
    pub differenced: bool,
    pub context: bool,
    pub model: Model,
}

impl MethodConfig {
    /// Position in [`enumerate_grid`] order.
    pub fn index(&self) -> usize {
        ((self.time == TimeAxis::Real) as usize) << 5
            | (self.binned as usize) << 4
            | (self.normalized as usize) << 3
            | (self.differenced as usize) << 2
            | (self.context as usize) << 1
            | (self.model == Model::Joint) as usize
    }

    pub fn from_index(i: usize) -> Self {
        assert!(i < 64);
        MethodConfig {
            time: if i & 32 != 0 { TimeAxis::Real } else { TimeAxis::Sequence },
            binned: i & 16 != 0,
            normalized: i & 8 != 0,
            differenced: i & 4 != 0,
            context: i & 2 != 0,
            model: if i & 1 != 0 { Model::Joint } else { Model::Independent },
        }
    }

    /// Canonical key, e.g. `seq-nobin-norm-diff-noctx-joint`.
    pub fn key(&self) -> String {
        format!(
            "{}-{}-{}-{}-{}-{}",
            match self.time {
                TimeAxis::Sequence => "seq",
                TimeAxis::Real => "real",
            },
            if self.binned { "bin" } else { "nobin" },
            if self.normalized { "norm" } else { "raw" },
            if self.differenced { "diff" } else { "level" },
            if self.context { "ctx" } else { "noctx" },
            match self.model {
                Model::Joint => "joint",
                Model::Independent => "indep",
            }
        )
    }

    /// Human-readable columns in table order: Time, Binned, Normalized,
    /// Difference, Context variables, Estimation.
    pub fn table_columns(&self) -> [&'static str; 6] {
        let yn = |b: bool| if b { "Yes" } else { "No" };
        [
            match self.time {
                TimeAxis::Sequence => "Sequence",
                TimeAxis::Real => "Real",
            },
            yn(self.binned),
            yn(self.normalized),
            yn(self.differenced),
            yn(self.context),
            match self.model {
                Model::Joint => "Joint AR",
                Model::Independent => "Independent",
            },
        ]
    }

    pub fn from_table_columns(cols: &[&str]) -> Result<Self> {
        if cols.len() != 6 {
            return Err(Error::Invalid(format!("expected 6 method columns, got {}", cols.len())));
        }
        let yn = |s: &str| match s.trim() {
            "Yes" => Ok(true),
            "No" => Ok(false),
            other => Err(Error::Invalid(format!("expected Yes/No, got {other:?}"))),
        };
        Ok(MethodConfig {
            time: match cols[0].trim() {
                "Sequence" => TimeAxis::Sequence,
                "Real" => TimeAxis::Real,
                other => return Err(Error::Invalid(format!("bad time axis {other:?}"))),
            },
            binned: yn(cols[1])?,
            normalized: yn(cols[2])?,
            differenced: yn(cols[3])?,
            context: yn(cols[4])?,
            model: match cols[5].trim() {
                "Joint AR" => Model::Joint,
                "Independent" => Model::Independent,
                other => return Err(Error::Invalid(format!("bad estimation {other:?}"))),
            },
        })
    }

    /// Sequence time with either joint+differenced or independent+levels.
    pub fn is_preferred(&self) -> bool {
        self.time == TimeAxis::Sequence && self.has_matched_differencing()
    }

    /// Joint with differencing, or independent without.
    pub fn has_matched_differencing(&self) -> bool {
        self.differenced == (self.model == Model::Joint)
    }
}

impl fmt::Display for MethodConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

impl FromStr for MethodConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        enumerate_grid()
            .into_iter()
            .find(|c| c.key() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown config key {s:?}")))
    }
}

/// All 64 configurations in canonical order.
pub fn enumerate_grid() -> Vec<MethodConfig> {
    (0..64).map(MethodConfig::from_index).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    Time,
    Binned,
    Normalized,
    Differenced,
    Context,
    Model,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Clause {
    axis: Axis,
    negate: bool,
    value: u8,
}

impl Clause {
    fn matches(&self, c: &MethodConfig) -> bool {
        let actual = match self.axis {
            Axis::Time => (c.time == TimeAxis::Real) as u8,
            Axis::Binned => c.binned as u8,
            Axis::Normalized => c.normalized as u8,
            Axis::Differenced => c.differenced as u8,
            Axis::Context => c.context as u8,
            Axis::Model => (c.model == Model::Joint) as u8,
        };
        (actual == self.value) != self.negate
    }
}

/// Predicate over configurations: `|`-separated alternatives, each a
/// `,`-separated conjunction of `axis=value` or `axis!=value` clauses.
///
/// Axes: `time` (`sequence`/`real`), `binned`, `normalized`, `difference`,
/// `context` (`yes`/`no`), `model` (`joint`/`independent`). `all` or an
/// empty string matches everything.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GridFilter {
    alternatives: Vec<Vec<Clause>>,
}

fn parse_axis(s: &str) -> Option<Axis> {
    Some(match s {
        "time" => Axis::Time,
        "binned" | "bin" => Axis::Binned,
        "normalized" | "norm" => Axis::Normalized,
        "difference" | "differenced" | "diff" => Axis::Differenced,
        "context" | "ctx" => Axis::Context,
        "model" | "estimation" => Axis::Model,
        _ => return None,
    })
}

fn parse_value(axis: Axis, s: &str) -> Option<u8> {
    match axis {
        Axis::Time => match s {
            "sequence" | "seq" => Some(0),
            "real" | "clock" => Some(1),
            _ => None,
        },
        Axis::Model => match s {
            "independent" | "indep" => Some(0),
            "joint" | "joint-ar" => Some(1),
            _ => None,
        },
        _ => match s {
            "yes" | "true" | "1" => Some(1),
            "no" | "false" | "0" => Some(0),
            _ => None,
        },
    }
}

impl GridFilter {
    pub fn all() -> Self {
        GridFilter::default()
    }

    pub fn matches(&self, c: &MethodConfig) -> bool {
        self.alternatives.is_empty() || self.alternatives.iter().any(|alt| alt.iter().all(|cl| cl.matches(c)))
    }

    pub fn select(&self) -> Vec<MethodConfig> {
        enumerate_grid().into_iter().filter(|c| self.matches(c)).collect()
    }
}

impl FromStr for GridFilter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        if s.is_empty() || s == "all" {
            return Ok(GridFilter::all());
        }
        let mut alternatives = Vec::new();
        for alt in s.split('|') {
            let mut clauses = Vec::new();
            for term in alt.split(',').map(str::trim).filter(|t| !t.is_empty()) {
                let (lhs, rhs, negate) = if let Some((l, r)) = term.split_once("!=") {
                    (l, r, true)
                } else if let Some((l, r)) = term.split_once('=') {
                    (l, r, false)
                } else {
                    return Err(Error::Config(format!("filter term {term:?} needs axis=value")));
                };
                let axis = parse_axis(lhs.trim())
                    .ok_or_else(|| Error::Config(format!("unknown axis {:?}", lhs.trim())))?;
                let value = parse_value(axis, rhs.trim())
                    .ok_or_else(|| Error::Config(format!("bad value {:?} for {}", rhs.trim(), lhs.trim())))?;
                clauses.push(Clause { axis, negate, value });
            }
            if clauses.is_empty() {
                return Err(Error::Config(format!("empty alternative in filter {s:?}")));
            }
            alternatives.push(clauses);
        }
        Ok(GridFilter { alternatives })
    }
}
