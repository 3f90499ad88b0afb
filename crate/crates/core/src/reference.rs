//! Reference tables shipped with the crate: the two drug/lab gold
//! standards and the published per-configuration AUROCs.

use crate::cohort::{parse_gold_standard, GoldStandard};
use crate::error::{Error, Result};
use crate::evaluate::MethodConfig;

pub const KNOWLEDGE_BASE_GOLD: &str = include_str!("../data/gold_knowledge_base.csv");
pub const EXPERT_GOLD: &str = include_str!("../data/gold_expert.csv");
pub const PUBLISHED_GRID: &str = include_str!("../data/supp_table1.csv");

pub fn knowledge_base_gold() -> GoldStandard {
    parse_gold_standard("kb", KNOWLEDGE_BASE_GOLD).expect("shipped gold standard parses")
}

pub fn expert_gold() -> GoldStandard {
    parse_gold_standard("expert", EXPERT_GOLD).expect("shipped gold standard parses")
}

/// One row of a grid results table.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub config: MethodConfig,
    /// `(auroc, sd)` per gold standard, in column order.
    pub scores: Vec<(f64, f64)>,
}

/// Parse a grid table: six method columns followed by `auroc_<label>,
/// sd_<label>` pairs. Returns the gold labels and the rows.
pub fn parse_grid_table(text: &str) -> Result<(Vec<String>, Vec<GridRow>)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| Error::parse(1, "empty grid table"))?;
    let cols: Vec<&str> = header.split(',').collect();
    let expected = ["time", "binned", "normalized", "difference", "context", "estimation"];
    if cols.len() < 8 || cols[..6] != expected || !(cols.len() - 6).is_multiple_of(2) {
        return Err(Error::parse(1, "grid table header must be six method columns plus auroc/sd pairs"));
    }
    let mut labels = Vec::new();
    for pair in cols[6..].chunks(2) {
        let label = pair[0]
            .strip_prefix("auroc_")
            .filter(|l| pair[1].strip_prefix("sd_") == Some(*l))
            .ok_or_else(|| Error::parse(1, format!("bad score columns {pair:?}")))?;
        labels.push(label.to_string());
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != cols.len() {
            return Err(Error::parse(i + 1, format!("expected {} fields", cols.len())));
        }
        let config = MethodConfig::from_table_columns(&f[..6]).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::parse(i + 1, format!("bad number {s:?}")));
        let scores = f[6..]
            .chunks(2)
            .map(|p| Ok((num(p[0])?, num(p[1])?)))
            .collect::<Result<Vec<_>>>()?;
        rows.push(GridRow { config, scores });
    }
    Ok((labels, rows))
}

/// The published 64-row table (gold labels `expert` and `kb`).
pub fn published_grid() -> (Vec<String>, Vec<GridRow>) {
    parse_grid_table(PUBLISHED_GRID).expect("shipped grid table parses")
}
