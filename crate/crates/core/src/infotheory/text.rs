//! Line-oriented distribution format: one `label<TAB>mass` pair per line.

use std::fmt::Display;
use std::str::FromStr;

use super::{FiniteDistribution, InfoError, Label, Result};

/// Writes `label\tmass` lines with 17 significant digits.
pub fn write_distribution<L: Label + Display>(p: &FiniteDistribution<L>) -> Result<String> {
    let mut out = String::new();
    for (o, m) in p.iter() {
        let label = o.to_string();
        if label.is_empty() || label.contains(['\t', '\n', '\r']) || label.starts_with('#') {
            return Err(InfoError::BadLabel(label));
        }
        out.push_str(&format!("{label}\t{m:.16e}\n"));
    }
    Ok(out)
}

/// Parses the output of [`write_distribution`]. Blank lines and `#`
/// comments are skipped.
pub fn parse_distribution<L: Label + FromStr>(text: &str) -> Result<FiniteDistribution<L>> {
    let mut outcomes = Vec::new();
    let mut masses = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |reason: &str| InfoError::Parse { line: i + 1, reason: reason.to_string() };
        let (label, mass) = line.split_once('\t').ok_or_else(|| err("missing tab"))?;
        outcomes.push(label.parse::<L>().map_err(|_| err("bad label"))?);
        masses.push(mass.trim().parse::<f64>().map_err(|_| err("bad mass"))?);
    }
    FiniteDistribution::new(outcomes, masses)
}
