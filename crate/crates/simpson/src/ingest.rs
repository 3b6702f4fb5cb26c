//! Record ingestion, aggregation to stratified tables, and scanning candidate
//! stratifier columns for reversal.
//!
//! Two input formats: delimiter-separated records with a header row, and a
//! JSON schema for pre-aggregated tables (see `docs/schemas.md` in the repo
//! root).

use std::io::Read;

use serde::Deserialize;
use serde::Serialize;

use crate::analysis::{detect_reversal, DetectOptions, Reversal, ReversalReport};
use crate::error::{Error, Result};
use crate::prob::{parse_rational, ratio, Rat, Rational};
use crate::synthesis::{Marginal, ProbTable};
use crate::tables::{CellCounts, StratifiedTable};

/// Conditioning margins below this trip a small-sample warning; the analysis
/// itself assumes population-scale counts and is not blocked.
pub const SMALL_MARGIN_WARNING: u64 = 30;

/// Maximum distinct stratifier values per column.
pub const DEFAULT_MAX_STRATA: usize = 16;

/// Raw records: a header row plus string-valued rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordSet {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RecordSet {
    fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }
}

/// Reads delimiter-separated records with a header row.
pub fn read_dsv<R: Read>(reader: R, delimiter: u8) -> Result<RecordSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Parse(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(RecordSet { headers, rows })
}

/// Which columns carry the outcome, exposure and candidate stratifiers, and
/// which value labels count as success / exposed. When the negative label is
/// not given it is inferred as the single remaining distinct value.
#[derive(Debug, Clone)]
pub struct ColumnMapping {
    pub outcome_column: String,
    pub exposure_column: String,
    pub stratifier_columns: Vec<String>,
    pub success_label: String,
    pub failure_label: Option<String>,
    pub exposed_label: String,
    pub unexposed_label: Option<String>,
    pub max_strata: usize,
}

impl ColumnMapping {
    pub fn new(
        outcome_column: impl Into<String>,
        exposure_column: impl Into<String>,
        success_label: impl Into<String>,
        exposed_label: impl Into<String>,
    ) -> ColumnMapping {
        ColumnMapping {
            outcome_column: outcome_column.into(),
            exposure_column: exposure_column.into(),
            stratifier_columns: Vec::new(),
            success_label: success_label.into(),
            failure_label: None,
            exposed_label: exposed_label.into(),
            unexposed_label: None,
            max_strata: DEFAULT_MAX_STRATA,
        }
    }
}

/// Resolves a binary column value. `negative` is the declared negative label
/// if any; `seen_negative` tracks the inferred one.
fn classify_binary(
    column: &str,
    value: &str,
    positive: &str,
    negative: &Option<String>,
    seen_negative: &mut Option<String>,
) -> Result<bool> {
    if value == positive {
        return Ok(true);
    }
    if let Some(neg) = negative {
        if value == neg {
            return Ok(false);
        }
        return Err(Error::NonBinaryValue {
            column: column.to_string(),
            value: value.to_string(),
        });
    }
    match seen_negative {
        Some(neg) if neg == value => Ok(false),
        Some(_) => Err(Error::NonBinaryValue {
            column: column.to_string(),
            value: value.to_string(),
        }),
        None => {
            *seen_negative = Some(value.to_string());
            Ok(false)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregation {
    pub table: StratifiedTable,
    /// Records dropped because a mapped field was missing (empty).
    pub dropped_missing: u64,
    pub warnings: Vec<String>,
}

/// Counts records per (outcome, exposure, stratum) combination. Strata are
/// ordered by first appearance in the input.
pub fn aggregate(
    records: &RecordSet,
    mapping: &ColumnMapping,
    stratifier: &str,
) -> Result<Aggregation> {
    if records.rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let outcome_idx = records.column_index(&mapping.outcome_column)?;
    let exposure_idx = records.column_index(&mapping.exposure_column)?;
    let stratifier_idx = records.column_index(stratifier)?;

    let mut strata: Vec<(String, CellCounts)> = Vec::new();
    let mut dropped_missing = 0u64;
    let mut inferred_failure: Option<String> = None;
    let mut inferred_unexposed: Option<String> = None;

    for row in &records.rows {
        let outcome_val = row.get(outcome_idx).map(String::as_str).unwrap_or("");
        let exposure_val = row.get(exposure_idx).map(String::as_str).unwrap_or("");
        let stratum_val = row.get(stratifier_idx).map(String::as_str).unwrap_or("");
        if outcome_val.is_empty() || exposure_val.is_empty() || stratum_val.is_empty() {
            dropped_missing += 1;
            continue;
        }
        let success = classify_binary(
            &mapping.outcome_column,
            outcome_val,
            &mapping.success_label,
            &mapping.failure_label,
            &mut inferred_failure,
        )?;
        let exposed = classify_binary(
            &mapping.exposure_column,
            exposure_val,
            &mapping.exposed_label,
            &mapping.unexposed_label,
            &mut inferred_unexposed,
        )?;
        let counts = match strata.iter_mut().find(|(l, _)| l == stratum_val) {
            Some((_, c)) => c,
            None => {
                if strata.len() == mapping.max_strata {
                    return Err(Error::Parse(format!(
                        "column {stratifier:?} has more than {} distinct values",
                        mapping.max_strata
                    )));
                }
                strata.push((stratum_val.to_string(), CellCounts::new(0, 0, 0, 0)));
                &mut strata.last_mut().expect("just pushed").1
            }
        };
        match (success, exposed) {
            (true, true) => counts.success_exposed += 1,
            (false, true) => counts.failure_exposed += 1,
            (true, false) => counts.success_unexposed += 1,
            (false, false) => counts.failure_unexposed += 1,
        }
    }
    if strata.is_empty() {
        return Err(Error::EmptyInput);
    }

    let mut warnings = Vec::new();
    if dropped_missing > 0 {
        warnings.push(format!("dropped {dropped_missing} records with missing mapped fields"));
    }
    for (label, c) in &strata {
        for (name, margin) in [
            ("exposed", c.success_exposed + c.failure_exposed),
            ("unexposed", c.success_unexposed + c.failure_unexposed),
        ] {
            if margin < SMALL_MARGIN_WARNING {
                warnings.push(format!(
                    "stratum {label:?}: {name} margin {margin} is below {SMALL_MARGIN_WARNING}; the analysis assumes large counts"
                ));
            }
        }
    }

    Ok(Aggregation {
        table: StratifiedTable::new(strata)?,
        dropped_missing,
        warnings,
    })
}

/// Expands a stratified table back into one record per observation.
/// Inverse of [`aggregate`] (up to record order).
pub fn disaggregate(
    table: &StratifiedTable,
    mapping: &ColumnMapping,
    stratifier: &str,
) -> Result<RecordSet> {
    let failure = mapping
        .failure_label
        .clone()
        .ok_or_else(|| Error::Parse("disaggregation needs an explicit failure label".into()))?;
    let unexposed = mapping
        .unexposed_label
        .clone()
        .ok_or_else(|| Error::Parse("disaggregation needs an explicit unexposed label".into()))?;
    let headers = vec![
        mapping.outcome_column.clone(),
        mapping.exposure_column.clone(),
        stratifier.to_string(),
    ];
    let mut rows = Vec::new();
    for s in table.strata() {
        let cells = [
            (&mapping.success_label, &mapping.exposed_label, s.counts.success_exposed),
            (&failure, &mapping.exposed_label, s.counts.failure_exposed),
            (&mapping.success_label, &unexposed, s.counts.success_unexposed),
            (&failure, &unexposed, s.counts.failure_unexposed),
        ];
        for (outcome, exposure, n) in cells {
            for _ in 0..n {
                rows.push(vec![outcome.clone(), exposure.clone(), s.label.clone()]);
            }
        }
    }
    Ok(RecordSet { headers, rows })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanEntry {
    pub stratifier: String,
    pub report: Option<ReversalReport>,
    pub skip_reason: Option<String>,
    /// |pooled delta - total-weighted mean of stratum deltas|: how far
    /// amalgamation moves the association.
    pub confounding_score: Option<Rat>,
}

/// One entry per candidate stratifier column, ordered by reversal status and
/// then by confounding score (descending), name as the final tie-break.
#[derive(Debug, Clone, Serialize)]
pub struct ScanResult {
    pub entries: Vec<ScanEntry>,
}

fn confounding_score(report: &ReversalReport, table: &StratifiedTable) -> Rational {
    let grand = table.grand_total();
    let mut mean = Rational::from_integer(0.into());
    for s in table.strata() {
        if let Some(sa) = report.per_stratum.iter().find(|p| p.label == s.label) {
            mean += ratio(s.counts.total() as i64, grand as i64) * &sa.measure.delta;
        }
    }
    let diff = &report.pooled.delta - mean;
    if diff < Rational::from_integer(0.into()) {
        -diff
    } else {
        diff
    }
}

/// Aggregates and runs reversal detection per candidate stratifier column.
/// Columns producing zero margins (or too few strata) are skipped with a
/// recorded reason.
pub fn scan_covariates(records: &RecordSet, mapping: &ColumnMapping) -> Result<ScanResult> {
    let mut entries = Vec::new();
    for stratifier in &mapping.stratifier_columns {
        let entry = match aggregate(records, mapping, stratifier) {
            Ok(agg) => match detect_reversal(&agg.table, &DetectOptions::default()) {
                Ok(mut report) => {
                    let score = confounding_score(&report, &agg.table);
                    report.warnings.extend(agg.warnings.iter().cloned());
                    ScanEntry {
                        stratifier: stratifier.clone(),
                        report: Some(report),
                        skip_reason: None,
                        confounding_score: Some(Rat(score)),
                    }
                }
                Err(e) => ScanEntry {
                    stratifier: stratifier.clone(),
                    report: None,
                    skip_reason: Some(e.to_string()),
                    confounding_score: None,
                },
            },
            Err(e) => ScanEntry {
                stratifier: stratifier.clone(),
                report: None,
                skip_reason: Some(e.to_string()),
                confounding_score: None,
            },
        };
        entries.push(entry);
    }
    entries.sort_by(|a, b| {
        let status = |e: &ScanEntry| match &e.report {
            Some(r) if r.reversal == Reversal::Strict => 0,
            Some(r) if r.reversal == Reversal::Weak => 1,
            Some(_) => 2,
            None => 3,
        };
        status(a)
            .cmp(&status(b))
            .then_with(|| {
                let score = |e: &ScanEntry| e.confounding_score.clone().map(|r| r.0);
                // Higher score first.
                score(b)
                    .partial_cmp(&score(a))
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .then_with(|| a.stratifier.cmp(&b.stratifier))
    });
    Ok(ScanResult { entries })
}

#[derive(Debug, Deserialize)]
struct StratumFile {
    label: String,
    counts: CellCounts,
}

#[derive(Debug, Deserialize)]
struct TableFile {
    strata: Vec<StratumFile>,
}

/// Parses the pre-aggregated JSON table schema:
/// `{"strata": [{"label": "...", "counts": {"success_exposed": 7, ...}}]}`.
pub fn parse_table_json(text: &str) -> Result<StratifiedTable> {
    let file: TableFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    StratifiedTable::new(
        file.strata
            .into_iter()
            .map(|s| (s.label, s.counts))
            .collect(),
    )
}

#[derive(Debug, Deserialize)]
struct ProbTableFile {
    success_exposed: String,
    failure_exposed: String,
    success_unexposed: String,
    failure_unexposed: String,
}

#[derive(Debug, Deserialize)]
struct MarginalFile {
    counts: Option<CellCounts>,
    probabilities: Option<ProbTableFile>,
}

/// Parses a marginal 2x2 table for synthesis: either
/// `{"counts": {...}}` or `{"probabilities": {"success_exposed": "1/5", ...}}`
/// (rational strings, exact).
pub fn parse_marginal_json(text: &str) -> Result<Marginal> {
    let file: MarginalFile =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    match (file.counts, file.probabilities) {
        (Some(c), None) => Ok(Marginal::Counts(c)),
        (None, Some(p)) => Ok(Marginal::Probabilities(ProbTable::new(
            parse_rational(&p.success_exposed)?,
            parse_rational(&p.failure_exposed)?,
            parse_rational(&p.success_unexposed)?,
            parse_rational(&p.failure_unexposed)?,
        )?)),
        _ => Err(Error::Parse(
            "marginal file needs exactly one of \"counts\" or \"probabilities\"".into(),
        )),
    }
}
