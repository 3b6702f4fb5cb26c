//! Reversal detection, the interval overlap conditions, the weighted-average
//! decomposition, dissection ratios, case classification and the
//! marginal-vs-conditional independence gaps.

use std::cmp::Ordering;

use num::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::prob::{Probability, Rat, Rational, Sign};
use crate::tables::{AssociationMeasure, Exposure, Outcome, StratifiedTable, Stratum};

/// Reversal verdict. `Weak` allows ties within strata; `Strict` does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Reversal {
    None,
    Weak,
    Strict,
}

/// Ordering pattern of the stratum conditionals, Cases 1-4. `Mixed` only
/// arises for K > 2 where stratum pairs disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    Case1,
    Case2,
    Case3,
    Case4,
    Mixed,
}

/// Which exposure arm a dissection is taken on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Exposed,
    Unexposed,
}

impl Side {
    fn exposure(self) -> Exposure {
        match self {
            Side::Exposed => Exposure::Exposed,
            Side::Unexposed => Exposure::Unexposed,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct DetectOptions {
    /// Skip strata with an empty conditioning margin instead of erroring;
    /// each skip is recorded as a warning and the pooled table covers only
    /// the strata that remain.
    pub skip_zero_margin_strata: bool,
    /// Evaluate the Min/Max interval conditions for K > 2 as well.
    /// Off by default: for K > 2 this is an extension of the binary-stratifier
    /// conditions, not something the source analysis defines.
    pub multiway_intervals: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct StratumAssociation {
    pub label: String,
    pub measure: AssociationMeasure,
}

/// Full per-table verdict: per-stratum and pooled associations, condition
/// flags, case label and the stratifier weights p(z_k|y), p(z_k|y').
#[derive(Debug, Clone, Serialize)]
pub struct ReversalReport {
    pub per_stratum: Vec<StratumAssociation>,
    pub pooled: AssociationMeasure,
    pub reversal: Reversal,
    /// True when the reversal is the sign-flipped instance (strata negative,
    /// pooled positive).
    pub mirror: bool,
    /// Min/Max overlap condition; `None` for K > 2 unless the multiway
    /// extension is enabled.
    pub necessary_condition_holds: Option<bool>,
    pub sufficient_avoidance_holds: Option<bool>,
    pub case_label: CaseLabel,
    /// p(z_k | y) per stratum; sums to exactly 1.
    pub weights_u: Vec<Probability>,
    /// p(z_k | y') per stratum; sums to exactly 1.
    pub weights_v: Vec<Probability>,
    /// Exact weight gaps v_k - u_k. How "sufficiently dependent" Y and Z are
    /// is left to the caller; no threshold is applied.
    pub weight_gaps: Vec<Rat>,
    pub warnings: Vec<String>,
}

fn p_success(s: &Stratum, given: Exposure) -> Result<Probability> {
    s.counts.cond_prob(Outcome::Success, given).map_err(|e| match e {
        Error::ZeroMargin(m) => Error::ZeroMargin(format!("stratum {:?}: {m}", s.label)),
        other => other,
    })
}

/// Detects Simpson reversal in a 2x2xK table and fills in the full report.
pub fn detect_reversal(table: &StratifiedTable, opts: &DetectOptions) -> Result<ReversalReport> {
    let mut warnings = Vec::new();
    let mut included: Vec<&Stratum> = Vec::new();
    for s in table.strata() {
        let empty_margin =
            s.counts.margin(Exposure::Exposed) == 0 || s.counts.margin(Exposure::Unexposed) == 0;
        if empty_margin {
            if opts.skip_zero_margin_strata {
                warnings.push(format!(
                    "stratum {:?} skipped: empty conditioning margin",
                    s.label
                ));
                continue;
            }
            // Surface the precise margin through the association error path.
            s.counts.association().map_err(|e| match e {
                Error::ZeroMargin(m) => Error::ZeroMargin(format!("stratum {:?}: {m}", s.label)),
                other => other,
            })?;
        }
        included.push(s);
    }
    if included.len() < 2 {
        return Err(Error::EmptyStratifiedTable(included.len()));
    }

    let pooled_counts = included
        .iter()
        .fold(crate::tables::CellCounts::new(0, 0, 0, 0), |acc, s| {
            acc.checked_add(&s.counts)
        });
    let pooled = pooled_counts.association()?;

    let mut per_stratum = Vec::with_capacity(included.len());
    let mut weights_u = Vec::with_capacity(included.len());
    let mut weights_v = Vec::with_capacity(included.len());
    let mut weight_gaps = Vec::with_capacity(included.len());
    for s in &included {
        per_stratum.push(StratumAssociation {
            label: s.label.clone(),
            measure: s.counts.association()?,
        });
        let u = Probability::from_counts(
            s.counts.margin(Exposure::Exposed),
            pooled_counts.margin(Exposure::Exposed),
        )?;
        let v = Probability::from_counts(
            s.counts.margin(Exposure::Unexposed),
            pooled_counts.margin(Exposure::Unexposed),
        )?;
        weight_gaps.push(Rat(v.as_rational() - u.as_rational()));
        weights_u.push(u);
        weights_v.push(v);
    }

    let (reversal, mirror) = reversal_verdict(&per_stratum, &pooled);

    let conds: Option<(bool, bool)> = if included.len() == 2 || opts.multiway_intervals {
        let exposed: Vec<Probability> = included
            .iter()
            .map(|s| p_success(s, Exposure::Exposed))
            .collect::<Result<_>>()?;
        let unexposed: Vec<Probability> = included
            .iter()
            .map(|s| p_success(s, Exposure::Unexposed))
            .collect::<Result<_>>()?;
        let min_exposed = exposed.iter().min().expect("nonempty");
        let max_unexposed = unexposed.iter().max().expect("nonempty");
        Some((min_exposed < max_unexposed, min_exposed >= max_unexposed))
    } else {
        None
    };

    let case_label = classify_included(&included)?;

    Ok(ReversalReport {
        per_stratum,
        pooled,
        reversal,
        mirror,
        necessary_condition_holds: conds.map(|c| c.0),
        sufficient_avoidance_holds: conds.map(|c| c.1),
        case_label,
        weights_u,
        weights_v,
        weight_gaps,
        warnings,
    })
}

fn reversal_verdict(
    per_stratum: &[StratumAssociation],
    pooled: &AssociationMeasure,
) -> (Reversal, bool) {
    let all_nonneg = per_stratum.iter().all(|s| s.measure.sign != Sign::Negative);
    let all_pos = per_stratum.iter().all(|s| s.measure.sign == Sign::Positive);
    let all_nonpos = per_stratum.iter().all(|s| s.measure.sign != Sign::Positive);
    let all_neg = per_stratum.iter().all(|s| s.measure.sign == Sign::Negative);
    match pooled.sign {
        Sign::Negative if all_pos => (Reversal::Strict, false),
        Sign::Negative if all_nonneg => (Reversal::Weak, false),
        Sign::Positive if all_neg => (Reversal::Strict, true),
        Sign::Positive if all_nonpos => (Reversal::Weak, true),
        _ => (Reversal::None, false),
    }
}

fn binary(table: &StratifiedTable) -> Result<(&Stratum, &Stratum)> {
    if table.len() != 2 {
        return Err(Error::NotBinaryStratifier(table.len()));
    }
    Ok((&table.strata()[0], &table.strata()[1]))
}

/// Interval-overlap necessary condition for the paradox (K = 2):
/// Min{p(x|y,z), p(x|y,z')} < Max{p(x|y',z), p(x|y',z')}.
pub fn check_necessary_condition(table: &StratifiedTable) -> Result<bool> {
    let (z, z1) = binary(table)?;
    let min_exposed = p_success(z, Exposure::Exposed)?.min(p_success(z1, Exposure::Exposed)?);
    let max_unexposed =
        p_success(z, Exposure::Unexposed)?.max(p_success(z1, Exposure::Unexposed)?);
    Ok(min_exposed < max_unexposed)
}

/// Sufficient condition for non-occurrence (K = 2):
/// Min{p(x|y,z), p(x|y,z')} >= Max{p(x|y',z), p(x|y',z')}.
pub fn check_sufficient_avoidance(table: &StratifiedTable) -> Result<bool> {
    Ok(!check_necessary_condition(table)?)
}

/// Sub-segment lengths around the marginal mark on the chosen arm:
/// (p(x|y) - p(x|y,z'), p(x|y,z) - p(x|y)) with z the first stratum.
/// The pair stands in the exact ratio p(z|y) : p(z'|y).
pub fn dissection(table: &StratifiedTable, side: Side) -> Result<(Rational, Rational)> {
    let (z, z1) = binary(table)?;
    let given = side.exposure();
    let p_z = p_success(z, given)?;
    let p_z1 = p_success(z1, given)?;
    if p_z == p_z1 {
        return Err(Error::DegenerateSegment(p_z.to_string()));
    }
    let marginal = table.pool().cond_prob(Outcome::Success, given)?;
    Ok((
        marginal.as_rational() - p_z1.as_rational(),
        p_z.as_rational() - marginal.as_rational(),
    ))
}

fn case_of_pair(a: Ordering, b: Ordering) -> CaseLabel {
    // a compares p(x|y,z) with p(x|y,z'), b compares p(x|y',z) with p(x|y',z').
    // Ties fall to the first case in enumeration order whose weak form holds.
    if a != Ordering::Less && b != Ordering::Less {
        CaseLabel::Case1
    } else if a != Ordering::Greater && b != Ordering::Greater {
        CaseLabel::Case2
    } else if a == Ordering::Less {
        CaseLabel::Case3
    } else {
        CaseLabel::Case4
    }
}

fn classify_included(included: &[&Stratum]) -> Result<CaseLabel> {
    let exposed: Vec<Probability> = included
        .iter()
        .map(|s| p_success(s, Exposure::Exposed))
        .collect::<Result<_>>()?;
    let unexposed: Vec<Probability> = included
        .iter()
        .map(|s| p_success(s, Exposure::Unexposed))
        .collect::<Result<_>>()?;
    let mut label: Option<CaseLabel> = None;
    for j in 0..included.len() {
        for k in (j + 1)..included.len() {
            let case = case_of_pair(exposed[j].cmp(&exposed[k]), unexposed[j].cmp(&unexposed[k]));
            match label {
                None => label = Some(case),
                Some(prev) if prev == case => {}
                Some(_) => return Ok(CaseLabel::Mixed),
            }
        }
    }
    Ok(label.expect("at least one pair"))
}

/// Ordering pattern of the two strata's conditionals (K = 2 only).
pub fn classify_case(table: &StratifiedTable) -> Result<CaseLabel> {
    let (z, z1) = binary(table)?;
    classify_included(&[z, z1])
}

/// Marginal and per-stratum gaps between the joint and the product of
/// marginals: p(x,y) - p(x)p(y) and p(x,y|z_k) - p(x|z_k)p(y|z_k).
#[derive(Debug, Clone, Serialize)]
pub struct IndependenceGap {
    pub marginal_gap: Rat,
    pub conditional_gaps: Vec<Rat>,
}

pub fn independence_gap(table: &StratifiedTable) -> Result<IndependenceGap> {
    let grand = table.grand_total();
    if grand == 0 {
        return Err(Error::EmptyTable);
    }
    let pooled = table.pool();
    let frac = |num: u64, den: u64| crate::prob::ratio(num as i64, den as i64);
    let p_xy = frac(pooled.success_exposed, grand);
    let p_x = frac(pooled.success_exposed + pooled.success_unexposed, grand);
    let p_y = frac(pooled.success_exposed + pooled.failure_exposed, grand);
    let marginal_gap = p_xy - p_x * p_y;

    let mut conditional_gaps = Vec::with_capacity(table.len());
    for s in table.strata() {
        let n = s.counts.total();
        if n == 0 {
            return Err(Error::ZeroMargin(format!("stratum {:?} is empty", s.label)));
        }
        let p_xy = frac(s.counts.success_exposed, n);
        let p_x = frac(s.counts.success_exposed + s.counts.success_unexposed, n);
        let p_y = frac(s.counts.success_exposed + s.counts.failure_exposed, n);
        conditional_gaps.push(Rat(p_xy - p_x * p_y));
    }
    Ok(IndependenceGap {
        marginal_gap: Rat(marginal_gap),
        conditional_gaps,
    })
}

/// Exact weighted-average identity: p(x|y) = sum_k p(z_k|y) p(x|y,z_k).
/// Exposed true on every valid table; used by tests and the synthesis
/// verifier.
pub fn weighted_average_identity_holds(table: &StratifiedTable) -> Result<bool> {
    let pooled = table.pool();
    for given in [Exposure::Exposed, Exposure::Unexposed] {
        let marginal = pooled.cond_prob(Outcome::Success, given)?;
        let pooled_margin = pooled.margin(given);
        let mut acc = Rational::zero();
        for s in table.strata() {
            let w = Probability::from_counts(s.counts.margin(given), pooled_margin)?;
            let p = p_success(s, given)?;
            acc += w.as_rational() * p.as_rational();
        }
        if &acc != marginal.as_rational() {
            return Ok(false);
        }
    }
    Ok(true)
}
