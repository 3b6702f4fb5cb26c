//! 2x2 and 2x2xK count tables and the exact conditional / marginal
//! probabilities computed from them.
//!
//! Orientation convention: the caller fixes which X-value is "success" and
//! which Y-value is "exposed" when building the table. The mirror instance of
//! the paradox is reached by [`CellCounts::relabel_outcome`], not by duplicated
//! detection logic.

use num::Zero;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{Probability, Rational, Sign};

/// Value of the binary outcome variable X.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Failure,
}

/// Value of the binary exposure variable Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exposure {
    Exposed,
    Unexposed,
}

/// A 2x2 table of nonnegative counts over outcome X and exposure Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    /// X = success, Y = exposed.
    pub success_exposed: u64,
    /// X = failure, Y = exposed.
    pub failure_exposed: u64,
    /// X = success, Y = unexposed.
    pub success_unexposed: u64,
    /// X = failure, Y = unexposed.
    pub failure_unexposed: u64,
}

impl CellCounts {
    pub fn new(
        success_exposed: u64,
        failure_exposed: u64,
        success_unexposed: u64,
        failure_unexposed: u64,
    ) -> CellCounts {
        CellCounts {
            success_exposed,
            failure_exposed,
            success_unexposed,
            failure_unexposed,
        }
    }

    pub fn total(&self) -> u64 {
        self.success_exposed + self.failure_exposed + self.success_unexposed + self.failure_unexposed
    }

    /// Count of records with the given exposure value.
    pub fn margin(&self, given: Exposure) -> u64 {
        match given {
            Exposure::Exposed => self.success_exposed + self.failure_exposed,
            Exposure::Unexposed => self.success_unexposed + self.failure_unexposed,
        }
    }

    pub fn cell(&self, outcome: Outcome, given: Exposure) -> u64 {
        match (outcome, given) {
            (Outcome::Success, Exposure::Exposed) => self.success_exposed,
            (Outcome::Failure, Exposure::Exposed) => self.failure_exposed,
            (Outcome::Success, Exposure::Unexposed) => self.success_unexposed,
            (Outcome::Failure, Exposure::Unexposed) => self.failure_unexposed,
        }
    }

    /// p(outcome | given), exact.
    pub fn cond_prob(&self, outcome: Outcome, given: Exposure) -> Result<Probability> {
        let margin = self.margin(given);
        if margin == 0 {
            let name = match given {
                Exposure::Exposed => "exposed",
                Exposure::Unexposed => "unexposed",
            };
            return Err(Error::ZeroMargin(format!("no {name} records")));
        }
        Probability::from_counts(self.cell(outcome, given), margin)
    }

    /// Risk difference p(x|y) - p(x|y') with its exact sign.
    pub fn association(&self) -> Result<AssociationMeasure> {
        let p_exposed = self.cond_prob(Outcome::Success, Exposure::Exposed)?;
        let p_unexposed = self.cond_prob(Outcome::Success, Exposure::Unexposed)?;
        let delta = p_exposed.as_rational() - p_unexposed.as_rational();
        Ok(AssociationMeasure::from_delta(delta))
    }

    /// Swaps the success and failure labels of X. Flips the sign of the
    /// risk difference.
    pub fn relabel_outcome(&self) -> CellCounts {
        CellCounts {
            success_exposed: self.failure_exposed,
            failure_exposed: self.success_exposed,
            success_unexposed: self.failure_unexposed,
            failure_unexposed: self.success_unexposed,
        }
    }

    pub fn checked_add(&self, other: &CellCounts) -> CellCounts {
        CellCounts {
            success_exposed: self.success_exposed + other.success_exposed,
            failure_exposed: self.failure_exposed + other.failure_exposed,
            success_unexposed: self.success_unexposed + other.success_unexposed,
            failure_unexposed: self.failure_unexposed + other.failure_unexposed,
        }
    }
}

/// Risk difference and its exact sign.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AssociationMeasure {
    #[serde(serialize_with = "crate::prob::serialize_rational")]
    pub delta: Rational,
    pub sign: Sign,
}

impl AssociationMeasure {
    pub fn from_delta(delta: Rational) -> AssociationMeasure {
        let sign = Sign::of(&delta);
        AssociationMeasure { delta, sign }
    }
}

/// One labeled stratum of a 2x2xK table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stratum {
    pub label: String,
    pub counts: CellCounts,
}

/// K labeled strata for a stratifier Z. Construction requires at least one
/// stratum and unique labels; reversal analysis additionally requires K >= 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StratifiedTable {
    strata: Vec<Stratum>,
}

impl StratifiedTable {
    pub fn new(strata: Vec<(String, CellCounts)>) -> Result<StratifiedTable> {
        if strata.is_empty() {
            return Err(Error::EmptyStratifiedTable(0));
        }
        for (i, (label, _)) in strata.iter().enumerate() {
            if strata[..i].iter().any(|(l, _)| l == label) {
                return Err(Error::DuplicateStratum(label.clone()));
            }
        }
        Ok(StratifiedTable {
            strata: strata
                .into_iter()
                .map(|(label, counts)| Stratum { label, counts })
                .collect(),
        })
    }

    pub fn strata(&self) -> &[Stratum] {
        &self.strata
    }

    pub fn len(&self) -> usize {
        self.strata.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strata.is_empty()
    }

    /// Cell-wise sum over strata (amalgamation).
    pub fn pool(&self) -> CellCounts {
        self.strata
            .iter()
            .fold(CellCounts::new(0, 0, 0, 0), |acc, s| acc.checked_add(&s.counts))
    }

    pub fn grand_total(&self) -> u64 {
        self.strata.iter().map(|s| s.counts.total()).sum()
    }

    /// Normalizes counts to an exact joint distribution p(x, y, z).
    pub fn to_joint(&self) -> Result<JointTable> {
        let total = self.grand_total();
        if total == 0 {
            return Err(Error::EmptyTable);
        }
        let entries = self
            .strata
            .iter()
            .map(|s| {
                let cell = |c: u64| Probability::from_counts(c, total).expect("cell <= total");
                JointStratum {
                    label: s.label.clone(),
                    success_exposed: cell(s.counts.success_exposed),
                    failure_exposed: cell(s.counts.failure_exposed),
                    success_unexposed: cell(s.counts.success_unexposed),
                    failure_unexposed: cell(s.counts.failure_unexposed),
                }
            })
            .collect();
        Ok(JointTable { entries })
    }

    pub fn relabel_outcome(&self) -> StratifiedTable {
        StratifiedTable {
            strata: self
                .strata
                .iter()
                .map(|s| Stratum {
                    label: s.label.clone(),
                    counts: s.counts.relabel_outcome(),
                })
                .collect(),
        }
    }
}

/// Exact joint probabilities p(x, y, z); entries sum to exactly 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JointTable {
    pub entries: Vec<JointStratum>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct JointStratum {
    pub label: String,
    pub success_exposed: Probability,
    pub failure_exposed: Probability,
    pub success_unexposed: Probability,
    pub failure_unexposed: Probability,
}

impl JointTable {
    pub fn sum(&self) -> Rational {
        self.entries.iter().fold(Rational::zero(), |acc, e| {
            acc + e.success_exposed.as_rational()
                + e.failure_exposed.as_rational()
                + e.success_unexposed.as_rational()
                + e.failure_unexposed.as_rational()
        })
    }
}

/// A small worked example: recovery x treatment stratified by sex.
/// Male stratum (7, 3, 18, 12), female stratum (9, 21, 2, 8).
pub fn table1() -> StratifiedTable {
    StratifiedTable::new(vec![
        ("male".to_string(), CellCounts::new(7, 3, 18, 12)),
        ("female".to_string(), CellCounts::new(9, 21, 2, 8)),
    ])
    .expect("table1 is valid")
}
