//! Mixture predictions over selection mechanisms: a latent choice T of which
//! population a new case is drawn from, with the predicted probability being
//! the prior-weighted average of the per-mechanism conditionals. T is taken
//! to be independent of everything else, so p(t | evidence) = p(t).

use num::{One, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::prob::{Probability, Rational};
use crate::tables::{Exposure, Outcome, StratifiedTable};

#[derive(Debug, Clone, Serialize)]
pub struct Mechanism {
    pub label: String,
    pub prior: Probability,
    pub conditional: Probability,
}

/// A prior over selection mechanisms plus the conditional probability the
/// target event has under each. Priors must sum to exactly 1.
#[derive(Debug, Clone, Serialize)]
pub struct MixtureSpec {
    pub mechanisms: Vec<Mechanism>,
}

impl MixtureSpec {
    pub fn new(mechanisms: Vec<Mechanism>) -> Result<MixtureSpec> {
        let sum = mechanisms
            .iter()
            .fold(Rational::zero(), |a, m| a + m.prior.as_rational());
        if !sum.is_one() {
            let deficit = Rational::one() - &sum;
            return Err(Error::PriorNotNormalized {
                sum: sum.to_string(),
                deficit: deficit.to_string(),
            });
        }
        Ok(MixtureSpec { mechanisms })
    }
}

/// Sum over mechanisms of prior times conditional, exact.
pub fn mixture_predict(spec: &MixtureSpec) -> Probability {
    let value = spec.mechanisms.iter().fold(Rational::zero(), |a, m| {
        a + m.prior.as_rational() * m.conditional.as_rational()
    });
    Probability::new(value).expect("convex combination of probabilities")
}

/// Builds the mechanism list from a binary-stratified table: one mechanism
/// per stratum plus one for the pooled table, in that order, and delegates to
/// [`mixture_predict`].
pub fn mixture_from_table(
    table: &StratifiedTable,
    priors: &[Probability],
    outcome: Outcome,
    given: Exposure,
) -> Result<Probability> {
    if priors.len() != table.len() + 1 {
        return Err(Error::Parse(format!(
            "expected {} priors (one per stratum plus pooled), got {}",
            table.len() + 1,
            priors.len()
        )));
    }
    let mut mechanisms = Vec::with_capacity(priors.len());
    for (s, prior) in table.strata().iter().zip(priors) {
        mechanisms.push(Mechanism {
            label: s.label.clone(),
            prior: prior.clone(),
            conditional: s.counts.cond_prob(outcome, given)?,
        });
    }
    mechanisms.push(Mechanism {
        label: "pooled".to_string(),
        prior: priors.last().expect("nonempty").clone(),
        conditional: table.pool().cond_prob(outcome, given)?,
    });
    Ok(mixture_predict(&MixtureSpec::new(mechanisms)?))
}
