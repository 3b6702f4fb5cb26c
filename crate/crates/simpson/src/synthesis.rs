//! Constructs a binary stratifier Z for a marginal 2x2 table with non-extreme
//! dependence, splitting each cell into two strata so that both strata carry
//! the reversed association. The search is a deterministic coarse-to-fine
//! sweep over dyadic split fractions, ordered to drive p(z|y) low and p(z|y')
//! high first (the weight asymmetry a reversal needs), with a float prefilter
//! and an exact rational confirmation of every accepted candidate.

use num::{BigInt, One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::analysis::{detect_reversal, DetectOptions, Reversal, ReversalReport};
use crate::error::{Error, Result};
use crate::prob::{ratio, Rat, Rational, Sign};
use crate::tables::{CellCounts, StratifiedTable};

/// Exact probability 2x2 table: four nonnegative cell masses summing to 1.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProbTable {
    #[serde(serialize_with = "crate::prob::serialize_rational")]
    pub success_exposed: Rational,
    #[serde(serialize_with = "crate::prob::serialize_rational")]
    pub failure_exposed: Rational,
    #[serde(serialize_with = "crate::prob::serialize_rational")]
    pub success_unexposed: Rational,
    #[serde(serialize_with = "crate::prob::serialize_rational")]
    pub failure_unexposed: Rational,
}

impl ProbTable {
    pub fn new(
        success_exposed: Rational,
        failure_exposed: Rational,
        success_unexposed: Rational,
        failure_unexposed: Rational,
    ) -> Result<ProbTable> {
        for c in [
            &success_exposed,
            &failure_exposed,
            &success_unexposed,
            &failure_unexposed,
        ] {
            if c.is_negative() {
                return Err(Error::InvalidProbability(c.to_string()));
            }
        }
        let sum = &success_exposed + &failure_exposed + &success_unexposed + &failure_unexposed;
        if !sum.is_one() {
            return Err(Error::InvalidProbability(format!(
                "probability table sums to {sum}, not 1"
            )));
        }
        Ok(ProbTable {
            success_exposed,
            failure_exposed,
            success_unexposed,
            failure_unexposed,
        })
    }
}

/// The marginal table to split: observed counts or an exact probability table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum Marginal {
    Counts(CellCounts),
    Probabilities(ProbTable),
}

impl Marginal {
    /// Cell masses in the order (xy, x'y, xy', x'y').
    fn masses(&self) -> [Rational; 4] {
        match self {
            Marginal::Counts(c) => [
                ratio(c.success_exposed as i64, 1),
                ratio(c.failure_exposed as i64, 1),
                ratio(c.success_unexposed as i64, 1),
                ratio(c.failure_unexposed as i64, 1),
            ],
            Marginal::Probabilities(p) => [
                p.success_exposed.clone(),
                p.failure_exposed.clone(),
                p.success_unexposed.clone(),
                p.failure_unexposed.clone(),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    /// Split the integer counts themselves; pooling is cell-exact but a
    /// reversing split may not exist for small totals.
    Integer,
    /// Split cell masses by exact rational fractions; always succeeds for
    /// non-extreme marginals.
    Fractional,
}

#[derive(Debug, Clone)]
pub struct SynthesisSpec {
    pub marginal: Marginal,
    /// Required strict per-stratum gap on the target side.
    /// Defaults to |marginal delta| / 100 (1/100 absolute for the zero-delta
    /// override case).
    pub margin_epsilon: Option<Rational>,
    pub mode: SplitMode,
    /// A zero marginal delta has nothing to reverse; with this flag set the
    /// synthesizer still produces a split whose strata share a strict
    /// positive association.
    pub allow_zero_delta: bool,
}

impl SynthesisSpec {
    pub fn fractional(marginal: Marginal) -> SynthesisSpec {
        SynthesisSpec {
            marginal,
            margin_epsilon: None,
            mode: SplitMode::Fractional,
            allow_zero_delta: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisResult {
    /// Two strata labeled "z" and "z_prime" whose pool reproduces the
    /// marginal (cell-exact in integer mode, probability-exact in fractional
    /// mode, where the counts carry a common scale factor).
    pub stratified: StratifiedTable,
    pub certificate: ReversalReport,
    /// Fraction of each marginal cell assigned to stratum z, in the order
    /// (xy, x'y, xy', x'y').
    pub split_fractions: [Rat; 4],
}

/// Internal view of the validated spec.
struct Prepared {
    /// Integer cell masses with the common denominator cleared.
    masses: [u64; 4],
    /// Sign the strata must share (opposite of the marginal sign, or
    /// positive for the zero-delta override).
    target: Sign,
    epsilon: Rational,
}

fn prepare(spec: &SynthesisSpec) -> Result<Prepared> {
    let m = spec.marginal.masses();
    let p_exposed_def = &m[0] + &m[1];
    let p_unexposed_def = &m[2] + &m[3];
    if p_exposed_def.is_zero() || p_unexposed_def.is_zero() {
        return Err(Error::ZeroMargin("marginal table".into()));
    }
    let p_exposed = &m[0] / &p_exposed_def;
    let p_unexposed = &m[2] / &p_unexposed_def;
    for p in [&p_exposed, &p_unexposed] {
        if p.is_zero() || p.is_one() {
            return Err(Error::ExtremeDependence(p.to_string()));
        }
    }
    let delta = &p_exposed - &p_unexposed;
    let target = match Sign::of(&delta) {
        Sign::Zero if spec.allow_zero_delta => Sign::Positive,
        Sign::Zero => return Err(Error::DegenerateMarginal),
        s => s.flipped(),
    };
    let epsilon = match &spec.margin_epsilon {
        Some(e) => {
            if !e.is_positive() {
                return Err(Error::Parse("margin epsilon must be > 0".into()));
            }
            e.clone()
        }
        None if delta.is_zero() => ratio(1, 100),
        None => delta.abs() / ratio(100, 1),
    };

    // Clear denominators: lcm of the four cell denominators.
    let lcm = m.iter().fold(BigInt::one(), |acc, r| {
        num::integer::lcm(acc, r.denom().clone())
    });
    let mut masses = [0u64; 4];
    for (i, r) in m.iter().enumerate() {
        let scaled = r.numer() * (&lcm / r.denom());
        masses[i] = scaled
            .to_u64()
            .filter(|&v| v < (1 << 40))
            .ok_or_else(|| Error::Parse("marginal resolution too fine to integerize".into()))?;
    }
    Ok(Prepared {
        masses,
        target,
        epsilon,
    })
}

/// Checks one candidate split exactly. Stratum z gets `z[i]` of cell i and
/// stratum z' the rest. Returns the stratified table when both strata have
/// defined conditionals and their deltas clear epsilon on the target side.
fn confirm_exact(z: [u64; 4], z1: [u64; 4], target: Sign, epsilon: &Rational) -> Option<StratifiedTable> {
    for cells in [&z, &z1] {
        if cells[0] + cells[1] == 0 || cells[2] + cells[3] == 0 {
            return None;
        }
    }
    for cells in [&z, &z1] {
        let delta = ratio(cells[0] as i64, (cells[0] + cells[1]) as i64)
            - ratio(cells[2] as i64, (cells[2] + cells[3]) as i64);
        let ok = match target {
            Sign::Positive => delta >= *epsilon,
            Sign::Negative => -delta >= *epsilon,
            Sign::Zero => unreachable!("target sign is never zero"),
        };
        if !ok {
            return None;
        }
    }
    StratifiedTable::new(vec![
        ("z".to_string(), CellCounts::new(z[0], z[1], z[2], z[3])),
        ("z_prime".to_string(), CellCounts::new(z1[0], z1[1], z1[2], z1[3])),
    ])
    .ok()
}

/// Float prefilter with slack; exact arithmetic re-checks anything accepted.
fn prefilter(z: [u64; 4], z1: [u64; 4], target: Sign, eps: f64) -> bool {
    for cells in [&z, &z1] {
        let ym = (cells[0] + cells[1]) as f64;
        let ypm = (cells[2] + cells[3]) as f64;
        if ym == 0.0 || ypm == 0.0 {
            return false;
        }
        let delta = cells[0] as f64 / ym - cells[2] as f64 / ypm;
        let signed = if target == Sign::Positive { delta } else { -delta };
        if signed < eps - 1e-9 {
            return false;
        }
    }
    true
}

fn level_order(d: u64, ascending: bool) -> Vec<u64> {
    let mut v: Vec<u64> = (0..=d).collect();
    if !ascending {
        v.reverse();
    }
    v
}

const MAX_DEPTH: u64 = 256;

fn search_fractional(p: &Prepared) -> Result<(StratifiedTable, [Rational; 4])> {
    // Drive p(z|y) low (small y-arm fractions) and p(z|y') high for a
    // positive target; mirrored for a negative target.
    let y_asc = p.target == Sign::Positive;
    let eps_f = crate::prob::rational_to_f64(&p.epsilon);
    let mut d = 2u64;
    while d <= MAX_DEPTH {
        let order_y = level_order(d, y_asc);
        let order_yp = level_order(d, !y_asc);
        for &a0 in &order_y {
            for &a1 in &order_y {
                for &a2 in &order_yp {
                    for &a3 in &order_yp {
                        // Candidates with all-even fractions were covered at
                        // the previous level.
                        if d > 2 && a0 % 2 == 0 && a1 % 2 == 0 && a2 % 2 == 0 && a3 % 2 == 0 {
                            continue;
                        }
                        let a = [a0, a1, a2, a3];
                        let mut z = [0u64; 4];
                        let mut z1 = [0u64; 4];
                        for i in 0..4 {
                            z[i] = a[i] * p.masses[i];
                            z1[i] = (d - a[i]) * p.masses[i];
                        }
                        if !prefilter(z, z1, p.target, eps_f) {
                            continue;
                        }
                        if let Some(t) = confirm_exact(z, z1, p.target, &p.epsilon) {
                            let fr = |n: u64| ratio(n as i64, d as i64);
                            return Ok((t, [fr(a0), fr(a1), fr(a2), fr(a3)]));
                        }
                    }
                }
            }
        }
        d *= 2;
    }
    Err(Error::InfeasibleAtResolution(format!(
        "no dyadic split found up to denominator {MAX_DEPTH}"
    )))
}

fn search_integer(counts: &CellCounts, p: &Prepared) -> Result<(StratifiedTable, [Rational; 4])> {
    let n = [
        counts.success_exposed,
        counts.failure_exposed,
        counts.success_unexposed,
        counts.failure_unexposed,
    ];
    let space: u128 = n.iter().map(|&c| c as u128 + 1).product();
    if space > 1u128 << 32 {
        return Err(Error::InfeasibleAtResolution(format!(
            "integer split space of {space} candidates exceeds the search cap"
        )));
    }
    let y_asc = p.target == Sign::Positive;
    let eps_f = crate::prob::rational_to_f64(&p.epsilon);
    for &k0 in &level_order(n[0], y_asc) {
        for &k1 in &level_order(n[1], y_asc) {
            for &k2 in &level_order(n[2], !y_asc) {
                for &k3 in &level_order(n[3], !y_asc) {
                    let z = [k0, k1, k2, k3];
                    let z1 = [n[0] - k0, n[1] - k1, n[2] - k2, n[3] - k3];
                    if !prefilter(z, z1, p.target, eps_f) {
                        continue;
                    }
                    if let Some(t) = confirm_exact(z, z1, p.target, &p.epsilon) {
                        let fr = |k: u64, n: u64| ratio(k as i64, n.max(1) as i64);
                        return Ok((
                            t,
                            [fr(k0, n[0]), fr(k1, n[1]), fr(k2, n[2]), fr(k3, n[3])],
                        ));
                    }
                }
            }
        }
    }
    Err(Error::InfeasibleAtResolution(
        "every unit-count split exhausted".into(),
    ))
}

/// Finds a two-stratum split of the marginal whose strata both carry the
/// association reversed against the marginal sign. Deterministic for a given
/// spec.
pub fn synthesize_reverser(spec: &SynthesisSpec) -> Result<SynthesisResult> {
    let prepared = prepare(spec)?;
    let (stratified, fractions) = match (&spec.mode, &spec.marginal) {
        (SplitMode::Integer, Marginal::Counts(c)) => search_integer(c, &prepared)?,
        (SplitMode::Integer, Marginal::Probabilities(_)) => {
            return Err(Error::Parse(
                "integer mode requires a count marginal".into(),
            ))
        }
        (SplitMode::Fractional, _) => search_fractional(&prepared)?,
    };
    let certificate = detect_reversal(&stratified, &DetectOptions::default())?;
    Ok(SynthesisResult {
        stratified,
        certificate,
        split_fractions: fractions.map(Rat),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub ok: bool,
    pub diagnostics: Vec<String>,
}

/// Re-checks a synthesis result against its spec: pooling reproduces the
/// marginal, every stratum clears the epsilon gap on the target side, the
/// certificate's verdict recomputes identically, and the stratifier weights
/// lean the way a reversal requires.
pub fn verify(result: &SynthesisResult, spec: &SynthesisSpec) -> Verification {
    let mut diagnostics = Vec::new();
    let prepared = match prepare(spec) {
        Ok(p) => p,
        Err(e) => {
            return Verification {
                ok: false,
                diagnostics: vec![format!("spec invalid: {e}")],
            }
        }
    };

    let pooled = result.stratified.pool();
    match (&spec.mode, &spec.marginal) {
        (SplitMode::Integer, Marginal::Counts(c)) => {
            if &pooled != c {
                diagnostics.push(format!(
                    "pooling mismatch: pooled {pooled:?} != marginal {c:?}"
                ));
            }
        }
        _ => {
            // Probability-exact: pooled cells proportional to marginal masses.
            let m = spec.marginal.masses();
            let m_total = m.iter().fold(Rational::zero(), |a, r| a + r);
            let p_total = ratio(pooled.total() as i64, 1);
            let cells = [
                pooled.success_exposed,
                pooled.failure_exposed,
                pooled.success_unexposed,
                pooled.failure_unexposed,
            ];
            for (i, &c) in cells.iter().enumerate() {
                if ratio(c as i64, 1) * &m_total != m[i].clone() * &p_total {
                    diagnostics.push(format!(
                        "pooling mismatch in cell {i}: pooled proportion differs from marginal"
                    ));
                }
            }
        }
    }

    match detect_reversal(&result.stratified, &DetectOptions::default()) {
        Ok(re) => {
            if re.reversal != result.certificate.reversal || re.mirror != result.certificate.mirror
            {
                diagnostics.push("certificate verdict does not recompute identically".into());
            }
            if prepared.target != Sign::Zero {
                for s in &re.per_stratum {
                    let signed = match prepared.target {
                        Sign::Positive => s.measure.delta.clone(),
                        _ => -s.measure.delta.clone(),
                    };
                    if signed < prepared.epsilon {
                        diagnostics.push(format!(
                            "stratum {:?} delta misses the epsilon gap",
                            s.label
                        ));
                    }
                }
            }
            // Weight direction: the stratum with the larger exposed
            // conditional must be rarer in the arm that pooled low.
            if re.reversal != Reversal::None && result.stratified.len() == 2 {
                let strata = result.stratified.strata();
                let p0 = strata[0]
                    .counts
                    .cond_prob(crate::tables::Outcome::Success, crate::tables::Exposure::Exposed);
                let p1 = strata[1]
                    .counts
                    .cond_prob(crate::tables::Outcome::Success, crate::tables::Exposure::Exposed);
                if let (Ok(p0), Ok(p1)) = (p0, p1) {
                    let hi = if p0 >= p1 { 0 } else { 1 };
                    let u = &re.weights_u[hi];
                    let v = &re.weights_v[hi];
                    let aligned = if re.mirror { u > v } else { u < v };
                    if !aligned {
                        diagnostics.push("stratifier weights lean against the reversal".into());
                    }
                }
            }
            let marginal_delta_nonzero = {
                let m = spec.marginal.masses();
                let d = &m[0] / (&m[0] + &m[1]) - &m[2] / (&m[2] + &m[3]);
                !d.is_zero()
            };
            if marginal_delta_nonzero && re.reversal == Reversal::None {
                diagnostics.push("no reversal in the synthesized strata".into());
            }
        }
        Err(e) => diagnostics.push(format!("certificate recomputation failed: {e}")),
    }

    Verification {
        ok: diagnostics.is_empty(),
        diagnostics,
    }
}
