//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! The sweep-based criteria are checked with an independent integer oracle
//! (cross-multiplied i128 comparisons straight from the count ratios), with
//! the library implementation cross-checked against the oracle on every
//! reversal-positive table and a randomized sample.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use simpson::analysis::{
    check_necessary_condition, detect_reversal, dissection, weighted_average_identity_holds,
    DetectOptions, Reversal, Side,
};
use simpson::ingest::{aggregate, disaggregate, ColumnMapping};
use simpson::mixture::{mixture_predict, Mechanism, MixtureSpec};
use simpson::prob::{ratio, Probability};
use simpson::synthesis::{
    synthesize_reverser, verify, Marginal, ProbTable, SynthesisSpec,
};
use simpson::tables::{table1, CellCounts, Exposure, Outcome, StratifiedTable};

/// Independent oracle over one 2x2x2 count table, all comparisons done by
/// i128 cross-multiplication. Never touches the library's probability types.
mod oracle {
    /// (xy, x'y, xy', x'y') counts of one stratum.
    #[derive(Clone, Copy)]
    pub struct Str(pub [i128; 4]);

    impl Str {
        pub fn exposed_margin(&self) -> i128 {
            self.0[0] + self.0[1]
        }
        pub fn unexposed_margin(&self) -> i128 {
            self.0[2] + self.0[3]
        }
        /// Sign of p(x|y) - p(x|y'); margins must be positive.
        pub fn delta_sign(&self) -> i128 {
            (self.0[0] * self.unexposed_margin() - self.0[2] * self.exposed_margin()).signum()
        }
    }

    pub struct Pair {
        pub s1: Str,
        pub s2: Str,
    }

    impl Pair {
        pub fn pooled(&self) -> Str {
            Str([
                self.s1.0[0] + self.s2.0[0],
                self.s1.0[1] + self.s2.0[1],
                self.s1.0[2] + self.s2.0[2],
                self.s1.0[3] + self.s2.0[3],
            ])
        }

        /// Inequalities (1)-(3) as stated: weak within strata, strict pooled.
        pub fn weak_reversal(&self) -> bool {
            self.s1.delta_sign() >= 0 && self.s2.delta_sign() >= 0 && self.pooled().delta_sign() < 0
        }

        pub fn strict_reversal(&self) -> bool {
            self.s1.delta_sign() > 0 && self.s2.delta_sign() > 0 && self.pooled().delta_sign() < 0
        }

        pub fn mirror_weak(&self) -> bool {
            self.s1.delta_sign() <= 0 && self.s2.delta_sign() <= 0 && self.pooled().delta_sign() > 0
        }

        /// Min{p(x|y,z), p(x|y,z')} < Max{p(x|y',z), p(x|y',z')}.
        pub fn overlap(&self) -> bool {
            // min over exposed-arm fractions a_k / y_k
            let lt = |an: i128, ad: i128, bn: i128, bd: i128| an * bd < bn * ad;
            let (a1, y1) = (self.s1.0[0], self.s1.exposed_margin());
            let (a2, y2) = (self.s2.0[0], self.s2.exposed_margin());
            let (min_n, min_d) = if lt(a1, y1, a2, y2) { (a1, y1) } else { (a2, y2) };
            let (b1, w1) = (self.s1.0[2], self.s1.unexposed_margin());
            let (b2, w2) = (self.s2.0[2], self.s2.unexposed_margin());
            let (max_n, max_d) = if lt(b1, w1, b2, w2) { (b2, w2) } else { (b1, w1) };
            lt(min_n, min_d, max_n, max_d)
        }

        /// Conditional dependences (4)-(5): p(x,y|z_k) >= p(x|z_k)p(y|z_k).
        pub fn conditional_deps_nonneg(&self) -> bool {
            for s in [&self.s1, &self.s2] {
                let n = s.0.iter().sum::<i128>();
                let x = s.0[0] + s.0[2];
                let y = s.exposed_margin();
                if s.0[0] * n < x * y {
                    return false;
                }
            }
            true
        }

        /// p(x,y) >= p(x)p(y) - (p(x,z)p(y,z') + p(x,z')p(y,z)), times n^2.
        pub fn eq9_bound_holds(&self) -> bool {
            let n: i128 = self.s1.0.iter().sum::<i128>() + self.s2.0.iter().sum::<i128>();
            let s = self.s1.0[0] + self.s2.0[0];
            let x1 = self.s1.0[0] + self.s1.0[2];
            let x2 = self.s2.0[0] + self.s2.0[2];
            let y1 = self.s1.exposed_margin();
            let y2 = self.s2.exposed_margin();
            s * n >= (x1 + x2) * (y1 + y2) - (x1 * y2 + x2 * y1)
        }

        /// Dissection identity on both arms, cross-multiplied:
        /// S*y2 - s2*Y == s1*Y - S*y1 with S, Y pooled.
        pub fn dissection_identity_holds(&self) -> bool {
            let check = |s1: i128, y1: i128, s2: i128, y2: i128| {
                let s = s1 + s2;
                let y = y1 + y2;
                s * y2 - s2 * y == s1 * y - s * y1
            };
            check(
                self.s1.0[0],
                self.s1.exposed_margin(),
                self.s2.0[0],
                self.s2.exposed_margin(),
            ) && check(
                self.s1.0[2],
                self.s1.unexposed_margin(),
                self.s2.0[2],
                self.s2.unexposed_margin(),
            )
        }
    }
}

fn prob(n: i64, d: i64) -> Probability {
    Probability::new(ratio(n, d)).unwrap()
}

fn to_table(p: &oracle::Pair) -> StratifiedTable {
    let cells = |s: &oracle::Str| {
        CellCounts::new(s.0[0] as u64, s.0[1] as u64, s.0[2] as u64, s.0[3] as u64)
    };
    StratifiedTable::new(vec![
        ("z".into(), cells(&p.s1)),
        ("z_prime".into(), cells(&p.s2)),
    ])
    .unwrap()
}

/// All strata with total <= max_total and both conditioning margins positive.
fn sweep_strata(max_total: i128) -> Vec<oracle::Str> {
    let mut out = Vec::new();
    for a in 0..=max_total {
        for b in 0..=(max_total - a) {
            for c in 0..=(max_total - a - b) {
                for d in 0..=(max_total - a - b - c) {
                    if a + b > 0 && c + d > 0 {
                        out.push(oracle::Str([a, b, c, d]));
                    }
                }
            }
        }
    }
    out
}

fn random_stratum(rng: &mut ChaCha8Rng, max_cell: i128) -> oracle::Str {
    loop {
        let s = oracle::Str([
            rng.gen_range(0..=max_cell),
            rng.gen_range(0..=max_cell),
            rng.gen_range(0..=max_cell),
            rng.gen_range(0..=max_cell),
        ]);
        if s.exposed_margin() > 0 && s.unexposed_margin() > 0 {
            return s;
        }
    }
}

fn impl_agrees_with_oracle(pair: &oracle::Pair) {
    let table = to_table(pair);
    let report = detect_reversal(&table, &DetectOptions::default()).unwrap();
    let (oracle_rev, oracle_mirror) = if pair.strict_reversal() {
        (Reversal::Strict, false)
    } else if pair.weak_reversal() {
        (Reversal::Weak, false)
    } else if pair.s1.delta_sign() < 0 && pair.s2.delta_sign() < 0 && pair.pooled().delta_sign() > 0
    {
        (Reversal::Strict, true)
    } else if pair.mirror_weak() {
        (Reversal::Weak, true)
    } else {
        (Reversal::None, false)
    };
    assert_eq!(report.reversal, oracle_rev, "table {:?}", table);
    assert_eq!(report.mirror, oracle_mirror, "table {:?}", table);
    assert_eq!(
        check_necessary_condition(&table).unwrap(),
        pair.overlap(),
        "table {:?}",
        table
    );
}

#[test]
fn criterion_1_table1_replication_exact() {
    let t = table1();
    let male = &t.strata()[0].counts;
    let female = &t.strata()[1].counts;
    assert_eq!(
        male.cond_prob(Outcome::Success, Exposure::Exposed).unwrap(),
        prob(7, 10)
    );
    assert_eq!(
        male.cond_prob(Outcome::Success, Exposure::Unexposed).unwrap(),
        prob(18, 30)
    );
    assert_eq!(
        female.cond_prob(Outcome::Success, Exposure::Exposed).unwrap(),
        prob(9, 30)
    );
    assert_eq!(
        female.cond_prob(Outcome::Success, Exposure::Unexposed).unwrap(),
        prob(2, 10)
    );
    let pooled = t.pool();
    assert_eq!(
        pooled.cond_prob(Outcome::Success, Exposure::Exposed).unwrap(),
        prob(16, 40)
    );
    assert_eq!(
        pooled.cond_prob(Outcome::Success, Exposure::Unexposed).unwrap(),
        prob(20, 40)
    );

    // Warm up allocators etc., then time the real call.
    let _ = detect_reversal(&t, &DetectOptions::default()).unwrap();
    let start = Instant::now();
    let report = detect_reversal(&t, &DetectOptions::default()).unwrap();
    let elapsed = start.elapsed();

    assert_eq!(report.weights_u[0], prob(1, 4));
    assert_eq!(report.weights_v[0], prob(3, 4));
    assert_eq!(report.reversal, Reversal::Strict);
    assert!(!report.mirror);
    assert!(
        elapsed.as_micros() < 1000,
        "detect_reversal took {elapsed:?}, budget 1 ms"
    );
    println!("ACCEPTANCE PASS: criterion 1 — Table 1 replication exact in {elapsed:?}");
}

#[test]
fn criterion_2_mixture_is_exactly_9_20() {
    let spec = MixtureSpec::new(vec![
        Mechanism {
            label: "pack1".into(),
            prior: prob(1, 4),
            conditional: prob(7, 10),
        },
        Mechanism {
            label: "pack2".into(),
            prior: prob(1, 4),
            conditional: prob(3, 10),
        },
        Mechanism {
            label: "pooled".into(),
            prior: prob(1, 2),
            conditional: prob(2, 5),
        },
    ])
    .unwrap();
    assert_eq!(mixture_predict(&spec), prob(9, 20));
    println!("ACCEPTANCE PASS: criterion 2 — mixture prediction is exactly 9/20");
}

/// Criteria 3-6 share the exhaustive sweep; the oracle work is cheap integer
/// arithmetic so each criterion re-runs it independently.
fn swept_pairs(max_total: i128) -> Vec<oracle::Pair> {
    let strata = sweep_strata(max_total);
    let mut pairs = Vec::with_capacity(strata.len() * strata.len());
    for &s1 in &strata {
        for &s2 in &strata {
            pairs.push(oracle::Pair { s1, s2 });
        }
    }
    pairs
}

fn randomized_pairs(count: usize, max_cell: i128, seed: u64) -> Vec<oracle::Pair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| oracle::Pair {
            s1: random_stratum(&mut rng, max_cell),
            s2: random_stratum(&mut rng, max_cell),
        })
        .collect()
}

#[test]
fn criterion_3_necessary_condition_sweep() {
    let start = Instant::now();
    let mut reversals = 0u64;
    let mut checked_impl = 0u64;
    for (i, pair) in swept_pairs(12)
        .iter()
        .chain(randomized_pairs(10_000, 200, 0xC3).iter())
        .enumerate()
    {
        if pair.weak_reversal() {
            assert!(
                pair.overlap(),
                "Case-1 weak reversal without interval overlap: {:?} {:?}",
                pair.s1.0,
                pair.s2.0
            );
            reversals += 1;
            // Cross-check the library verdict on every reversal and on a
            // thinned sample of the rest.
            impl_agrees_with_oracle(pair);
            checked_impl += 1;
        } else if i % 1009 == 0 {
            impl_agrees_with_oracle(pair);
            checked_impl += 1;
        }
    }
    let elapsed = start.elapsed();
    assert!(reversals > 0, "sweep found no reversals; oracle broken");
    assert!(
        elapsed.as_secs() < 60,
        "sweep took {elapsed:?}, budget 60 s"
    );
    println!(
        "ACCEPTANCE PASS: criterion 3 — {reversals} weak reversals all satisfy Min < Max \
         ({checked_impl} library cross-checks) in {elapsed:?}"
    );
}

#[test]
fn criterion_4_sufficient_avoidance_sweep() {
    let mut avoided = 0u64;
    for pair in swept_pairs(12)
        .iter()
        .chain(randomized_pairs(10_000, 200, 0xC4).iter())
    {
        if !pair.overlap() {
            assert!(
                !pair.weak_reversal() && !pair.mirror_weak(),
                "Min >= Max but reversal occurred: {:?} {:?}",
                pair.s1.0,
                pair.s2.0
            );
            avoided += 1;
        }
    }
    assert!(avoided > 0);
    println!(
        "ACCEPTANCE PASS: criterion 4 — Min >= Max implied no reversal on {avoided} tables"
    );
}

#[test]
fn criterion_5_eq9_bound_sweep() {
    let mut satisfying = 0u64;
    for pair in swept_pairs(12)
        .iter()
        .chain(randomized_pairs(10_000, 200, 0xC5).iter())
    {
        if pair.conditional_deps_nonneg() {
            assert!(
                pair.eq9_bound_holds(),
                "bound violated: {:?} {:?}",
                pair.s1.0,
                pair.s2.0
            );
            satisfying += 1;
        }
    }
    assert!(satisfying > 0);
    println!(
        "ACCEPTANCE PASS: criterion 5 — product-of-marginals bound held on {satisfying} tables"
    );
}

#[test]
fn criterion_6_identities_sweep() {
    let pairs = swept_pairs(12);
    for pair in pairs.iter().chain(randomized_pairs(10_000, 200, 0xC6).iter()) {
        assert!(
            pair.dissection_identity_holds(),
            "dissection identity failed: {:?} {:?}",
            pair.s1.0,
            pair.s2.0
        );
    }
    // Library-level check of both identities (exact rationals) on a thinned
    // slice of the sweep plus the full randomized set.
    let mut checked = 0u64;
    for (i, pair) in pairs
        .iter()
        .chain(randomized_pairs(10_000, 200, 0xC6).iter())
        .enumerate()
    {
        if i % 997 != 0 {
            continue;
        }
        let table = to_table(pair);
        assert!(weighted_average_identity_holds(&table).unwrap());
        for side in [Side::Exposed, Side::Unexposed] {
            match dissection(&table, side) {
                Ok((left, right)) => {
                    // left : right must equal p(z|y) : p(z'|y) exactly.
                    let report = detect_reversal(&table, &DetectOptions::default()).unwrap();
                    let (u, u1) = match side {
                        Side::Exposed => (&report.weights_u[0], &report.weights_u[1]),
                        Side::Unexposed => (&report.weights_v[0], &report.weights_v[1]),
                    };
                    assert_eq!(
                        left * u1.as_rational(),
                        right * u.as_rational(),
                        "dissection ratio mismatch on {table:?}"
                    );
                }
                Err(_) => {} // degenerate segment: dissection undefined
            }
        }
        checked += 1;
    }
    println!(
        "ACCEPTANCE PASS: criterion 6 — weighted-average and dissection identities exact \
         (full integer sweep + {checked} rational cross-checks)"
    );
}

/// Brute-force feasibility oracle for synthesis: scans split fractions in
/// steps of 1/32 and confirms candidates with exact integer arithmetic.
/// Independent of the library's search order and prefilter.
fn grid_oracle_feasible(masses: [i128; 4], target_positive: bool, eps: (i128, i128)) -> bool {
    const G: i128 = 32;
    let (en, ed) = eps;
    let delta_clears = |cells: [i128; 4]| -> bool {
        let ym = cells[0] + cells[1];
        let ypm = cells[2] + cells[3];
        if ym == 0 || ypm == 0 {
            return false;
        }
        let num = cells[0] * ypm - cells[2] * ym;
        let signed = if target_positive { num } else { -num };
        signed * ed >= en * ym * ypm
    };
    for k0 in 0..=G {
        for k1 in 0..=G {
            for k2 in 0..=G {
                for k3 in 0..=G {
                    let z = [
                        k0 * masses[0],
                        k1 * masses[1],
                        k2 * masses[2],
                        k3 * masses[3],
                    ];
                    let z1 = [
                        (G - k0) * masses[0],
                        (G - k1) * masses[1],
                        (G - k2) * masses[2],
                        (G - k3) * masses[3],
                    ];
                    if delta_clears(z) && delta_clears(z1) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

#[test]
fn criterion_7_synthesis_completeness_on_grid() {
    let start = Instant::now();
    // Every non-extreme marginal probability table with denominator <= 20,
    // counted once in lowest terms, with nonzero delta.
    let mut grid: Vec<[i128; 4]> = Vec::new();
    for total in 4..=20i128 {
        for a in 1..total {
            for b in 1..(total - a) {
                for c in 1..(total - a - b) {
                    let d = total - a - b - c;
                    if d < 1 {
                        continue;
                    }
                    let g = gcd4(a, b, c, d);
                    if g != 1 {
                        continue; // already seen at a smaller denominator
                    }
                    let delta_num = a * (c + d) - c * (a + b);
                    if delta_num == 0 {
                        continue;
                    }
                    grid.push([a, b, c, d]);
                }
            }
        }
    }
    assert!(grid.len() > 1000, "grid unexpectedly small: {}", grid.len());

    let mut specs = Vec::with_capacity(grid.len());
    for m in &grid {
        let total = m.iter().sum::<i128>();
        let cell = |v: i128| ratio(v as i64, total as i64);
        let spec = SynthesisSpec::fractional(Marginal::Probabilities(
            ProbTable::new(cell(m[0]), cell(m[1]), cell(m[2]), cell(m[3])).unwrap(),
        ));
        let result = synthesize_reverser(&spec).unwrap_or_else(|e| {
            panic!("synthesis failed on marginal {m:?}: {e}");
        });
        let v = verify(&result, &spec);
        assert!(v.ok, "verification failed on {m:?}: {:?}", v.diagnostics);
        specs.push(*m);
    }

    // Independent 1/32-grid oracle on a random 100-case subsample.
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    for _ in 0..100 {
        let m = specs[rng.gen_range(0..specs.len())];
        let delta_num = m[0] * (m[2] + m[3]) - m[2] * (m[0] + m[1]);
        let delta_den = (m[0] + m[1]) * (m[2] + m[3]);
        let target_positive = delta_num < 0;
        let eps = (delta_num.abs(), 100 * delta_den);
        assert!(
            grid_oracle_feasible(m, target_positive, eps),
            "oracle disagrees on feasibility for {m:?}"
        );
    }
    let elapsed = start.elapsed();
    assert!(
        elapsed.as_secs() < 120,
        "synthesis sweep took {elapsed:?}, budget 120 s"
    );
    println!(
        "ACCEPTANCE PASS: criterion 7 — synthesis succeeded and verified on all {} grid \
         marginals; 1/32-grid oracle agreed on 100 subsamples; {elapsed:?}",
        grid.len()
    );
}

fn gcd4(a: i128, b: i128, c: i128, d: i128) -> i128 {
    fn gcd(mut a: i128, mut b: i128) -> i128 {
        while b != 0 {
            let t = a % b;
            a = b;
            b = t;
        }
        a
    }
    gcd(gcd(a, b), gcd(c, d))
}

#[test]
fn criterion_8_figure_fidelity_and_golden_svg() {
    use simpson::figure::{build_figure, render_svg, RenderOptions};

    let model = build_figure(&table1()).unwrap();
    assert_eq!(model.top.cond_z_prime, prob(3, 10));
    assert_eq!(model.top.cond_z, prob(7, 10));
    assert_eq!(model.top.marginal, prob(2, 5));
    assert_eq!(model.bottom.cond_z_prime, prob(1, 5));
    assert_eq!(model.bottom.cond_z, prob(3, 5));
    assert_eq!(model.bottom.marginal, prob(1, 2));
    let (u, u1) = model.top.ratio.clone().unwrap();
    assert_eq!(
        u.as_rational() * ratio(3, 1),
        u1.as_rational().clone(),
        "top ratio must be 1:3"
    );
    let (v, v1) = model.bottom.ratio.clone().unwrap();
    assert_eq!(
        v.as_rational().clone(),
        v1.as_rational() * ratio(3, 1),
        "bottom ratio must be 3:1"
    );

    let rendered = render_svg(&model, &RenderOptions::default());
    let golden = include_str!("golden/table1.svg");
    assert_eq!(rendered, golden, "rendered SVG differs from the golden file");
    println!("ACCEPTANCE PASS: criterion 8 — figure marks exact and SVG matches golden byte-for-byte");
}

#[test]
fn criterion_9_ingestion_round_trip() {
    let mapping = ColumnMapping {
        outcome_column: "outcome".into(),
        exposure_column: "exposure".into(),
        stratifier_columns: vec!["stratum".into()],
        success_label: "s".into(),
        failure_label: Some("f".into()),
        exposed_label: "e".into(),
        unexposed_label: Some("u".into()),
        max_strata: 16,
    };

    // Table 1 from its 80-record expansion.
    let t1_mapping = ColumnMapping {
        outcome_column: "recovery".into(),
        exposure_column: "treatment".into(),
        stratifier_columns: vec!["sex".into()],
        success_label: "yes".into(),
        failure_label: Some("no".into()),
        exposed_label: "treated".into(),
        unexposed_label: Some("untreated".into()),
        max_strata: 16,
    };
    let records = disaggregate(&table1(), &t1_mapping, "sex").unwrap();
    assert_eq!(records.rows.len(), 80);
    let agg = aggregate(&records, &t1_mapping, "sex").unwrap();
    assert_eq!(agg.table, table1());

    let mut rng = ChaCha8Rng::seed_from_u64(0xC9);
    for case in 0..1000 {
        let k = rng.gen_range(2..=4usize);
        let mut strata = Vec::with_capacity(k);
        for i in 0..k {
            // Each stratum must contribute at least one record to survive
            // the round trip.
            let cells = loop {
                let c = CellCounts::new(
                    rng.gen_range(0..=15),
                    rng.gen_range(0..=15),
                    rng.gen_range(0..=15),
                    rng.gen_range(0..=15),
                );
                if c.total() > 0 {
                    break c;
                }
            };
            strata.push((format!("stratum_{i}"), cells));
        }
        let table = StratifiedTable::new(strata).unwrap();
        let records = disaggregate(&table, &mapping, "stratum").unwrap();
        let agg = aggregate(&records, &mapping, "stratum").unwrap();
        assert_eq!(agg.table, table, "round trip failed on case {case}");
    }
    println!("ACCEPTANCE PASS: criterion 9 — disaggregate/aggregate identity on 1000 tables and Table 1's 80 records");
}
