//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Tolerances and time limits are fixed below.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_traits::Zero;
use secure_sampling::common_info::{classify, is_separable, AdversaryModel, Channel};
use secure_sampling::engine::{enumerate_executions, monte_carlo, Message, Side};
use secure_sampling::fixtures;
use secure_sampling::game::{
    enumerate_nash_2x2, expected_payoffs, hull_contains, is_correlated_eq, lift_convex_combination,
    nash_payoff_hull, optimize_ce, Game, PayoffPoint, StrategyProfile,
};
use secure_sampling::prob::{total_variation, JointPMF};
use secure_sampling::protocols::{
    make_adversary, mediator_sampler, naive_polite_coinflip, one_sided_sampler,
    rational_deviation_search, xor_coinflip, AdversaryStrategy, MessageBehavior, MessageRule,
    OutputRule, ProtocolSpec,
};
use secure_sampling::rational::{int, one, rat, to_f64, zero, Rational};
use secure_sampling::security::{
    check_malicious, check_rational_exhaustive, check_semi_honest, fixture_games,
    lemma_implication_suite, lemma_fixtures, MaliciousVerdict, RETRY_CAP,
};

const FAST: Duration = Duration::from_secs(1);
const PER_FIXTURE: Duration = Duration::from_secs(10);
const LEAKAGE_TOLERANCE: f64 = 1e-9;
const MC_TRIALS: u64 = 100_000;
const MC_SEED: u64 = 0;
const MC_TV_BOUND: f64 = 0.01;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn ok<T, E: std::fmt::Display>(r: Result<T, E>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn within(limit: Duration, started: Instant, what: &str) -> Result<(), String> {
    let t = started.elapsed();
    ensure(t < limit, format!("{what} took {t:?}, limit {limit:?}"))
}

fn honest_distribution(spec: &ProtocolSpec) -> Result<BTreeMap<(String, String), Rational>, String> {
    let tree = ok(enumerate_executions(
        spec.party_a.as_ref(),
        spec.party_b.as_ref(),
        spec.mode,
        RETRY_CAP,
    ))?;
    ensure(tree.tail_mass.is_zero(), "nonzero tail mass")?;
    Ok(tree.output_distribution())
}

fn marginal_under(spec: &ProtocolSpec, side: Side, strategy: &AdversaryStrategy) -> Result<BTreeMap<String, Rational>, String> {
    let (a, b) = spec.with_adversary(side, strategy);
    let tree = ok(enumerate_executions(a.as_ref(), b.as_ref(), spec.mode, RETRY_CAP))?;
    ensure(tree.tail_mass.is_zero(), "nonzero tail mass")?;
    Ok(tree.marginal(side.other()))
}

fn table_one() -> Check {
    let started = Instant::now();
    // (fixture, [polite semi-honest, polite malicious, cheap semi-honest, cheap malicious])
    let expected: [(&str, JointPMF, [bool; 4]); 4] = [
        ("uniform product", fixtures::uniform_product(), [true, true, true, true]),
        ("coin", fixtures::coin(), [true, false, true, true]),
        ("block", fixtures::block(), [true, false, true, true]),
        ("triangle", fixtures::triangle(), [false, false, false, false]),
    ];
    let quadrants = [
        (Channel::PoliteTalk, AdversaryModel::SemiHonest),
        (Channel::PoliteTalk, AdversaryModel::Malicious),
        (Channel::CheapTalk, AdversaryModel::SemiHonest),
        (Channel::CheapTalk, AdversaryModel::Malicious),
    ];
    for (name, p, want) in &expected {
        for ((channel, adversary), w) in quadrants.iter().zip(want) {
            let v = classify(p, *channel, *adversary);
            ensure(
                v.feasible == *w,
                format!("{name} {channel}/{adversary}: got {v}"),
            )?;
        }
    }
    within(FAST, started, "classification")?;
    Ok("16/16 quadrant verdicts match".into())
}

fn profile_probs(g: &Game, s: &StrategyProfile) -> (Rational, Rational) {
    let _ = g;
    (s.px.get(0).clone(), s.py.get(0).clone())
}

fn equilibria() -> Check {
    let started = Instant::now();
    let bos = fixtures::battle_of_sexes();
    let mut got: Vec<_> = ok(enumerate_nash_2x2(&bos))?
        .iter()
        .map(|s| profile_probs(&bos, s))
        .collect();
    got.sort();
    // P_X(M), P_Y(M): pure (M,M), pure (O,O), and P_X(M) = P_Y(O) = 2/3.
    let mut want = vec![(one(), one()), (zero(), zero()), (rat(2, 3), rat(1, 3))];
    want.sort();
    ensure(got == want, format!("BoS equilibria {got:?}"))?;

    let cod = fixtures::chicken_or_dare();
    let mut got: Vec<_> = ok(enumerate_nash_2x2(&cod))?
        .iter()
        .map(|s| profile_probs(&cod, s))
        .collect();
    got.sort();
    // P_X(C), P_Y(C): (C,D), (D,C), and P_X(D) = P_Y(D) = 1/2.
    let mut want = vec![(one(), zero()), (zero(), one()), (rat(1, 2), rat(1, 2))];
    want.sort();
    ensure(got == want, format!("CoD equilibria {got:?}"))?;

    for l in [zero(), rat(1, 4), rat(1, 2), rat(3, 4), one()] {
        ensure(
            ok(is_correlated_eq(&bos, &fixtures::bos_diagonal(l.clone())))?,
            format!("BoS diagonal {l} rejected"),
        )?;
    }
    ensure(ok(is_correlated_eq(&cod, &fixtures::cod_ce()))?, "CoD CE rejected")?;
    within(FAST, started, "equilibria")?;
    Ok("3 BoS + 3 CoD equilibria exact; 5 BoS diagonals and CoD CE accepted".into())
}

fn mediator_exactness() -> Check {
    let mut notes = Vec::new();
    for (name, p) in [
        ("coin", fixtures::coin()),
        ("block", fixtures::block()),
        ("bos-diag 1/2", fixtures::bos_diagonal(rat(1, 2))),
    ] {
        let started = Instant::now();
        let spec = ok(mediator_sampler(&p))?;
        let tree = ok(enumerate_executions(
            spec.party_a.as_ref(),
            spec.party_b.as_ref(),
            spec.mode,
            RETRY_CAP,
        ))?;
        ensure(tree.tail_mass.is_zero(), format!("{name}: tail {}", tree.tail_mass))?;
        let tv = total_variation(&tree.output_distribution(), &p.cells());
        ensure(tv.is_zero(), format!("{name}: TV {tv}"))?;
        let v = ok(check_semi_honest(&tree, &p))?;
        ensure(v.passed(), format!("{name}: semi-honest {v}"))?;
        within(PER_FIXTURE, started, name)?;
        notes.push(format!("{name} {:?}", started.elapsed()));
    }
    Ok(format!("TV = 0 and Markov chains exact ({})", notes.join(", ")))
}

fn xor_robustness() -> Check {
    let started = Instant::now();
    let spec = xor_coinflip();
    let options = [Message::Value(0), Message::Value(1), Message::Bottom];
    let mut family: Vec<AdversaryStrategy> = options
        .iter()
        .map(|m| AdversaryStrategy {
            messages: MessageBehavior::Table(vec![MessageRule::Fixed(*m)]),
            output: OutputRule::Honest,
        })
        .collect();
    for a in options {
        for b in options {
            family.push(AdversaryStrategy {
                messages: MessageBehavior::Table(vec![MessageRule::ByOwnRandom(vec![a, b])]),
                output: OutputRule::Honest,
            });
        }
    }
    family.push(ok(make_adversary("abort:1"))?);
    let uniform: BTreeMap<String, Rational> = [("0".to_string(), rat(1, 2)), ("1".to_string(), rat(1, 2))].into();
    for side in [Side::A, Side::B] {
        for s in &family {
            let m = marginal_under(&spec, side, s)?;
            ensure(m == uniform, format!("{s} as {side}: honest output {m:?}"))?;
        }
    }
    within(FAST, started, "XOR family")?;
    Ok(format!("{} behaviors per side keep the honest bit exactly uniform", family.len()))
}

fn polite_attack() -> Check {
    let spec = naive_polite_coinflip();
    for b in 0..2u64 {
        let s = ok(make_adversary(&format!("bit-fix:{b}")))?;
        let (pa, pb) = spec.with_adversary(Side::B, &s);
        let tree = ok(enumerate_executions(pa.as_ref(), pb.as_ref(), spec.mode, RETRY_CAP))?;
        let m = tree.marginal(Side::A);
        ensure(
            m.get(&b.to_string()) == Some(&one()),
            format!("bit-fix:{b}: Alice's output {m:?}"),
        )?;
    }
    Ok("Pr[output = b] = 1 for b in {0, 1}".into())
}

fn one_sided_strawman() -> Check {
    let p = fixtures::cod_ce();
    let cod = fixtures::chicken_or_dare();
    let spec = one_sided_sampler(&p);
    let tree = ok(enumerate_executions(
        spec.party_a.as_ref(),
        spec.party_b.as_ref(),
        spec.mode,
        RETRY_CAP,
    ))?;
    let v = ok(check_semi_honest(&tree, &p))?;
    ensure(v.correctness.passed(), "one-sided sampler is incorrect")?;
    let w = v.witness_a.as_ref().ok_or("no Markov violation for Alice")?;
    ensure(w.lhs() != w.rhs() && w.recheck(&tree), "witness does not recheck")?;
    ensure(
        (v.leakage_a - 2.0 / 3.0).abs() <= LEAKAGE_TOLERANCE,
        format!("leakage {}", v.leakage_a),
    )?;

    let view = ok(make_adversary("view-output"))?;
    let (a, b) = spec.with_adversary(Side::A, &view);
    let observed = ok(ok(enumerate_executions(a.as_ref(), b.as_ref(), spec.mode, RETRY_CAP))?.output_pmf())?;
    let verdict = ok(check_malicious(&observed, &p, Side::B))?;
    ensure(
        matches!(verdict, MaliciousVerdict::Infeasible { .. }),
        format!("view-output Alice: {verdict}"),
    )?;

    let peek = AdversaryStrategy::honest().with_output(OutputRule::BestResponse);
    let dev = ok(rational_deviation_search(&cod, &spec, &[peek], Side::A))?;
    ensure(
        dev.utility == rat(11, 3) && dev.target_utility == rat(10, 3) && dev.gain == rat(1, 3),
        format!("deviation {} vs {}", dev.utility, dev.target_utility),
    )?;

    let constant = fixtures::constant_game();
    let any = one_sided_sampler(&fixtures::triangle());
    let r = ok(check_rational_exhaustive("constant", &constant, &any))?;
    ensure(r.passed(), format!("constant game: {r}"))?;
    Ok(format!(
        "leakage {:.12} bit, view-output infeasible, gain {} ({} vs {}), constant game passes",
        v.leakage_a, dev.gain, dev.utility, dev.target_utility
    ))
}

/// Solves a square system exactly; `None` if singular.
fn solve_square(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = &a[r][col] / &a[col][col];
                for c in col..n {
                    let d = &f * &a[col][c];
                    a[r][c] -= d;
                }
                let d = &f * &b[col];
                b[r] -= d;
            }
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

/// Maximizes welfare over correlated equilibria of a 2x2 game by trying
/// every basic solution: the normalization plus three tight inequalities.
fn vertex_oracle(g: &Game) -> (Rational, Vec<Vec<Rational>>) {
    let u1 = g.u1();
    let u2 = g.u2();
    // Inequalities `row . p >= 0` over p = (p00, p01, p10, p11).
    let mut ineqs: Vec<Vec<Rational>> = (0..4)
        .map(|i| (0..4).map(|j| if i == j { one() } else { zero() }).collect())
        .collect();
    for x in 0..2 {
        let alt = 1 - x;
        let mut row = vec![zero(); 4];
        for y in 0..2 {
            row[x * 2 + y] = &u1[x][y] - &u1[alt][y];
        }
        ineqs.push(row);
    }
    for y in 0..2 {
        let alt = 1 - y;
        let mut row = vec![zero(); 4];
        for x in 0..2 {
            row[x * 2 + y] = &u2[x][y] - &u2[x][alt];
        }
        ineqs.push(row);
    }
    let mut best: Option<(Rational, Vec<Vec<Rational>>)> = None;
    let n = ineqs.len();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let a = vec![vec![one(); 4], ineqs[i].clone(), ineqs[j].clone(), ineqs[k].clone()];
                let Some(p) = solve_square(a, vec![one(), zero(), zero(), zero()]) else {
                    continue;
                };
                let feasible = ineqs
                    .iter()
                    .all(|row| row.iter().zip(&p).map(|(c, v)| c * v).sum::<Rational>() >= zero());
                if !feasible {
                    continue;
                }
                let value: Rational = (0..4).map(|v| &p[v] * (&u1[v / 2][v % 2] + &u2[v / 2][v % 2])).sum();
                let better = best.as_ref().map_or(true, |(b, _)| value > *b);
                if better {
                    best = Some((value, vec![p[0..2].to_vec(), p[2..4].to_vec()]));
                }
            }
        }
    }
    best.expect("polytope has a vertex")
}

fn ce_optimization() -> Check {
    let cod = fixtures::chicken_or_dare();
    let (s, pay) = ok(optimize_ce(&cod, (one(), one())))?;
    let value = &pay.p1 + &pay.p2;
    ensure(value == rat(20, 3), format!("value {value}"))?;
    ensure(s == fixtures::cod_ce(), format!("optimizer\n{s}"))?;
    let (oracle_value, oracle_point) = vertex_oracle(&cod);
    ensure(oracle_value == value, format!("oracle value {oracle_value}"))?;
    ensure(oracle_point == s.mass(), "oracle optimizer differs")?;
    Ok(format!("value {value}; support (C,C),(C,D),(D,C) at 1/3 each; vertex oracle agrees"))
}

fn lifting() -> Check {
    let bos = fixtures::battle_of_sexes();
    let ne = ok(enumerate_nash_2x2(&bos))?;
    let hull = ok(nash_payoff_hull(&bos))?;
    let payoffs: Vec<PayoffPoint> = ne
        .iter()
        .map(|s| expected_payoffs(&bos, &s.joint()))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let mut cases: Vec<(Vec<usize>, Vec<Rational>)> = Vec::new();
    for i in 0..ne.len() {
        for j in i + 1..ne.len() {
            for w in [rat(1, 2), rat(1, 3), rat(3, 4), rat(1, 7)] {
                cases.push((vec![i, j], vec![w.clone(), one() - w]));
            }
        }
    }
    for w in [
        vec![rat(1, 3), rat(1, 3), rat(1, 3)],
        vec![rat(1, 2), rat(1, 4), rat(1, 4)],
        vec![rat(1, 6), rat(1, 3), rat(1, 2)],
        vec![rat(5, 8), rat(1, 8), rat(1, 4)],
    ] {
        cases.push((vec![0, 1, 2], w));
    }
    for (idx, w) in &cases {
        let chosen: Vec<StrategyProfile> = idx.iter().map(|&i| ne[i].clone()).collect();
        let lifted = ok(lift_convex_combination(&bos, &chosen, w))?;
        ensure(is_separable(&lifted), format!("{idx:?} {w:?}: not separable"))?;
        ensure(
            classify(&lifted, Channel::CheapTalk, AdversaryModel::Malicious).feasible,
            "cheap-talk malicious infeasible",
        )?;
        let ext = bos.extended(idx.len());
        ensure(ok(is_correlated_eq(&ext, &lifted))?, "lifted joint is not a CE of the extended game")?;
        let got = ok(expected_payoffs(&ext, &lifted))?;
        let mut want = PayoffPoint::new(zero(), zero());
        for (&i, wi) in idx.iter().zip(w) {
            want.p1 += wi * &payoffs[i].p1;
            want.p2 += wi * &payoffs[i].p2;
        }
        ensure(got == want, format!("payoff {got} vs {want}"))?;
        ensure(hull_contains(&hull, &got), format!("{got} outside Nash hull"))?;
    }
    Ok(format!("{} convex combinations lift exactly into the Nash hull", cases.len()))
}

fn lemma_suite() -> Check {
    let report = ok(lemma_implication_suite(&lemma_fixtures(), &fixture_games()))?;
    let premises = report.entries.iter().filter(|e| e.malicious).count();
    let rational: usize = report
        .entries
        .iter()
        .filter(|e| e.malicious)
        .map(|e| e.rational.len())
        .sum();
    ensure(premises >= 5, format!("only {premises} malicious-secure fixtures"))?;
    ensure(rational >= 4, format!("only {rational} rational checks under the premise"))?;
    Ok(format!(
        "{} fixtures, {premises} malicious-secure, {rational} game checks, no implication violated",
        report.entries.len()
    ))
}

fn monte_carlo_consistency() -> Check {
    let spec = ok(mediator_sampler(&fixtures::coin()))?;
    let exact = honest_distribution(&spec)?;
    let run = || monte_carlo(spec.party_a.as_ref(), spec.party_b.as_ref(), spec.mode, MC_TRIALS, MC_SEED);
    let first = ok(run())?;
    let tv = to_f64(&total_variation(&first.cells(), &exact));
    ensure(tv <= MC_TV_BOUND, format!("TV {tv}"))?;
    let second = ok(run())?;
    ensure(first == second, "rerun differs")?;
    ensure(
        first.cells().values().all(|v| (v * int(MC_TRIALS as i64)).is_integer()),
        "frequencies not over the trial count",
    )?;
    Ok(format!("{MC_TRIALS} trials, seed {MC_SEED}: TV {tv:.5} <= {MC_TV_BOUND}; rerun identical"))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("feasibility table", table_one),
        ("2x2 equilibria", equilibria),
        ("mediator exactness", mediator_exactness),
        ("XOR robustness", xor_robustness),
        ("polite-talk attack", polite_attack),
        ("one-sided strawman", one_sided_strawman),
        ("CE optimization", ce_optimization),
        ("lifting", lifting),
        ("implication suite", lemma_suite),
        ("Monte Carlo consistency", monte_carlo_consistency),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = started.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name}: {detail} [{elapsed:.2?}]", i + 1),
            Err(detail) => {
                failures += 1;
                println!("criterion {:>2} FAIL {name}: {detail} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
