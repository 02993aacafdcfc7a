//! Checkers for correctness and for security against semi-honest,
//! malicious and rational parties.
//!
//! All verdicts are computed exactly from an [`ExecutionTree`] and every
//! failure carries a witness that can be recomputed from the same tree.
//! Malicious and rational checks quantify over finite adversary families
//! and are reported as holding "within family".

use std::collections::BTreeMap;
use std::fmt;

use num_traits::{Signed, Zero};

use crate::engine::{enumerate_executions, ExecutionTree, Side};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::game::{is_correlated_eq, Game};
use crate::lp::{solve_lp, LinearProgram, LpOutcome, Relation};
use crate::prob::JointPMF;
use crate::protocols::{
    coin_map, joint_uniform, malicious_family, mediator_sampler, naive_polite_coinflip,
    one_sided_sampler, rational_deviation_search, rational_family, xor_coinflip,
    AdversaryStrategy, Deviation, ProtocolSpec, RationalScope, SecurityClaim,
};
use crate::rational::{one, rat, to_f64, zero, Rational};

/// Retry cap for the enumerations run by the checkers.
pub const RETRY_CAP: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub enum CorrectnessVerdict {
    Pass,
    Fail {
        u: String,
        v: String,
        expected: Rational,
        got: Rational,
    },
}

impl CorrectnessVerdict {
    pub fn passed(&self) -> bool {
        *self == CorrectnessVerdict::Pass
    }
}

impl fmt::Display for CorrectnessVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrectnessVerdict::Pass => f.write_str("exact-pass"),
            CorrectnessVerdict::Fail { u, v, expected, got } => {
                write!(f, "fail at ({u}, {v}): expected {expected}, got {got}")
            }
        }
    }
}

/// Cell-by-cell exact comparison of the honest output joint with `target`.
pub fn check_correctness(tree: &ExecutionTree, target: &JointPMF) -> Result<CorrectnessVerdict> {
    tree.require_exact()?;
    let got = tree.output_distribution();
    let want = target.cells();
    let keys: std::collections::BTreeSet<_> = got.keys().chain(want.keys()).cloned().collect();
    for key in keys {
        let g = got.get(&key).cloned().unwrap_or_else(zero);
        let w = want.get(&key).cloned().unwrap_or_else(zero);
        if g != w {
            return Ok(CorrectnessVerdict::Fail {
                u: key.0,
                v: key.1,
                expected: w,
                got: g,
            });
        }
    }
    Ok(CorrectnessVerdict::Pass)
}

/// A triple violating `P(view, own, other) P(own) = P(view, own) P(own, other)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovWitness {
    pub side: Side,
    pub view: String,
    pub own: String,
    pub other: String,
    pub joint: Rational,
    pub view_own: Rational,
    pub own_mass: Rational,
    pub own_other: Rational,
}

impl MarkovWitness {
    pub fn lhs(&self) -> Rational {
        &self.joint * &self.own_mass
    }

    pub fn rhs(&self) -> Rational {
        &self.view_own * &self.own_other
    }

    /// Recomputes the four probabilities from `tree` and confirms that they
    /// match and still violate the identity.
    pub fn recheck(&self, tree: &ExecutionTree) -> bool {
        let t = MarkovTables::new(tree, self.side);
        fn get<K: Ord>(m: &BTreeMap<K, Rational>, k: &K) -> Rational {
            m.get(k).cloned().unwrap_or_else(zero)
        }
        let joint = get(&t.joint, &(self.view.clone(), self.own.clone(), self.other.clone()));
        let view_own = get(&t.view_own, &(self.view.clone(), self.own.clone()));
        let own_mass = get(&t.own, &self.own);
        let own_other = get(&t.own_other, &(self.own.clone(), self.other.clone()));
        joint == self.joint
            && view_own == self.view_own
            && own_mass == self.own_mass
            && own_other == self.own_other
            && self.lhs() != self.rhs()
    }
}

impl fmt::Display for MarkovWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "side {} view {} own={} other={}: {} != {}",
            self.side,
            self.view,
            self.own,
            self.other,
            self.lhs(),
            self.rhs()
        )
    }
}

struct MarkovTables {
    joint: BTreeMap<(String, String, String), Rational>,
    view_own: BTreeMap<(String, String), Rational>,
    own: BTreeMap<String, Rational>,
    own_other: BTreeMap<(String, String), Rational>,
}

impl MarkovTables {
    fn new(tree: &ExecutionTree, side: Side) -> Self {
        let mut t = MarkovTables {
            joint: BTreeMap::new(),
            view_own: BTreeMap::new(),
            own: BTreeMap::new(),
            own_other: BTreeMap::new(),
        };
        for leaf in &tree.leaves {
            let view = leaf.view(side).to_string();
            let own = leaf.output(side).to_string();
            let other = leaf.output(side.other()).to_string();
            let p = &leaf.probability;
            *t.joint.entry((view.clone(), own.clone(), other.clone())).or_insert_with(zero) += p;
            *t.view_own.entry((view, own.clone())).or_insert_with(zero) += p;
            *t.own.entry(own.clone()).or_insert_with(zero) += p;
            *t.own_other.entry((own, other)).or_insert_with(zero) += p;
        }
        t
    }

    fn first_violation(&self, side: Side) -> Option<MarkovWitness> {
        for ((view, own), view_own) in &self.view_own {
            for ((o, other), own_other) in self.own_other.range((own.clone(), String::new())..) {
                if o != own {
                    break;
                }
                let joint = self
                    .joint
                    .get(&(view.clone(), own.clone(), other.clone()))
                    .cloned()
                    .unwrap_or_else(zero);
                let own_mass = &self.own[own];
                if &joint * own_mass != view_own * own_other {
                    return Some(MarkovWitness {
                        side,
                        view: view.clone(),
                        own: own.clone(),
                        other: other.clone(),
                        joint,
                        view_own: view_own.clone(),
                        own_mass: own_mass.clone(),
                        own_other: own_other.clone(),
                    });
                }
            }
        }
        None
    }

    /// `I(view; other | own)` in bits.
    fn conditional_mutual_information(&self) -> f64 {
        self.joint
            .iter()
            .filter(|(_, p)| p.is_positive())
            .map(|((view, own, other), p)| {
                let num = p * &self.own[own];
                let den = &self.view_own[&(view.clone(), own.clone())]
                    * &self.own_other[&(own.clone(), other.clone())];
                to_f64(p) * (to_f64(&num) / to_f64(&den)).log2()
            })
            .sum::<f64>()
            .max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SemiHonestVerdict {
    pub correctness: CorrectnessVerdict,
    pub witness_a: Option<MarkovWitness>,
    pub witness_b: Option<MarkovWitness>,
    /// `I(View_A; V | U)` in bits (diagnostic only).
    pub leakage_a: f64,
    /// `I(View_B; U | V)` in bits (diagnostic only).
    pub leakage_b: f64,
}

impl SemiHonestVerdict {
    pub fn passed(&self) -> bool {
        self.correctness.passed() && self.witness_a.is_none() && self.witness_b.is_none()
    }
}

impl fmt::Display for SemiHonestVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.passed() {
            return f.write_str("pass");
        }
        if !self.correctness.passed() {
            return write!(f, "fail (incorrect: {})", self.correctness);
        }
        let w = self.witness_a.as_ref().or(self.witness_b.as_ref()).expect("a witness");
        write!(
            f,
            "fail ({w}; leakage A {:.6} bit, B {:.6} bit)",
            self.leakage_a, self.leakage_b
        )
    }
}

/// Exact test of both Markov chains `View_A - U - V` and `View_B - V - U`
/// plus correctness.
pub fn check_semi_honest(tree: &ExecutionTree, target: &JointPMF) -> Result<SemiHonestVerdict> {
    let correctness = check_correctness(tree, target)?;
    let a = MarkovTables::new(tree, Side::A);
    let b = MarkovTables::new(tree, Side::B);
    Ok(SemiHonestVerdict {
        correctness,
        witness_a: a.first_violation(Side::A),
        witness_b: b.first_violation(Side::B),
        leakage_a: a.conditional_mutual_information(),
        leakage_b: b.conditional_mutual_information(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum MaliciousVerdict {
    /// Channel `q(u | x)` witnessing feasibility, keyed by `(u, x)`.
    Feasible { channel: BTreeMap<(String, String), Rational> },
    /// Phase-one residual of the channel program.
    Infeasible { residual: Rational },
    /// The honest output marginal already differs from the target.
    MarginalMismatch {
        symbol: String,
        expected: Rational,
        got: Rational,
    },
}

impl MaliciousVerdict {
    pub fn feasible(&self) -> bool {
        matches!(self, MaliciousVerdict::Feasible { .. })
    }
}

impl fmt::Display for MaliciousVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaliciousVerdict::Feasible { .. } => f.write_str("feasible"),
            MaliciousVerdict::Infeasible { residual } => {
                write!(f, "infeasible (phase-one residual {residual})")
            }
            MaliciousVerdict::MarginalMismatch { symbol, expected, got } => write!(
                f,
                "infeasible (honest marginal at {symbol}: expected {expected}, got {got})"
            ),
        }
    }
}

fn orient(observed: &JointPMF, target: &JointPMF, honest_side: Side) -> (JointPMF, JointPMF) {
    match honest_side {
        Side::B => (observed.clone(), target.clone()),
        Side::A => (observed.transpose(), target.transpose()),
    }
}

fn honest_marginal_check(observed: &JointPMF, target: &JointPMF) -> Result<()> {
    let got: BTreeMap<&str, Rational> = observed
        .alphabet_y()
        .symbols()
        .iter()
        .map(String::as_str)
        .zip(observed.col_sums())
        .collect();
    let want: BTreeMap<&str, Rational> = target
        .alphabet_y()
        .symbols()
        .iter()
        .map(String::as_str)
        .zip(target.col_sums())
        .collect();
    let symbols: std::collections::BTreeSet<&str> = got.keys().chain(want.keys()).copied().collect();
    for s in symbols {
        let g = got.get(s).cloned().unwrap_or_else(zero);
        let w = want.get(s).cloned().unwrap_or_else(zero);
        if g != w {
            return Err(Error::MarginalMismatch {
                symbol: s.to_string(),
                expected: w,
                got: g,
            });
        }
    }
    Ok(())
}

/// Channel program with rows of `observed` as adversary outputs `u`, columns
/// as honest outputs `v`, and `target` over `(x, v)`: find `q(u | x) >= 0`
/// with `sum_u q(u | x) = 1` and `sum_x q(u | x) target(x, v) = observed(u, v)`.
/// Variable `u * |X| + x` is `q(u | x)`.
pub fn malicious_program(observed: &JointPMF, target: &JointPMF) -> LinearProgram {
    let nx = target.rows();
    let mut lp = LinearProgram::new();
    for u in observed.alphabet_x().symbols() {
        for x in target.alphabet_x().symbols() {
            lp.add_variable(format!("q[{u}|{x}]"), true);
        }
    }
    for x in 0..nx {
        lp.add_constraint(
            (0..observed.rows()).map(|u| (u * nx + x, one())),
            Relation::Eq,
            one(),
        );
    }
    for u in 0..observed.rows() {
        for (v, sym) in target.alphabet_y().symbols().iter().enumerate() {
            let obs = observed
                .alphabet_y()
                .index_of(sym)
                .map_or_else(zero, |j| observed.get(u, j).clone());
            lp.add_constraint(
                (0..nx).map(|x| (u * nx + x, target.get(x, v).clone())),
                Relation::Eq,
                obs,
            );
        }
    }
    lp
}

/// Decides whether some `X'` distributed like the target's adversary-side
/// marginal screens the adversary's output from the honest output.
///
/// `observed` has Alice's output on rows and Bob's on columns.
pub fn check_malicious(
    observed: &JointPMF,
    target: &JointPMF,
    honest_side: Side,
) -> Result<MaliciousVerdict> {
    let (obs, tgt) = orient(observed, target, honest_side);
    honest_marginal_check(&obs, &tgt)?;
    let lp = malicious_program(&obs, &tgt);
    Ok(match solve_lp(&lp)? {
        LpOutcome::Optimal { assignment, .. } => {
            let nx = tgt.rows();
            let mut channel = BTreeMap::new();
            for (u, us) in obs.alphabet_x().symbols().iter().enumerate() {
                for (x, xs) in tgt.alphabet_x().symbols().iter().enumerate() {
                    let q = &assignment[u * nx + x];
                    if !q.is_zero() {
                        channel.insert((us.clone(), xs.clone()), q.clone());
                    }
                }
            }
            MaliciousVerdict::Feasible { channel }
        }
        LpOutcome::Infeasible { residual } => MaliciousVerdict::Infeasible { residual },
        LpOutcome::Unbounded => unreachable!("feasibility program has a zero objective"),
    })
}

/// Like [`check_malicious`] but reports a marginal mismatch as a verdict.
pub fn malicious_verdict(
    observed: &JointPMF,
    target: &JointPMF,
    honest_side: Side,
) -> Result<MaliciousVerdict> {
    match check_malicious(observed, target, honest_side) {
        Err(Error::MarginalMismatch { symbol, expected, got }) => {
            Ok(MaliciousVerdict::MarginalMismatch { symbol, expected, got })
        }
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RationalVerdict {
    pub game: String,
    pub side_a: Deviation,
    pub side_b: Deviation,
}

impl RationalVerdict {
    pub fn passed(&self) -> bool {
        !self.side_a.gain.is_positive() && !self.side_b.gain.is_positive()
    }
}

impl fmt::Display for RationalVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word = if self.passed() { "pass" } else { "fail" };
        write!(
            f,
            "{}: {word} within family (best gain A {} via {}, B {} via {})",
            self.game,
            self.side_a.gain,
            self.side_a.strategy,
            self.side_b.gain,
            self.side_b.strategy
        )
    }
}

/// Searches `family` for profitable deviations by either side.
pub fn check_rational(
    name: &str,
    g: &Game,
    spec: &ProtocolSpec,
    family: &[AdversaryStrategy],
) -> Result<RationalVerdict> {
    Ok(RationalVerdict {
        game: name.to_string(),
        side_a: rational_deviation_search(g, spec, family, Side::A)?,
        side_b: rational_deviation_search(g, spec, family, Side::B)?,
    })
}

/// [`check_rational`] over each side's full generated family.
pub fn check_rational_exhaustive(name: &str, g: &Game, spec: &ProtocolSpec) -> Result<RationalVerdict> {
    let fa = rational_family(spec.party_a.message_space());
    let fb = rational_family(spec.party_b.message_space());
    Ok(RationalVerdict {
        game: name.to_string(),
        side_a: rational_deviation_search(g, spec, &fa, Side::A)?,
        side_b: rational_deviation_search(g, spec, &fb, Side::B)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaliciousEntry {
    pub adversary: Side,
    pub strategy: AdversaryStrategy,
    pub verdict: MaliciousVerdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecurityReport {
    pub protocol: String,
    pub correctness: CorrectnessVerdict,
    pub semi_honest: SemiHonestVerdict,
    pub malicious: Vec<MaliciousEntry>,
    pub rational: Vec<RationalVerdict>,
    /// Games skipped because the target is not one of their correlated
    /// equilibria.
    pub not_equilibrium: Vec<String>,
}

impl SecurityReport {
    pub fn malicious_passed(&self) -> bool {
        self.malicious.iter().all(|e| e.verdict.feasible())
    }

    pub fn rational_passed(&self) -> bool {
        self.rational.iter().all(RationalVerdict::passed)
    }

    /// Whether the claim holds per this report. Rational claims scoped to
    /// constant-payoff games only consider such games.
    pub fn confirms(&self, claim: SecurityClaim, games: &[(String, Game)]) -> bool {
        match claim {
            SecurityClaim::Correct => self.correctness.passed(),
            SecurityClaim::SemiHonest => self.semi_honest.passed(),
            SecurityClaim::Malicious => self.malicious_passed(),
            SecurityClaim::Rational(RationalScope::AnyCorrelatedEquilibrium) => self.rational_passed(),
            SecurityClaim::Rational(RationalScope::ConstantPayoffGames) => self
                .rational
                .iter()
                .filter(|r| games.iter().any(|(n, g)| *n == r.game && is_constant(g)))
                .all(RationalVerdict::passed),
        }
    }
}

impl fmt::Display for SecurityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "protocol: {}", self.protocol)?;
        writeln!(f, "correctness: {}", self.correctness)?;
        writeln!(f, "semi-honest: {}", self.semi_honest)?;
        let failed: Vec<&MaliciousEntry> = self.malicious.iter().filter(|e| !e.verdict.feasible()).collect();
        if failed.is_empty() {
            writeln!(
                f,
                "malicious: pass within family ({} adversaries)",
                self.malicious.len()
            )?;
        } else {
            writeln!(
                f,
                "malicious: fail within family ({} of {} adversaries infeasible)",
                failed.len(),
                self.malicious.len()
            )?;
            for e in failed {
                writeln!(f, "  {} as {}: {}", e.strategy, e.adversary, e.verdict)?;
            }
        }
        if self.rational.is_empty() {
            writeln!(f, "rational: no applicable game")?;
        }
        for r in &self.rational {
            writeln!(f, "rational {r}")?;
        }
        for g in &self.not_equilibrium {
            writeln!(f, "rational {g}: skipped (target is not a correlated equilibrium)")?;
        }
        Ok(())
    }
}

pub fn is_constant(g: &Game) -> bool {
    let c1 = &g.u1()[0][0];
    let c2 = &g.u2()[0][0];
    g.u1().iter().flatten().all(|v| v == c1) && g.u2().iter().flatten().all(|v| v == c2)
}

fn applies(g: &Game, target: &JointPMF) -> bool {
    g.actions_a() == target.alphabet_x() && g.actions_b() == target.alphabet_y()
}

fn honest_tree(spec: &ProtocolSpec) -> Result<ExecutionTree> {
    let tree = enumerate_executions(spec.party_a.as_ref(), spec.party_b.as_ref(), spec.mode, RETRY_CAP)?;
    tree.require_exact()?;
    Ok(tree)
}

/// Runs every checker on `spec`. Rational checks run for each game whose
/// action alphabets match the target and for which it is a correlated
/// equilibrium.
pub fn verify_protocol(spec: &ProtocolSpec, games: &[(String, Game)]) -> Result<SecurityReport> {
    let tree = honest_tree(spec)?;
    let correctness = check_correctness(&tree, &spec.target)?;
    let semi_honest = check_semi_honest(&tree, &spec.target)?;
    let mut malicious = Vec::new();
    for side in [Side::A, Side::B] {
        for strategy in malicious_family(spec.party(side).message_space()) {
            let (a, b) = spec.with_adversary(side, &strategy);
            let t = enumerate_executions(a.as_ref(), b.as_ref(), spec.mode, RETRY_CAP)?;
            let observed = t.output_pmf()?;
            let verdict = malicious_verdict(&observed, &spec.target, side.other())?;
            malicious.push(MaliciousEntry {
                adversary: side,
                strategy,
                verdict,
            });
        }
    }
    let mut rational = Vec::new();
    let mut not_equilibrium = Vec::new();
    for (name, g) in games {
        if !applies(g, &spec.target) {
            continue;
        }
        if is_correlated_eq(g, &spec.target)? {
            rational.push(check_rational_exhaustive(name, g, spec)?);
        } else {
            not_equilibrium.push(name.clone());
        }
    }
    Ok(SecurityReport {
        protocol: spec.name.clone(),
        correctness,
        semi_honest,
        malicious,
        rational,
        not_equilibrium,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaEntry {
    pub fixture: String,
    pub malicious: bool,
    pub semi_honest: bool,
    /// Rational verdict per applicable game.
    pub rational: Vec<(String, bool)>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LemmaReport {
    pub entries: Vec<LemmaEntry>,
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for e in &self.entries {
            let rational: Vec<String> = e
                .rational
                .iter()
                .map(|(g, ok)| format!("{g}:{}", if *ok { "pass" } else { "fail" }))
                .collect();
            writeln!(
                f,
                "{:<28} malicious={} semi-honest={} rational=[{}]",
                e.fixture,
                e.malicious,
                e.semi_honest,
                rational.join(" ")
            )?;
        }
        Ok(())
    }
}

/// Checks that malicious security implies semi-honest security and
/// rational security for every applicable game, on each fixture.
pub fn lemma_implication_suite(
    protocols: &[ProtocolSpec],
    games: &[(String, Game)],
) -> Result<LemmaReport> {
    let mut report = LemmaReport::default();
    for spec in protocols {
        let r = verify_protocol(spec, games)?;
        let fixture = format!("{} over {}", spec.name, spec.target.alphabet_x());
        let entry = LemmaEntry {
            fixture: fixture.clone(),
            malicious: r.malicious_passed(),
            semi_honest: r.semi_honest.passed(),
            rational: r.rational.iter().map(|v| (v.game.clone(), v.passed())).collect(),
        };
        if entry.malicious && !entry.semi_honest {
            return Err(Error::ImplicationViolated {
                fixture,
                detail: format!("malicious-secure but semi-honest {}", r.semi_honest),
            });
        }
        if let Some(v) = r.rational.iter().find(|v| entry.malicious && !v.passed()) {
            return Err(Error::ImplicationViolated {
                fixture,
                detail: format!("malicious-secure but rational {v}"),
            });
        }
        report.entries.push(entry);
    }
    Ok(report)
}

pub fn fixture_games() -> Vec<(String, Game)> {
    fixtures::GAME_NAMES
        .iter()
        .map(|n| (n.to_string(), fixtures::game_by_name(n).expect("listed")))
        .collect()
}

/// The protocol matrix used by the lemma suite.
pub fn lemma_fixtures() -> Vec<ProtocolSpec> {
    let mut out = Vec::new();
    for p in [
        fixtures::coin(),
        fixtures::block(),
        fixtures::bos_diagonal(rat(1, 2)),
        fixtures::bos_diagonal(rat(1, 4)),
        fixtures::cod_alternating(),
        fixtures::uniform_product(),
    ] {
        out.push(mediator_sampler(&p).expect("separable fixture"));
    }
    out.push(xor_coinflip());
    out.push(naive_polite_coinflip());
    out.push(joint_uniform(3).expect("D >= 1"));
    out.push(coin_map(&fixtures::block(), &[1]).expect("two components"));
    out.push(one_sided_sampler(&fixtures::cod_ce()));
    out.push(one_sided_sampler(&fixtures::coin()));
    out
}
