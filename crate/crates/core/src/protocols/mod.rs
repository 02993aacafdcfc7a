//! Concrete sampling protocols and adversary strategies.
//!
//! Every honest party is written against [`PartyView`] only: it reads its
//! own randomness and the messages it received, never the values it sent.
//! Adversaries in [`adversary`] reuse honest behavior on their own views and
//! substitute messages or outputs, which keeps them total.

mod adversary;

pub use adversary::{
    deterministic_family, make_adversary, malicious_family, rational_deviation_search,
    rational_family, AdversaryParty, AdversaryStrategy, Deviation, MessageBehavior, MessageRule,
    OutputRule,
};

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::common_info::{ergodic_decomposition, is_separable};
use crate::engine::{Action, ChannelMode, Event, Message, MessageSpace, Party, PartyView, Side};
use crate::error::{Error, Result};
use crate::prob::{marginals, Alphabet, JointPMF};
use crate::rational::{common_denominator, one, rat, zero, Rational};

/// Output of a party whose view is incomplete.
pub const NO_OUTPUT: &str = "⊥";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RationalScope {
    /// Every game for which the target is a correlated equilibrium.
    AnyCorrelatedEquilibrium,
    /// Only games whose payoffs are constant.
    ConstantPayoffGames,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SecurityClaim {
    Correct,
    SemiHonest,
    Malicious,
    Rational(RationalScope),
}

impl fmt::Display for SecurityClaim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SecurityClaim::Correct => f.write_str("correct"),
            SecurityClaim::SemiHonest => f.write_str("semi-honest"),
            SecurityClaim::Malicious => f.write_str("malicious"),
            SecurityClaim::Rational(RationalScope::AnyCorrelatedEquilibrium) => {
                f.write_str("rational(any CE game)")
            }
            SecurityClaim::Rational(RationalScope::ConstantPayoffGames) => {
                f.write_str("rational(constant-payoff games)")
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProtocolSpec {
    pub name: String,
    pub target: JointPMF,
    pub party_a: Arc<dyn Party>,
    pub party_b: Arc<dyn Party>,
    pub mode: ChannelMode,
    pub claims: BTreeSet<SecurityClaim>,
}

impl ProtocolSpec {
    pub fn party(&self, side: Side) -> &Arc<dyn Party> {
        match side {
            Side::A => &self.party_a,
            Side::B => &self.party_b,
        }
    }

    pub fn claims(&self, claim: SecurityClaim) -> bool {
        self.claims.contains(&claim)
    }

    /// The pair of parties with `side` replaced by `strategy`.
    pub fn with_adversary(
        &self,
        side: Side,
        strategy: &AdversaryStrategy,
    ) -> (Arc<dyn Party>, Arc<dyn Party>) {
        let adv = strategy.instantiate(self.party(side).clone());
        match side {
            Side::A => (adv, self.party_b.clone()),
            Side::B => (self.party_a.clone(), adv),
        }
    }
}

fn uniform(n: u64) -> Vec<Rational> {
    let p = Rational::new(BigInt::from(1), BigInt::from(n));
    vec![p; n as usize]
}

/// Smallest `k` with `2^k >= d`.
fn bits_for(d: u64) -> u32 {
    if d <= 1 {
        0
    } else {
        64 - (d - 1).leading_zeros()
    }
}

fn first_random(events: &[Event]) -> Option<usize> {
    events.iter().find_map(|e| match e {
        Event::Random(i) => Some(*i),
        _ => None,
    })
}

fn first_received(events: &[Event]) -> Option<Message> {
    events.iter().find_map(|e| match e {
        Event::Received(m) => Some(*m),
        _ => None,
    })
}

fn has_sent(events: &[Event]) -> bool {
    events.iter().any(|e| matches!(e, Event::Sent(_)))
}

fn xor_with(own: u64, received: Option<Message>) -> u64 {
    match received {
        Some(Message::Value(v)) => own ^ v,
        _ => own,
    }
}

/// One bit each, exchanged once, output XOR; a party that sees a timeout
/// keeps its own bit.
#[derive(Debug, Clone)]
pub struct XorParty {
    mode: ChannelMode,
}

impl Party for XorParty {
    fn name(&self) -> String {
        match self.mode {
            ChannelMode::CheapTalk => "xor-coinflip".into(),
            ChannelMode::PoliteTalk => "naive-polite-coinflip".into(),
        }
    }

    fn supports(&self, mode: ChannelMode) -> bool {
        mode == self.mode
    }

    fn step(&self, view: &PartyView) -> Action {
        match first_random(view.events()) {
            None => Action::Random(uniform(2)),
            Some(bit) if !has_sent(view.events()) => Action::Send(Message::Value(bit as u64)),
            Some(_) => Action::Finish,
        }
    }

    fn output(&self, view: &PartyView) -> String {
        match first_random(view.events()) {
            Some(bit) => xor_with(bit as u64, view.received().next()).to_string(),
            None => NO_OUTPUT.into(),
        }
    }

    fn message_space(&self) -> MessageSpace {
        MessageSpace {
            rounds: 1,
            alphabet: 2,
        }
    }
}

pub fn xor_bit_pair() -> (Arc<dyn Party>, Arc<dyn Party>) {
    let p: Arc<dyn Party> = Arc::new(XorParty {
        mode: ChannelMode::CheapTalk,
    });
    (p.clone(), p)
}

fn coin_target() -> JointPMF {
    let i = Alphabet::indexed(2);
    JointPMF::new(
        i.clone(),
        i,
        vec![vec![rat(1, 2), zero()], vec![zero(), rat(1, 2)]],
    )
    .expect("coin")
}

fn full_claims() -> BTreeSet<SecurityClaim> {
    [
        SecurityClaim::Correct,
        SecurityClaim::SemiHonest,
        SecurityClaim::Malicious,
        SecurityClaim::Rational(RationalScope::AnyCorrelatedEquilibrium),
    ]
    .into_iter()
    .collect()
}

/// The XOR coin flip viewed as a sampler of the perfectly correlated bit.
pub fn xor_coinflip() -> ProtocolSpec {
    let (party_a, party_b) = xor_bit_pair();
    ProtocolSpec {
        name: "xor-coinflip".into(),
        target: coin_target(),
        party_a,
        party_b,
        mode: ChannelMode::CheapTalk,
        claims: full_claims(),
    }
}

/// Alice sends a bit, then Bob sends a bit; both output the XOR.
pub fn naive_polite_coinflip() -> ProtocolSpec {
    let p: Arc<dyn Party> = Arc::new(XorParty {
        mode: ChannelMode::PoliteTalk,
    });
    ProtocolSpec {
        name: "naive-polite-coinflip".into(),
        target: coin_target(),
        party_a: p.clone(),
        party_b: p,
        mode: ChannelMode::PoliteTalk,
        claims: [SecurityClaim::Correct].into_iter().collect(),
    }
}

enum Stage {
    Act(Action),
    Accepted(u64),
}

/// Uniform draw over `0..d` from `k` XOR-combined bits per attempt,
/// retrying on values `>= d`.
#[derive(Debug, Clone)]
struct UniformStage {
    d: u64,
    k: u32,
}

impl UniformStage {
    fn new(d: u64) -> Self {
        UniformStage { d, k: bits_for(d) }
    }

    fn stage(&self, view: &PartyView) -> Stage {
        if self.d == 1 {
            return Stage::Accepted(0);
        }
        if !view.has_checkpoint() {
            return Stage::Act(Action::Checkpoint);
        }
        let attempt = view.current_attempt();
        let Some(own) = first_random(attempt) else {
            return Stage::Act(Action::Random(uniform(1 << self.k)));
        };
        if !has_sent(attempt) {
            return Stage::Act(Action::Send(Message::Value(own as u64)));
        }
        let Some(received) = first_received(attempt) else {
            return Stage::Act(Action::Finish);
        };
        let v = xor_with(own as u64, Some(received));
        if v >= self.d {
            Stage::Act(Action::Retry)
        } else {
            Stage::Accepted(v)
        }
    }

    fn supports(&self, mode: ChannelMode) -> bool {
        self.d == 1 || mode == ChannelMode::CheapTalk
    }

    fn message_space(&self) -> MessageSpace {
        MessageSpace {
            rounds: usize::from(self.d > 1),
            alphabet: 1 << self.k,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JointUniformParty {
    stage: UniformStage,
}

impl Party for JointUniformParty {
    fn name(&self) -> String {
        format!("joint-uniform:{}", self.stage.d)
    }

    fn supports(&self, mode: ChannelMode) -> bool {
        self.stage.supports(mode)
    }

    fn step(&self, view: &PartyView) -> Action {
        match self.stage.stage(view) {
            Stage::Act(a) => a,
            Stage::Accepted(_) => Action::Finish,
        }
    }

    fn output(&self, view: &PartyView) -> String {
        match self.stage.stage(view) {
            Stage::Accepted(v) => v.to_string(),
            Stage::Act(_) => NO_OUTPUT.into(),
        }
    }

    fn message_space(&self) -> MessageSpace {
        self.stage.message_space()
    }
}

pub fn joint_uniform_sampler(d: u64) -> Result<(Arc<dyn Party>, Arc<dyn Party>)> {
    if d == 0 {
        return Err(Error::Validation("joint uniform sampler needs D >= 1".into()));
    }
    let p: Arc<dyn Party> = Arc::new(JointUniformParty {
        stage: UniformStage::new(d),
    });
    Ok((p.clone(), p))
}

/// Joint uniform sampler packaged with its diagonal target.
pub fn joint_uniform(d: u64) -> Result<ProtocolSpec> {
    let (party_a, party_b) = joint_uniform_sampler(d)?;
    let n = d as usize;
    let mass = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { rat(1, d as i64) } else { zero() })
                .collect()
        })
        .collect();
    let alpha = Alphabet::indexed(n);
    Ok(ProtocolSpec {
        name: format!("joint-uniform:{d}"),
        target: JointPMF::new(alpha.clone(), alpha, mass)?,
        party_a,
        party_b,
        mode: ChannelMode::CheapTalk,
        claims: full_claims(),
    })
}

/// Samples the component label jointly, then the party's own symbol
/// locally from its conditional given the label.
#[derive(Debug, Clone)]
pub struct MediatorParty {
    side: Side,
    stage: UniformStage,
    /// Component label of each uniform value.
    label_of: Vec<usize>,
    /// Conditional of the party's own symbol, per component label.
    conditionals: Vec<Vec<Rational>>,
    symbols: Vec<String>,
}

impl MediatorParty {
    fn local_draws_before(&self) -> usize {
        usize::from(self.stage.d > 1)
    }

    /// Component label once the joint draw is accepted.
    pub fn label(&self, view: &PartyView) -> Option<usize> {
        match self.stage.stage(view) {
            Stage::Accepted(v) => Some(self.label_of[v as usize]),
            Stage::Act(_) => None,
        }
    }
}

impl Party for MediatorParty {
    fn name(&self) -> String {
        format!("mediator-{}", self.side)
    }

    fn supports(&self, mode: ChannelMode) -> bool {
        self.stage.supports(mode)
    }

    fn step(&self, view: &PartyView) -> Action {
        match self.stage.stage(view) {
            Stage::Act(a) => a,
            Stage::Accepted(v) => {
                let draws = view.current_attempt().iter().filter(|e| matches!(e, Event::Random(_))).count();
                if draws == self.local_draws_before() {
                    Action::Random(self.conditionals[self.label_of[v as usize]].clone())
                } else {
                    Action::Finish
                }
            }
        }
    }

    fn output(&self, view: &PartyView) -> String {
        if self.label(view).is_none() {
            return NO_OUTPUT.into();
        }
        let draws: Vec<usize> = view
            .current_attempt()
            .iter()
            .filter_map(|e| match e {
                Event::Random(i) => Some(*i),
                _ => None,
            })
            .collect();
        match draws.get(self.local_draws_before()) {
            Some(&i) => self.symbols[i].clone(),
            None => NO_OUTPUT.into(),
        }
    }

    fn message_space(&self) -> MessageSpace {
        self.stage.message_space()
    }
}

fn mediator_parties(p: &JointPMF) -> Result<(MediatorParty, MediatorParty)> {
    if !is_separable(p) {
        return Err(Error::NotSeparable);
    }
    let dec = ergodic_decomposition(p);
    let den = common_denominator(dec.masses());
    let d = den
        .to_u64()
        .ok_or_else(|| Error::Validation(format!("component denominator {den} too large")))?;
    let mut label_of = Vec::with_capacity(d as usize);
    for (w, m) in dec.masses().iter().enumerate() {
        let count = (m * Rational::from_integer(den.clone())).to_integer();
        let count = count.to_usize().expect("count bounded by D");
        label_of.extend(std::iter::repeat(w).take(count));
    }
    let rows = p.row_sums();
    let cols = p.col_sums();
    let conditional = |sums: &[Rational], members: Vec<usize>, m: &Rational| {
        let mut v = vec![zero(); sums.len()];
        for i in members {
            v[i] = &sums[i] / m;
        }
        v
    };
    let cond_a = dec
        .labels()
        .map(|w| conditional(&rows, dec.xs_in(w).collect(), dec.component_mass(w)))
        .collect();
    let cond_b = dec
        .labels()
        .map(|w| conditional(&cols, dec.ys_in(w).collect(), dec.component_mass(w)))
        .collect();
    let stage = UniformStage::new(d);
    Ok((
        MediatorParty {
            side: Side::A,
            stage: stage.clone(),
            label_of: label_of.clone(),
            conditionals: cond_a,
            symbols: p.alphabet_x().symbols().to_vec(),
        },
        MediatorParty {
            side: Side::B,
            stage,
            label_of,
            conditionals: cond_b,
            symbols: p.alphabet_y().symbols().to_vec(),
        },
    ))
}

/// Sampler that first draws the ergodic component jointly and then each
/// side's symbol locally.
pub fn mediator_sampler(p: &JointPMF) -> Result<ProtocolSpec> {
    let (a, b) = mediator_parties(p)?;
    Ok(ProtocolSpec {
        name: "mediator".into(),
        target: p.clone(),
        party_a: Arc::new(a),
        party_b: Arc::new(b),
        mode: ChannelMode::CheapTalk,
        claims: full_claims(),
    })
}

/// Draws a full cell, forwards the second coordinate, outputs the first.
#[derive(Debug, Clone)]
pub struct OneSidedAlice {
    cells: Vec<(usize, usize)>,
    weights: Vec<Rational>,
    symbols: Vec<String>,
    columns: u64,
}

impl Party for OneSidedAlice {
    fn name(&self) -> String {
        "one-sided-A".into()
    }

    fn step(&self, view: &PartyView) -> Action {
        match first_random(view.events()) {
            None => Action::Random(self.weights.clone()),
            Some(i) if !has_sent(view.events()) => Action::Send(Message::Value(self.cells[i].1 as u64)),
            Some(_) => Action::Finish,
        }
    }

    fn output(&self, view: &PartyView) -> String {
        match first_random(view.events()) {
            Some(i) => self.symbols[self.cells[i].0].clone(),
            None => NO_OUTPUT.into(),
        }
    }

    fn message_space(&self) -> MessageSpace {
        MessageSpace {
            rounds: 1,
            alphabet: self.columns,
        }
    }
}

/// Outputs the received symbol; on a timeout or an invalid message it
/// samples its own marginal instead.
#[derive(Debug, Clone)]
pub struct OneSidedBob {
    marginal: Vec<Rational>,
    symbols: Vec<String>,
}

impl OneSidedBob {
    fn valid(&self, m: Message) -> Option<usize> {
        m.value()
            .and_then(|v| usize::try_from(v).ok())
            .filter(|&v| v < self.symbols.len())
    }
}

impl Party for OneSidedBob {
    fn name(&self) -> String {
        "one-sided-B".into()
    }

    fn step(&self, view: &PartyView) -> Action {
        match view.received().next() {
            // Only reachable over cheap talk, where Bob must fill his slot.
            None => Action::Send(Message::Bottom),
            Some(m) if self.valid(m).is_some() => Action::Finish,
            Some(_) if first_random(view.events()).is_none() => Action::Random(self.marginal.clone()),
            Some(_) => Action::Finish,
        }
    }

    fn output(&self, view: &PartyView) -> String {
        if let Some(y) = view.received().next().and_then(|m| self.valid(m)) {
            return self.symbols[y].clone();
        }
        match first_random(view.events()) {
            Some(i) => self.symbols[i].clone(),
            None => NO_OUTPUT.into(),
        }
    }
}

pub fn one_sided_sampler_with_mode(p: &JointPMF, mode: ChannelMode) -> ProtocolSpec {
    let cells: Vec<(usize, usize)> = p.support().collect();
    let weights = cells.iter().map(|&(x, y)| p.get(x, y).clone()).collect();
    let (_, py) = marginals(p);
    ProtocolSpec {
        name: "one-sided".into(),
        target: p.clone(),
        party_a: Arc::new(OneSidedAlice {
            cells,
            weights,
            symbols: p.alphabet_x().symbols().to_vec(),
            columns: p.cols() as u64,
        }),
        party_b: Arc::new(OneSidedBob {
            marginal: py.mass().to_vec(),
            symbols: p.alphabet_y().symbols().to_vec(),
        }),
        mode,
        claims: [
            SecurityClaim::Correct,
            SecurityClaim::Rational(RationalScope::ConstantPayoffGames),
        ]
        .into_iter()
        .collect(),
    }
}

/// Alice samples the whole pair and tells Bob his part, over polite talk.
pub fn one_sided_sampler(p: &JointPMF) -> ProtocolSpec {
    one_sided_sampler_with_mode(p, ChannelMode::PoliteTalk)
}

/// Mediator party reporting only which class its component label is in.
#[derive(Debug, Clone)]
pub struct CoinMapParty {
    inner: MediatorParty,
    class1: BTreeSet<usize>,
}

impl Party for CoinMapParty {
    fn name(&self) -> String {
        format!("coin-map-{}", self.inner.side)
    }

    fn supports(&self, mode: ChannelMode) -> bool {
        self.inner.supports(mode)
    }

    fn step(&self, view: &PartyView) -> Action {
        self.inner.step(view)
    }

    fn output(&self, view: &PartyView) -> String {
        match self.inner.label(view) {
            Some(w) if self.class1.contains(&w) => "1".into(),
            Some(_) => "0".into(),
            None => NO_OUTPUT.into(),
        }
    }

    fn message_space(&self) -> MessageSpace {
        self.inner.message_space()
    }
}

/// Biased agreed coin: `1` exactly when the component label is in `class1`.
pub fn coin_map(p: &JointPMF, class1: &[usize]) -> Result<ProtocolSpec> {
    let (a, b) = mediator_parties(p)?;
    let dec = ergodic_decomposition(p);
    let class1: BTreeSet<usize> = class1.iter().copied().collect();
    if let Some(bad) = class1.iter().find(|&&w| w >= dec.len()) {
        return Err(Error::Validation(format!("no component label {bad}")));
    }
    let bias: Rational = class1.iter().map(|&w| dec.component_mass(w)).sum();
    if bias.is_zero() {
        return Err(Error::EmptyPartitionClass(1));
    }
    if bias == one() {
        return Err(Error::EmptyPartitionClass(0));
    }
    let coin = Alphabet::indexed(2);
    let target = JointPMF::new(
        coin.clone(),
        coin,
        vec![vec![one() - &bias, zero()], vec![zero(), bias]],
    )?;
    Ok(ProtocolSpec {
        name: "coin-map".into(),
        target,
        party_a: Arc::new(CoinMapParty {
            inner: a,
            class1: class1.clone(),
        }),
        party_b: Arc::new(CoinMapParty { inner: b, class1 }),
        mode: ChannelMode::CheapTalk,
        claims: full_claims(),
    })
}

pub const PROTOCOL_NAMES: &[&str] = &[
    "xor-coinflip",
    "naive-polite-coinflip",
    "joint-uniform:D",
    "mediator",
    "one-sided",
    "coin-map[:w,...]",
];

/// Looks up a protocol by name. Distribution-driven protocols need `dist`.
pub fn protocol_by_name(name: &str, dist: Option<&JointPMF>) -> Result<ProtocolSpec> {
    let need = || {
        dist.ok_or_else(|| Error::Validation(format!("protocol `{name}` needs a distribution")))
    };
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name, None),
    };
    match (head, arg) {
        ("xor-coinflip", None) => Ok(xor_coinflip()),
        ("naive-polite-coinflip", None) => Ok(naive_polite_coinflip()),
        ("joint-uniform", Some(d)) => {
            let d = d
                .parse()
                .map_err(|_| Error::Validation(format!("bad D `{d}`")))?;
            joint_uniform(d)
        }
        ("mediator", None) => mediator_sampler(need()?),
        ("one-sided", None) => Ok(one_sided_sampler(need()?)),
        ("coin-map", arg) => {
            let p = need()?;
            let class1: Vec<usize> = match arg {
                None => (1..ergodic_decomposition(p).len()).collect(),
                Some(list) => list
                    .split(',')
                    .map(|w| {
                        w.trim()
                            .parse()
                            .map_err(|_| Error::Validation(format!("bad label `{w}`")))
                    })
                    .collect::<Result<_>>()?,
            };
            coin_map(p, &class1)
        }
        _ => Err(Error::Validation(format!("unknown protocol `{name}`"))),
    }
}
