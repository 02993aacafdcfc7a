//! Two-party interactive protocol engine.
//!
//! A [`Party`] is a pure function from its current [`PartyView`] to the next
//! [`Action`]. The engine owns all execution state and supports two channel
//! disciplines:
//!
//! - **cheap talk**: each round both parties commit a message computed from
//!   rounds strictly before the current one; the messages are then delivered
//!   simultaneously;
//! - **polite talk**: parties strictly alternate single messages, Alice
//!   first.
//!
//! A party that has finished (or aborted) never sends again; whenever the
//! peer would have received a message from it, the peer receives
//! [`Message::Bottom`] instead. Bottom is distinguishable from every legal
//! message.
//!
//! Randomness is requested explicitly through [`Action::Random`] with exact
//! rational weights, so [`enumerate_executions`] can walk the complete tree
//! of executions. Unbounded protocols are expressed with memoryless retry
//! loops: a party marks [`Action::Checkpoint`] and later [`Action::Retry`],
//! which truncates its view back to the checkpoint. When both parties retry
//! together the joint state recurs, and the enumerator sums the resulting
//! geometric series in closed form instead of unrolling it.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::prob::JointPMF;
use crate::rational::{common_denominator, one, to_f64, zero, Rational};

pub use crate::common_info::Channel as ChannelMode;

/// Hard cap on engine steps in a single sampled run.
pub const RUN_STEP_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn index(self) -> usize {
        match self {
            Side::A => 0,
            Side::B => 1,
        }
    }

    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }

    fn from_index(i: usize) -> Side {
        if i == 0 {
            Side::A
        } else {
            Side::B
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::A => "A",
            Side::B => "B",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Message {
    Value(u64),
    /// Missing or invalid message (timeout).
    Bottom,
}

impl Message {
    pub fn value(self) -> Option<u64> {
        match self {
            Message::Value(v) => Some(v),
            Message::Bottom => None,
        }
    }
}

impl fmt::Display for Message {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Message::Value(v) => write!(f, "{v}"),
            Message::Bottom => f.write_str("⊥"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Event {
    Checkpoint,
    Random(usize),
    Sent(Message),
    Received(Message),
}

/// Everything a party has observed: its randomness realizations, the
/// messages it sent and received, and its retry checkpoints.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PartyView {
    events: Vec<Event>,
}

impl PartyView {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: Vec<Event>) -> Self {
        PartyView { events }
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    /// Events after the most recent checkpoint (the whole view if none).
    pub fn current_attempt(&self) -> &[Event] {
        match self.events.iter().rposition(|e| *e == Event::Checkpoint) {
            Some(i) => &self.events[i + 1..],
            None => &self.events,
        }
    }

    pub fn has_checkpoint(&self) -> bool {
        self.events.contains(&Event::Checkpoint)
    }

    pub fn randomness(&self) -> impl Iterator<Item = usize> + '_ {
        self.events.iter().filter_map(|e| match e {
            Event::Random(i) => Some(*i),
            _ => None,
        })
    }

    pub fn received(&self) -> impl Iterator<Item = Message> + '_ {
        self.events.iter().filter_map(|e| match e {
            Event::Received(m) => Some(*m),
            _ => None,
        })
    }

    pub fn sent(&self) -> impl Iterator<Item = Message> + '_ {
        self.events.iter().filter_map(|e| match e {
            Event::Sent(m) => Some(*m),
            _ => None,
        })
    }

    /// Number of messages received so far.
    pub fn round(&self) -> usize {
        self.received().count()
    }

    pub fn push(&mut self, event: Event) {
        self.events.push(event);
    }

    fn truncate_to_checkpoint(&mut self) {
        let keep = self
            .events
            .iter()
            .rposition(|e| *e == Event::Checkpoint)
            .map_or(0, |i| i + 1);
        self.events.truncate(keep);
    }
}

impl fmt::Display for PartyView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .events
            .iter()
            .map(|e| match e {
                Event::Checkpoint => "|".to_string(),
                Event::Random(i) => format!("r{i}"),
                Event::Sent(m) => format!(">{m}"),
                Event::Received(m) => format!("<{m}"),
            })
            .collect();
        write!(f, "[{}]", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    /// Marks the start of a memoryless retry loop.
    Checkpoint,
    /// Draws an index with the given weights (non-negative, summing to 1).
    Random(Vec<Rational>),
    /// Discards the view back to the most recent checkpoint.
    Retry,
    Send(Message),
    Finish,
}

/// Per-attempt message budget a party declares, used to build exhaustive
/// families of deterministic deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MessageSpace {
    /// Messages sent per attempt by the honest party.
    pub rounds: usize,
    /// Legal messages are `Value(0..alphabet)`.
    pub alphabet: u64,
}

pub trait Party: Send + Sync + fmt::Debug {
    fn name(&self) -> String;

    fn supports(&self, _mode: ChannelMode) -> bool {
        true
    }

    fn step(&self, view: &PartyView) -> Action;

    /// Output symbol; must be total on every reachable view.
    fn output(&self, view: &PartyView) -> String;

    fn message_space(&self) -> MessageSpace {
        MessageSpace::default()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TranscriptEntry {
    Exchange { a: Message, b: Message },
    Single { from: Side, message: Message },
}

impl fmt::Display for TranscriptEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TranscriptEntry::Exchange { a, b } => write!(f, "A:{a} | B:{b}"),
            TranscriptEntry::Single { from, message } => write!(f, "{from}:{message}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
    pub retries: usize,
}

impl Transcript {
    pub fn rounds(&self) -> usize {
        self.entries.len()
    }

    pub fn has_abort(&self) -> bool {
        self.entries.iter().any(|e| match e {
            TranscriptEntry::Exchange { a, b } => *a == Message::Bottom || *b == Message::Bottom,
            TranscriptEntry::Single { message, .. } => *message == Message::Bottom,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct State {
    views: [PartyView; 2],
    pending: [Option<Message>; 2],
    finished: [bool; 2],
    turn: usize,
}

impl State {
    fn initial() -> Self {
        State {
            views: [PartyView::new(), PartyView::new()],
            pending: [None, None],
            finished: [false, false],
            turn: 0,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct StepInfo {
    retry: bool,
    round: bool,
    entry: Option<TranscriptEntry>,
}

enum Successors {
    Leaf,
    Children(Vec<(Rational, State, StepInfo)>),
}

struct Machine<'a> {
    parties: [&'a dyn Party; 2],
    mode: ChannelMode,
}

impl<'a> Machine<'a> {
    fn new(a: &'a dyn Party, b: &'a dyn Party, mode: ChannelMode) -> Result<Self> {
        for p in [a, b] {
            if !p.supports(mode) {
                return Err(Error::ModeError {
                    party: p.name(),
                    mode: mode.to_string(),
                });
            }
        }
        Ok(Machine {
            parties: [a, b],
            mode,
        })
    }

    fn successors(&self, state: &State) -> Result<Successors> {
        if state.finished[0] && state.finished[1] {
            return Ok(Successors::Leaf);
        }
        match self.mode {
            ChannelMode::CheapTalk => {
                // Bookkeeping actions run first so that parties retrying
                // together land on the exact state where the loop began.
                let mut first = None;
                for p in 0..2 {
                    if !state.finished[p] && state.pending[p].is_none() {
                        let action = self.parties[p].step(&state.views[p]);
                        if matches!(action, Action::Checkpoint | Action::Retry) {
                            return self.apply(state, p, action);
                        }
                        first.get_or_insert((p, action));
                    }
                }
                if let Some((p, action)) = first {
                    return self.apply(state, p, action);
                }
                let mut next = state.clone();
                let sent = [
                    state.pending[0].unwrap_or(Message::Bottom),
                    state.pending[1].unwrap_or(Message::Bottom),
                ];
                for p in 0..2 {
                    if !state.finished[p] {
                        next.views[p].push(Event::Received(sent[1 - p]));
                    }
                }
                next.pending = [None, None];
                let info = StepInfo {
                    round: true,
                    entry: Some(TranscriptEntry::Exchange {
                        a: sent[0],
                        b: sent[1],
                    }),
                    ..Default::default()
                };
                Ok(Successors::Children(vec![(one(), next, info)]))
            }
            ChannelMode::PoliteTalk => {
                let t = state.turn;
                if state.finished[t] {
                    let mut next = state.clone();
                    next.views[1 - t].push(Event::Received(Message::Bottom));
                    next.turn = 1 - t;
                    let info = StepInfo {
                        round: true,
                        entry: Some(TranscriptEntry::Single {
                            from: Side::from_index(t),
                            message: Message::Bottom,
                        }),
                        ..Default::default()
                    };
                    return Ok(Successors::Children(vec![(one(), next, info)]));
                }
                let action = self.parties[t].step(&state.views[t]);
                self.apply(state, t, action)
            }
        }
    }

    fn apply(&self, state: &State, p: usize, action: Action) -> Result<Successors> {
        let q = 1 - p;
        let single = |next: State, info: StepInfo| Ok(Successors::Children(vec![(one(), next, info)]));
        let mut next = state.clone();
        match action {
            Action::Checkpoint => {
                next.views[p].push(Event::Checkpoint);
                single(next, StepInfo::default())
            }
            Action::Retry => {
                next.views[p].truncate_to_checkpoint();
                single(
                    next,
                    StepInfo {
                        retry: true,
                        ..Default::default()
                    },
                )
            }
            Action::Random(weights) => {
                validate_weights(&weights, &self.parties[p].name())?;
                let children = weights
                    .into_iter()
                    .enumerate()
                    .filter(|(_, w)| w.is_positive())
                    .map(|(i, w)| {
                        let mut child = state.clone();
                        child.views[p].push(Event::Random(i));
                        (w, child, StepInfo::default())
                    })
                    .collect();
                Ok(Successors::Children(children))
            }
            Action::Send(m) => {
                next.views[p].push(Event::Sent(m));
                match self.mode {
                    ChannelMode::CheapTalk => {
                        next.pending[p] = Some(m);
                        single(next, StepInfo::default())
                    }
                    ChannelMode::PoliteTalk => {
                        if !state.finished[q] {
                            next.views[q].push(Event::Received(m));
                        }
                        next.turn = q;
                        single(
                            next,
                            StepInfo {
                                round: true,
                                entry: Some(TranscriptEntry::Single {
                                    from: Side::from_index(p),
                                    message: m,
                                }),
                                ..Default::default()
                            },
                        )
                    }
                }
            }
            Action::Finish => {
                next.finished[p] = true;
                match self.mode {
                    ChannelMode::CheapTalk => single(next, StepInfo::default()),
                    ChannelMode::PoliteTalk => {
                        let mut info = StepInfo {
                            round: true,
                            ..Default::default()
                        };
                        if !state.finished[q] {
                            next.views[q].push(Event::Received(Message::Bottom));
                            info.entry = Some(TranscriptEntry::Single {
                                from: Side::from_index(p),
                                message: Message::Bottom,
                            });
                        }
                        next.turn = q;
                        single(next, info)
                    }
                }
            }
        }
    }

    fn outputs(&self, state: &State) -> (String, String) {
        (
            self.parties[0].output(&state.views[0]),
            self.parties[1].output(&state.views[1]),
        )
    }
}

fn validate_weights(weights: &[Rational], party: &str) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidRandomness(format!("{party}: empty choice")));
    }
    if weights.iter().any(Signed::is_negative) {
        return Err(Error::InvalidRandomness(format!("{party}: negative weight")));
    }
    let total: Rational = weights.iter().sum();
    if !total.is_one() {
        return Err(Error::InvalidRandomness(format!(
            "{party}: weights sum to {total}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub output_a: String,
    pub output_b: String,
    pub transcript: Transcript,
    pub view_a: PartyView,
    pub view_b: PartyView,
}

/// Picks a child exactly: draws a uniform integer below the common
/// denominator of the weights when it fits in 64 bits.
fn sample_index(rng: &mut ChaCha8Rng, weights: &[Rational]) -> usize {
    let den = common_denominator(weights);
    if let Some(d) = den.to_u64() {
        let draw = BigInt::from(rng.gen_range(0..d));
        let mut acc = BigInt::zero();
        for (i, w) in weights.iter().enumerate() {
            acc += w.numer() * (&den / w.denom());
            if draw < acc {
                return i;
            }
        }
        weights.len() - 1
    } else {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, w) in weights.iter().enumerate() {
            acc += to_f64(w);
            if u < acc {
                return i;
            }
        }
        weights.len() - 1
    }
}

/// Samples one execution driven by a ChaCha stream seeded with `seed`.
pub fn run_once(a: &dyn Party, b: &dyn Party, mode: ChannelMode, seed: u64) -> Result<RunResult> {
    let machine = Machine::new(a, b, mode)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = State::initial();
    let mut transcript = Transcript::default();
    for _ in 0..RUN_STEP_CAP {
        match machine.successors(&state)? {
            Successors::Leaf => {
                let (output_a, output_b) = machine.outputs(&state);
                let [view_a, view_b] = state.views;
                return Ok(RunResult {
                    output_a,
                    output_b,
                    transcript,
                    view_a,
                    view_b,
                });
            }
            Successors::Children(mut children) => {
                let i = if children.len() == 1 {
                    0
                } else {
                    let weights: Vec<Rational> = children.iter().map(|c| c.0.clone()).collect();
                    sample_index(&mut rng, &weights)
                };
                let (_, next, info) = children.swap_remove(i);
                if info.retry {
                    transcript.retries += 1;
                }
                if let Some(e) = info.entry {
                    transcript.entries.push(e);
                }
                state = next;
            }
        }
    }
    Err(Error::NonTermination(RUN_STEP_CAP))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Leaf {
    pub probability: Rational,
    pub output_a: String,
    pub output_b: String,
    pub view_a: PartyView,
    pub view_b: PartyView,
}

impl Leaf {
    pub fn view(&self, side: Side) -> &PartyView {
        match side {
            Side::A => &self.view_a,
            Side::B => &self.view_b,
        }
    }

    pub fn output(&self, side: Side) -> &str {
        match side {
            Side::A => &self.output_a,
            Side::B => &self.output_b,
        }
    }
}

/// A retry loop that was summed in closed form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct LoopAnnotation {
    /// Rounds completed when the loop was entered.
    pub entry_round: usize,
    /// Probability that one pass through the loop exits it.
    pub acceptance: Rational,
}

/// Exact distribution over complete executions.
///
/// Views inside a collapsed retry loop keep only the accepted attempt; the
/// rejected attempts are independent of everything that follows, so they
/// carry no information about the outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecutionTree {
    pub leaves: Vec<Leaf>,
    /// Mass of executions cut off by the retry or round cap.
    pub tail_mass: Rational,
    pub loops: Vec<LoopAnnotation>,
}

impl ExecutionTree {
    pub fn total_mass(&self) -> Rational {
        self.leaves.iter().map(|l| &l.probability).sum::<Rational>() + &self.tail_mass
    }

    pub fn output_distribution(&self) -> BTreeMap<(String, String), Rational> {
        let mut d: BTreeMap<(String, String), Rational> = BTreeMap::new();
        for l in &self.leaves {
            *d.entry((l.output_a.clone(), l.output_b.clone())).or_insert_with(zero) += &l.probability;
        }
        d
    }

    /// Distribution of one side's output.
    pub fn marginal(&self, side: Side) -> BTreeMap<String, Rational> {
        let mut d: BTreeMap<String, Rational> = BTreeMap::new();
        for l in &self.leaves {
            *d.entry(l.output(side).to_string()).or_insert_with(zero) += &l.probability;
        }
        d
    }

    /// Output joint as a [`JointPMF`] over the observed labels; requires zero
    /// tail mass.
    pub fn output_pmf(&self) -> Result<JointPMF> {
        if !self.tail_mass.is_zero() {
            return Err(Error::TailMassNonzero(self.tail_mass.clone()));
        }
        JointPMF::from_observed(&self.output_distribution())
    }

    pub fn require_exact(&self) -> Result<()> {
        if self.tail_mass.is_zero() {
            Ok(())
        } else {
            Err(Error::TailMassNonzero(self.tail_mass.clone()))
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnumerationConfig {
    /// Paths with more retries than this are cut into the tail.
    pub retry_cap: usize,
    /// Paths with more delivered messages than this are cut into the tail.
    pub round_cap: usize,
    pub node_budget: usize,
    /// Sum recurring retry loops in closed form.
    pub collapse_loops: bool,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        EnumerationConfig {
            retry_cap: 64,
            round_cap: 4096,
            node_budget: 2_000_000,
            collapse_loops: true,
        }
    }
}

struct Partial {
    leaves: Vec<Leaf>,
    /// Mass returning to the ancestor at each path depth.
    back: BTreeMap<usize, Rational>,
    tail: Rational,
}

impl Partial {
    fn empty() -> Self {
        Partial {
            leaves: Vec::new(),
            back: BTreeMap::new(),
            tail: zero(),
        }
    }

    fn absorb(&mut self, sub: Partial, weight: &Rational) {
        for mut l in sub.leaves {
            l.probability *= weight;
            self.leaves.push(l);
        }
        for (d, m) in sub.back {
            *self.back.entry(d).or_insert_with(zero) += m * weight;
        }
        self.tail += sub.tail * weight;
    }

    fn scale(&mut self, factor: &Rational) {
        for l in &mut self.leaves {
            l.probability *= factor;
        }
        for m in self.back.values_mut() {
            *m *= factor;
        }
        self.tail *= factor;
    }
}

struct Explorer<'a> {
    machine: Machine<'a>,
    config: EnumerationConfig,
    nodes: usize,
    path: HashMap<State, usize>,
    loops: Vec<LoopAnnotation>,
}

impl Explorer<'_> {
    fn explore(&mut self, state: State, depth: usize, retries: usize, rounds: usize) -> Result<Partial> {
        self.nodes += 1;
        if self.nodes > self.config.node_budget {
            return Err(Error::StateExplosion(self.config.node_budget));
        }
        if self.config.collapse_loops {
            if let Some(&d) = self.path.get(&state) {
                let mut p = Partial::empty();
                p.back.insert(d, one());
                return Ok(p);
            }
        }
        if retries > self.config.retry_cap || rounds > self.config.round_cap {
            let mut p = Partial::empty();
            p.tail = one();
            return Ok(p);
        }
        let children = match self.machine.successors(&state)? {
            Successors::Leaf => {
                let (output_a, output_b) = self.machine.outputs(&state);
                let [view_a, view_b] = state.views;
                let mut p = Partial::empty();
                p.leaves.push(Leaf {
                    probability: one(),
                    output_a,
                    output_b,
                    view_a,
                    view_b,
                });
                return Ok(p);
            }
            Successors::Children(c) => c,
        };
        if self.config.collapse_loops {
            self.path.insert(state.clone(), depth);
        }
        let mut acc = Partial::empty();
        for (w, child, info) in children {
            let sub = self.explore(
                child,
                depth + 1,
                retries + usize::from(info.retry),
                rounds + usize::from(info.round),
            )?;
            acc.absorb(sub, &w);
        }
        if self.config.collapse_loops {
            self.path.remove(&state);
        }
        if let Some(returning) = acc.back.remove(&depth) {
            if returning.is_one() {
                // Every continuation comes back here: the loop never exits.
                let mut p = Partial::empty();
                p.tail = one();
                return Ok(p);
            }
            let acceptance = one() - &returning;
            acc.scale(&(one() / &acceptance));
            let note = LoopAnnotation {
                entry_round: rounds,
                acceptance,
            };
            if !self.loops.contains(&note) {
                self.loops.push(note);
            }
        }
        Ok(acc)
    }
}

pub fn enumerate_with(
    a: &dyn Party,
    b: &dyn Party,
    mode: ChannelMode,
    config: &EnumerationConfig,
) -> Result<ExecutionTree> {
    let mut explorer = Explorer {
        machine: Machine::new(a, b, mode)?,
        config: config.clone(),
        nodes: 0,
        path: HashMap::new(),
        loops: Vec::new(),
    };
    let partial = explorer.explore(State::initial(), 0, 0, 0)?;
    debug_assert!(partial.back.is_empty());
    let mut loops = explorer.loops;
    loops.sort();
    Ok(ExecutionTree {
        leaves: partial.leaves,
        tail_mass: partial.tail,
        loops,
    })
}

/// Exact execution tree with default budgets and loop collapsing.
pub fn enumerate_executions(
    a: &dyn Party,
    b: &dyn Party,
    mode: ChannelMode,
    retry_cap: usize,
) -> Result<ExecutionTree> {
    let config = EnumerationConfig {
        retry_cap,
        ..EnumerationConfig::default()
    };
    enumerate_with(a, b, mode, &config)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `i`, a pure function of `(master_seed, i)`.
pub fn trial_seed(master_seed: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(master_seed) ^ trial.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Output counts over `trials` independent runs; runs in parallel and is
/// independent of scheduling order.
pub fn monte_carlo_counts(
    a: &dyn Party,
    b: &dyn Party,
    mode: ChannelMode,
    trials: u64,
    master_seed: u64,
) -> Result<BTreeMap<(String, String), u64>> {
    if trials == 0 {
        return Err(Error::Validation("trials must be at least 1".into()));
    }
    Machine::new(a, b, mode)?;
    (0..trials)
        .into_par_iter()
        .map(|i| run_once(a, b, mode, trial_seed(master_seed, i)).map(|r| (r.output_a, r.output_b)))
        .try_fold(BTreeMap::new, |mut acc, r| {
            *acc.entry(r?).or_insert(0u64) += 1;
            Ok::<_, Error>(acc)
        })
        .try_reduce(BTreeMap::new, |mut x, y| {
            for (k, v) in y {
                *x.entry(k).or_insert(0) += v;
            }
            Ok(x)
        })
}

/// Empirical output distribution with denominator `trials`.
pub fn monte_carlo(
    a: &dyn Party,
    b: &dyn Party,
    mode: ChannelMode,
    trials: u64,
    master_seed: u64,
) -> Result<JointPMF> {
    let counts = monte_carlo_counts(a, b, mode, trials, master_seed)?;
    let n = BigInt::from(trials);
    let cells = counts
        .into_iter()
        .map(|(k, c)| (k, Rational::new(BigInt::from(c), n.clone())))
        .collect();
    JointPMF::from_observed(&cells)
}

/// Re-drives `party` with the randomness realizations and received messages
/// recorded in `view` and returns its output, or `None` if the party's
/// behavior does not regenerate the recorded view.
pub fn replay(party: &dyn Party, view: &PartyView) -> Option<String> {
    let mut rebuilt = PartyView::new();
    for event in view.events() {
        if let Event::Received(_) = event {
            rebuilt.push(event.clone());
            continue;
        }
        let consistent = match (party.step(&rebuilt), event) {
            (Action::Checkpoint, Event::Checkpoint) => true,
            (Action::Random(w), Event::Random(i)) => w.get(*i).is_some_and(Signed::is_positive),
            (Action::Send(m), Event::Sent(s)) => m == *s,
            _ => false,
        };
        if !consistent {
            return None;
        }
        rebuilt.push(event.clone());
    }
    (party.step(&rebuilt) == Action::Finish).then(|| party.output(&rebuilt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;

    /// Draws a bit, sends it, outputs the XOR (own bit on timeout).
    #[derive(Debug)]
    struct BitSender;

    impl Party for BitSender {
        fn name(&self) -> String {
            "bit-sender".into()
        }
        fn step(&self, view: &PartyView) -> Action {
            match (view.randomness().count(), view.sent().count(), view.round()) {
                (0, _, _) => Action::Random(vec![rat(1, 2), rat(1, 2)]),
                (_, 0, _) => Action::Send(Message::Value(view.randomness().next().unwrap() as u64)),
                (_, _, 0) => panic!("stepped before delivery"),
                _ => Action::Finish,
            }
        }
        fn output(&self, view: &PartyView) -> String {
            let own = view.randomness().next().unwrap_or(0) as u64;
            let peer = view.received().next().and_then(Message::value).unwrap_or(0);
            (own ^ peer).to_string()
        }
    }

    #[derive(Debug)]
    struct Spinner;

    impl Party for Spinner {
        fn name(&self) -> String {
            "spinner".into()
        }
        fn step(&self, view: &PartyView) -> Action {
            if view.has_checkpoint() {
                Action::Retry
            } else {
                Action::Checkpoint
            }
        }
        fn output(&self, _: &PartyView) -> String {
            "x".into()
        }
    }

    #[derive(Debug)]
    struct Constant(&'static str);

    impl Party for Constant {
        fn name(&self) -> String {
            "constant".into()
        }
        fn step(&self, _: &PartyView) -> Action {
            Action::Finish
        }
        fn output(&self, _: &PartyView) -> String {
            self.0.into()
        }
    }

    #[derive(Debug)]
    struct BadWeights;

    impl Party for BadWeights {
        fn name(&self) -> String {
            "bad".into()
        }
        fn step(&self, _: &PartyView) -> Action {
            Action::Random(vec![rat(1, 2), rat(1, 3)])
        }
        fn output(&self, _: &PartyView) -> String {
            String::new()
        }
    }

    #[test]
    fn enumerates_two_bits() {
        let tree = enumerate_executions(&BitSender, &BitSender, ChannelMode::CheapTalk, 8).unwrap();
        assert_eq!(tree.leaves.len(), 4);
        assert!(tree.leaves.iter().all(|l| l.probability == rat(1, 4)));
        assert_eq!(tree.total_mass(), one());
        for l in &tree.leaves {
            assert_eq!(l.output_a, l.output_b);
            assert_eq!(replay(&BitSender, &l.view_a).as_deref(), Some(l.output_a.as_str()));
        }
    }

    #[test]
    fn polite_alternation_and_timeout() {
        let tree = enumerate_executions(&Constant("a"), &BitSender, ChannelMode::PoliteTalk, 8).unwrap();
        // Alice finishes at once, so Bob's first delivery is a timeout.
        for l in &tree.leaves {
            assert_eq!(l.view_b.received().next(), Some(Message::Bottom));
        }
        assert_eq!(tree.total_mass(), one());
    }

    #[test]
    fn endless_loop_is_tail_mass() {
        let tree = enumerate_executions(&Spinner, &Spinner, ChannelMode::CheapTalk, 8).unwrap();
        assert!(tree.leaves.is_empty());
        assert_eq!(tree.tail_mass, one());
        assert!(matches!(
            run_once(&Spinner, &Spinner, ChannelMode::CheapTalk, 0),
            Err(Error::NonTermination(_))
        ));
    }

    #[test]
    fn rejects_bad_randomness() {
        assert!(matches!(
            enumerate_executions(&BadWeights, &Constant("b"), ChannelMode::CheapTalk, 1),
            Err(Error::InvalidRandomness(_))
        ));
    }

    #[test]
    fn node_budget() {
        let config = EnumerationConfig {
            node_budget: 3,
            ..EnumerationConfig::default()
        };
        assert!(matches!(
            enumerate_with(&BitSender, &BitSender, ChannelMode::CheapTalk, &config),
            Err(Error::StateExplosion(3))
        ));
    }

    #[test]
    fn seeds_are_reproducible() {
        let a = run_once(&BitSender, &BitSender, ChannelMode::CheapTalk, 7).unwrap();
        let b = run_once(&BitSender, &BitSender, ChannelMode::CheapTalk, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.transcript.rounds(), 1);
        assert_ne!(trial_seed(0, 1), trial_seed(0, 2));
        assert_ne!(trial_seed(0, 1), trial_seed(1, 1));
    }

    #[test]
    fn deterministic_parties_give_point_mass() {
        let pmf = monte_carlo(&Constant("x"), &Constant("y"), ChannelMode::PoliteTalk, 50, 3).unwrap();
        assert_eq!(pmf.rows(), 1);
        assert_eq!(pmf.get(0, 0), &one());
        assert!(monte_carlo(&Constant("x"), &Constant("y"), ChannelMode::PoliteTalk, 0, 3).is_err());
    }

    #[test]
    fn exact_sampling_respects_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = vec![rat(1, 3), zero(), rat(2, 3)];
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[sample_index(&mut rng, &w)] += 1;
        }
        assert_eq!(counts[1], 0);
        assert!((counts[0] as f64 / 30_000.0 - 1.0 / 3.0).abs() < 0.02);
    }
}
