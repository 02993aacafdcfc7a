use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::ProtocolSpec;
use crate::engine::{
    enumerate_executions, Action, ChannelMode, Event, ExecutionTree, Message, MessageSpace, Party,
    PartyView, Side,
};
use crate::error::{Error, Result};
use crate::game::{expected_payoffs, is_correlated_eq, Game};
use crate::rational::{zero, Rational};

/// Retry cap used when evaluating deviations; loops are collapsed, so it
/// only matters for loops that never recur exactly.
const SEARCH_RETRY_CAP: usize = 64;

/// Largest fixed-message table family generated automatically.
const TABLE_FAMILY_CAP: u64 = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageRule {
    Honest,
    Fixed(Message),
    /// Message chosen by the latest own randomness realization in the
    /// current attempt.
    ByOwnRandom(Vec<Message>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageBehavior {
    Honest,
    /// Follows the protocol but stops instead of sending its `round`-th
    /// message (1-based).
    Abort { round: usize },
    /// Sends `target` XOR the latest received value, steering XOR-style
    /// combiners toward `target`.
    BitFix { target: u64 },
    /// Rule per message index within the current attempt; honest beyond.
    Table(Vec<MessageRule>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OutputRule {
    Honest,
    /// Honest output followed by the complete view.
    FullView,
    Fixed(String),
    /// Placeholder resolved against a game by the deviation search.
    BestResponse,
    /// Output keyed by rendered view; honest for unlisted views.
    Table(BTreeMap<String, String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversaryStrategy {
    pub messages: MessageBehavior,
    pub output: OutputRule,
}

fn render_message(m: Message) -> String {
    m.to_string()
}

fn parse_message(text: &str) -> Option<Message> {
    match text {
        "⊥" | "bot" => Some(Message::Bottom),
        t => t.parse().ok().map(Message::Value),
    }
}

impl fmt::Display for AdversaryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.messages {
            MessageBehavior::Honest => f.write_str("honest")?,
            MessageBehavior::Abort { round } => write!(f, "abort:{round}")?,
            MessageBehavior::BitFix { target } => write!(f, "bit-fix:{target}")?,
            MessageBehavior::Table(rules) => {
                let parts: Vec<String> = rules
                    .iter()
                    .map(|r| match r {
                        MessageRule::Honest => "h".into(),
                        MessageRule::Fixed(m) => render_message(*m),
                        MessageRule::ByOwnRandom(t) => {
                            let t: Vec<String> = t.iter().map(|m| render_message(*m)).collect();
                            format!("[{}]", t.join(" "))
                        }
                    })
                    .collect();
                write!(f, "table:{}", parts.join(","))?
            }
        }
        match &self.output {
            OutputRule::Honest => Ok(()),
            OutputRule::FullView => f.write_str("+view"),
            OutputRule::Fixed(s) => write!(f, "+output={s}"),
            OutputRule::BestResponse => f.write_str("+best-response"),
            OutputRule::Table(t) => write!(f, "+table({} views)", t.len()),
        }
    }
}

impl AdversaryStrategy {
    pub fn honest() -> Self {
        AdversaryStrategy {
            messages: MessageBehavior::Honest,
            output: OutputRule::Honest,
        }
    }

    pub fn with_output(mut self, output: OutputRule) -> Self {
        self.output = output;
        self
    }

    pub fn instantiate(&self, honest: Arc<dyn Party>) -> Arc<dyn Party> {
        Arc::new(AdversaryParty {
            honest,
            strategy: self.clone(),
        })
    }
}

/// Parses `honest`, `abort:R`, `bit-fix:B`, `view-output` or
/// `table:M,M,...` where each `M` is a value, `bot`, or `h`.
pub fn make_adversary(kind: &str) -> Result<AdversaryStrategy> {
    let unknown = || Error::UnknownKind(kind.to_string());
    let (head, arg) = match kind.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (kind, None),
    };
    let messages = match (head, arg) {
        ("honest", None) => MessageBehavior::Honest,
        ("view-output", None) => {
            return Ok(AdversaryStrategy::honest().with_output(OutputRule::FullView));
        }
        ("abort", Some(r)) => match r.parse() {
            Ok(round) if round >= 1 => MessageBehavior::Abort { round },
            _ => return Err(unknown()),
        },
        ("bit-fix", Some(b)) => {
            let target: u64 = b.parse().map_err(|_| unknown())?;
            return Ok(AdversaryStrategy {
                messages: MessageBehavior::BitFix { target },
                output: OutputRule::Fixed(target.to_string()),
            });
        }
        ("table", Some(list)) => MessageBehavior::Table(
            list.split(',')
                .map(|m| match m.trim() {
                    "h" => Some(MessageRule::Honest),
                    t => parse_message(t).map(MessageRule::Fixed),
                })
                .collect::<Option<_>>()
                .ok_or_else(unknown)?,
        ),
        _ => return Err(unknown()),
    };
    Ok(AdversaryStrategy {
        messages,
        output: OutputRule::Honest,
    })
}

/// Honest behavior on the adversary's own view with messages and output
/// substituted.
#[derive(Debug, Clone)]
pub struct AdversaryParty {
    honest: Arc<dyn Party>,
    strategy: AdversaryStrategy,
}

impl AdversaryParty {
    pub fn strategy(&self) -> &AdversaryStrategy {
        &self.strategy
    }
}

fn attempt_sent(view: &PartyView) -> usize {
    view.current_attempt()
        .iter()
        .filter(|e| matches!(e, Event::Sent(_)))
        .count()
}

impl Party for AdversaryParty {
    fn name(&self) -> String {
        format!("{}[{}]", self.honest.name(), self.strategy)
    }

    fn supports(&self, mode: ChannelMode) -> bool {
        self.honest.supports(mode)
    }

    fn step(&self, view: &PartyView) -> Action {
        let honest = self.honest.step(view);
        let Action::Send(m) = honest else {
            return honest;
        };
        let sent = match &self.strategy.messages {
            MessageBehavior::Honest => m,
            MessageBehavior::Abort { round } => {
                if view.sent().count() + 1 >= *round {
                    return Action::Finish;
                }
                m
            }
            MessageBehavior::BitFix { target } => {
                let last = view
                    .current_attempt()
                    .iter()
                    .rev()
                    .find_map(|e| match e {
                        Event::Received(Message::Value(v)) => Some(*v),
                        _ => None,
                    })
                    .unwrap_or(0);
                Message::Value(target ^ last)
            }
            MessageBehavior::Table(rules) => match rules.get(attempt_sent(view)) {
                None | Some(MessageRule::Honest) => m,
                Some(MessageRule::Fixed(x)) => *x,
                Some(MessageRule::ByOwnRandom(table)) => {
                    let own = view.current_attempt().iter().rev().find_map(|e| match e {
                        Event::Random(i) => Some(*i),
                        _ => None,
                    });
                    own.and_then(|i| table.get(i).copied()).unwrap_or(m)
                }
            },
        };
        Action::Send(sent)
    }

    fn output(&self, view: &PartyView) -> String {
        match &self.strategy.output {
            OutputRule::Honest | OutputRule::BestResponse => self.honest.output(view),
            OutputRule::FullView => format!("{}#{}", self.honest.output(view), view),
            OutputRule::Fixed(s) => s.clone(),
            OutputRule::Table(t) => t
                .get(&view.to_string())
                .cloned()
                .unwrap_or_else(|| self.honest.output(view)),
        }
    }

    fn message_space(&self) -> MessageSpace {
        self.honest.message_space()
    }
}

fn message_options(alphabet: u64) -> Vec<Message> {
    (0..alphabet)
        .map(Message::Value)
        .chain(std::iter::once(Message::Bottom))
        .collect()
}

/// All tables of length `len` over `options`, in lexicographic order.
fn tables<T: Clone>(options: &[T], len: usize) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                options.iter().map(move |o| {
                    let mut next = prefix.clone();
                    next.push(o.clone());
                    next
                })
            })
            .collect();
    }
    out
}

/// Honest play, every abort point, every fixed message schedule, and
/// bit-fixing, all with honest outputs.
pub fn deterministic_family(space: MessageSpace) -> Vec<AdversaryStrategy> {
    let mut family = vec![AdversaryStrategy::honest()];
    for round in 1..=space.rounds.max(1) {
        family.push(AdversaryStrategy {
            messages: MessageBehavior::Abort { round },
            output: OutputRule::Honest,
        });
    }
    if space.rounds == 0 {
        return family;
    }
    let options = message_options(space.alphabet);
    let count = (options.len() as u64).checked_pow(space.rounds as u32);
    if count.is_some_and(|c| c <= TABLE_FAMILY_CAP) {
        for t in tables(&options, space.rounds) {
            family.push(AdversaryStrategy {
                messages: MessageBehavior::Table(t.into_iter().map(MessageRule::Fixed).collect()),
                output: OutputRule::Honest,
            });
        }
    }
    if space.alphabet <= 16 {
        for target in 0..space.alphabet {
            family.push(AdversaryStrategy {
                messages: MessageBehavior::BitFix { target },
                output: OutputRule::Honest,
            });
        }
    }
    family
}

/// Single-round message functions of the party's own randomness, for small
/// alphabets.
fn own_random_family(space: MessageSpace) -> Vec<AdversaryStrategy> {
    if space.rounds != 1 {
        return Vec::new();
    }
    let options = message_options(space.alphabet);
    let count = (options.len() as u64).checked_pow(space.alphabet as u32);
    if !count.is_some_and(|c| c <= TABLE_FAMILY_CAP) {
        return Vec::new();
    }
    tables(&options, space.alphabet as usize)
        .into_iter()
        .map(|t| AdversaryStrategy {
            messages: MessageBehavior::Table(vec![MessageRule::ByOwnRandom(t)]),
            output: OutputRule::Honest,
        })
        .collect()
}

fn message_family(space: MessageSpace) -> Vec<AdversaryStrategy> {
    let mut family = deterministic_family(space);
    family.extend(own_random_family(space));
    family
}

/// Message deviations whose output is the full view.
pub fn malicious_family(space: MessageSpace) -> Vec<AdversaryStrategy> {
    message_family(space)
        .into_iter()
        .map(|s| s.with_output(OutputRule::FullView))
        .collect()
}

/// Message deviations paired with the utility-maximizing output per view.
pub fn rational_family(space: MessageSpace) -> Vec<AdversaryStrategy> {
    message_family(space)
        .into_iter()
        .map(|s| s.with_output(OutputRule::BestResponse))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deviation {
    /// Best strategy found, with any best-response output made explicit.
    pub strategy: AdversaryStrategy,
    pub utility: Rational,
    pub target_utility: Rational,
    /// `utility - target_utility`; positive means a profitable deviation.
    pub gain: Rational,
}

fn deviator_utility(g: &Game, deviator: Side, own: usize, other: usize) -> &Rational {
    match deviator {
        Side::A => g.utility(0, own, other),
        Side::B => g.utility(1, other, own),
    }
}

fn action_index(g: &Game, side: Side, symbol: &str, strategy: &AdversaryStrategy) -> Result<usize> {
    let alphabet = match side {
        Side::A => g.actions_a(),
        Side::B => g.actions_b(),
    };
    alphabet
        .index_of(symbol)
        .ok_or_else(|| Error::OutputOutsideAlphabet {
            strategy: strategy.to_string(),
            output: symbol.to_string(),
        })
}

/// Evaluates one strategy exactly; best-response outputs are resolved into
/// an explicit per-view table.
fn evaluate(
    g: &Game,
    tree: &ExecutionTree,
    strategy: &AdversaryStrategy,
    deviator: Side,
) -> Result<(AdversaryStrategy, Rational)> {
    let honest_side = deviator.other();
    if strategy.output != OutputRule::BestResponse {
        let mut total = zero();
        for leaf in &tree.leaves {
            let own = action_index(g, deviator, leaf.output(deviator), strategy)?;
            let other = action_index(g, honest_side, leaf.output(honest_side), &AdversaryStrategy::honest())?;
            total += &leaf.probability * deviator_utility(g, deviator, own, other);
        }
        return Ok((strategy.clone(), total));
    }
    let actions = match deviator {
        Side::A => g.actions_a().len(),
        Side::B => g.actions_b().len(),
    };
    // Unnormalized conditional payoff of each action, per view.
    let mut by_view: BTreeMap<String, (Vec<Rational>, String)> = BTreeMap::new();
    for leaf in &tree.leaves {
        let other = action_index(g, honest_side, leaf.output(honest_side), &AdversaryStrategy::honest())?;
        let entry = by_view
            .entry(leaf.view(deviator).to_string())
            .or_insert_with(|| (vec![zero(); actions], leaf.output(deviator).to_string()));
        for (a, acc) in entry.0.iter_mut().enumerate() {
            *acc += &leaf.probability * deviator_utility(g, deviator, a, other);
        }
    }
    let alphabet = match deviator {
        Side::A => g.actions_a(),
        Side::B => g.actions_b(),
    };
    let mut table = BTreeMap::new();
    let mut total = zero();
    for (view, (payoffs, honest_out)) in by_view {
        let best = payoffs.iter().max().expect("non-empty alphabet").clone();
        let choice = match alphabet.index_of(&honest_out) {
            Some(h) if payoffs[h] == best => h,
            _ => payoffs.iter().position(|p| *p == best).expect("max present"),
        };
        table.insert(view, alphabet.symbol(choice).to_string());
        total += best;
    }
    Ok((strategy.clone().with_output(OutputRule::Table(table)), total))
}

/// Exact search for the most profitable deviation of `deviator` within
/// `family`. Ties keep the earliest strategy.
pub fn rational_deviation_search(
    g: &Game,
    spec: &ProtocolSpec,
    family: &[AdversaryStrategy],
    deviator: Side,
) -> Result<Deviation> {
    if family.is_empty() {
        return Err(Error::Validation("empty strategy family".into()));
    }
    if !is_correlated_eq(g, &spec.target)? {
        return Err(Error::NotCorrelatedEq);
    }
    let payoffs = expected_payoffs(g, &spec.target)?;
    let target_utility = match deviator {
        Side::A => payoffs.p1,
        Side::B => payoffs.p2,
    };
    let mut best: Option<(AdversaryStrategy, Rational)> = None;
    for strategy in family {
        let (a, b) = spec.with_adversary(deviator, strategy);
        let tree = enumerate_executions(a.as_ref(), b.as_ref(), spec.mode, SEARCH_RETRY_CAP)?;
        tree.require_exact()?;
        let (resolved, utility) = evaluate(g, &tree, strategy, deviator)?;
        if best.as_ref().map_or(true, |(_, u)| utility > *u) {
            best = Some((resolved, utility));
        }
    }
    let (strategy, utility) = best.expect("family is non-empty");
    let gain = &utility - &target_utility;
    Ok(Deviation {
        strategy,
        utility,
        target_utility,
        gain,
    })
}
