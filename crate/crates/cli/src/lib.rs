//! Command dispatch for the `secsamp` binary.
//!
//! [`execute`] parses arguments, runs one command and returns the exit code
//! with the report text, so the whole front end is testable in-process.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use clap::{Parser, Subcommand, ValueEnum};
use secure_sampling::common_info::{
    classify, ergodic_decomposition, is_separable, AdversaryModel, Channel,
};
use secure_sampling::engine::{enumerate_executions, monte_carlo, run_once, Side};
use secure_sampling::fixtures;
use secure_sampling::game::{
    enumerate_nash_2x2, expected_payoffs, nash_payoff_hull, optimize_ce, Game,
};
use secure_sampling::prob::{is_product, marginals, mutual_information, total_variation, JointPMF};
use secure_sampling::protocols::{
    make_adversary, protocol_by_name, ProtocolSpec, RationalScope, SecurityClaim, PROTOCOL_NAMES,
};
use secure_sampling::rational::{parse_rational, to_decimal, zero, Rational};
use secure_sampling::security::{fixture_games, malicious_verdict, verify_protocol, RETRY_CAP};
use secure_sampling::specfile::{parse_dist, parse_game};
use secure_sampling::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "secsamp", about = "Secure two-party sampling: classify, solve, simulate, attack, verify")]
struct Cli {
    /// Append decimal approximations to exact rationals.
    #[arg(long, global = true)]
    decimal: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ChannelArg {
    Cheap,
    Polite,
}

impl From<ChannelArg> for Channel {
    fn from(c: ChannelArg) -> Self {
        match c {
            ChannelArg::Cheap => Channel::CheapTalk,
            ChannelArg::Polite => Channel::PoliteTalk,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModelArg {
    SemiHonest,
    Malicious,
}

impl From<ModelArg> for AdversaryModel {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::SemiHonest => AdversaryModel::SemiHonest,
            ModelArg::Malicious => AdversaryModel::Malicious,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SideArg {
    A,
    B,
}

impl From<SideArg> for Side {
    fn from(s: SideArg) -> Self {
        match s {
            SideArg::A => Side::A,
            SideArg::B => Side::B,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClaimArg {
    Correct,
    SemiHonest,
    Malicious,
    Rational,
}

impl From<ClaimArg> for SecurityClaim {
    fn from(c: ClaimArg) -> Self {
        match c {
            ClaimArg::Correct => SecurityClaim::Correct,
            ClaimArg::SemiHonest => SecurityClaim::SemiHonest,
            ClaimArg::Malicious => SecurityClaim::Malicious,
            ClaimArg::Rational => SecurityClaim::Rational(RationalScope::AnyCorrelatedEquilibrium),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Feasibility of secure sampling for a distribution.
    Classify {
        /// Spec file or built-in distribution name.
        dist: String,
        #[arg(long, value_enum)]
        channel: Option<ChannelArg>,
        #[arg(long, value_enum)]
        adversary: Option<ModelArg>,
    },
    /// Ergodic decomposition and separability.
    Decompose { dist: String },
    /// Nash equilibria of a 2x2 game.
    Equilibria { game: String },
    /// Correlated equilibrium maximizing w1*u1 + w2*u2.
    CeOpt {
        game: String,
        #[arg(long, default_value = "1")]
        w1: String,
        #[arg(long, default_value = "1")]
        w2: String,
    },
    /// Monte Carlo run of a protocol against its exact distribution.
    Simulate {
        protocol: String,
        #[arg(long)]
        dist: Option<String>,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact outcome of a protocol with one corrupted party.
    Attack {
        protocol: String,
        #[arg(long)]
        adversary: String,
        #[arg(long, value_enum, ignore_case = true)]
        side: SideArg,
        #[arg(long)]
        dist: Option<String>,
    },
    /// Runs every checker against a protocol's claims.
    Verify {
        protocol: String,
        #[arg(long)]
        dist: Option<String>,
        /// Games for the rational check; defaults to the built-in games.
        #[arg(long = "game")]
        games: Vec<String>,
        /// Extra property to require on top of the protocol's own claims.
        #[arg(long = "claim", value_enum)]
        claims: Vec<ClaimArg>,
    },
    /// Feasibility table over the four reference distributions.
    Table1,
}

struct Ctx {
    decimal: bool,
    out: String,
}

impl Ctx {
    fn num(&self, r: &Rational) -> String {
        if self.decimal && !r.is_integer() {
            format!("{r} (~{})", to_decimal(r, 6))
        } else {
            r.to_string()
        }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.out.push_str(s.as_ref());
        self.out.push('\n');
    }

    fn joint(&mut self, p: &JointPMF) {
        let ys = p.alphabet_y().symbols();
        let width = |s: &str| s.chars().count();
        let mut cols: Vec<usize> = ys.iter().map(|y| width(y)).collect();
        for row in p.mass() {
            for (c, m) in row.iter().enumerate() {
                cols[c] = cols[c].max(width(&self.num(m)));
            }
        }
        let lead = p.alphabet_x().symbols().iter().map(|x| width(x)).max().unwrap_or(0);
        let mut header = " ".repeat(lead);
        for (y, w) in ys.iter().zip(&cols) {
            let _ = write!(header, "  {y:>w$}");
        }
        self.line(header);
        for (x, row) in p.alphabet_x().symbols().iter().zip(p.mass()) {
            let mut line = format!("{x:>lead$}");
            for (m, w) in row.iter().zip(&cols) {
                let _ = write!(line, "  {:>w$}", self.num(m));
            }
            self.line(line);
        }
    }
}

/// Runs `args` (including the program name) and returns the exit code and
/// the report.
pub fn execute<I, T>(args: I) -> (i32, String)
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            return (code, e.render().to_string());
        }
    };
    let mut ctx = Ctx {
        decimal: cli.decimal,
        out: String::new(),
    };
    match run(&mut ctx, cli.command) {
        Ok(code) => (code, ctx.out),
        Err(e) => {
            ctx.line(format!("error: {e}"));
            (EXIT_INPUT, ctx.out)
        }
    }
}

fn load_dist(arg: &str) -> Result<JointPMF, Error> {
    if let Some(p) = fixtures::dist_by_name(arg) {
        return Ok(p);
    }
    let text = std::fs::read_to_string(arg).map_err(|e| {
        Error::Validation(format!(
            "`{arg}` is neither a built-in distribution ({}) nor a readable file: {e}",
            fixtures::DIST_NAMES.join(", ")
        ))
    })?;
    parse_dist(&text)
}

fn load_game(arg: &str) -> Result<Game, Error> {
    if let Some(g) = fixtures::game_by_name(arg) {
        return Ok(g);
    }
    let text = std::fs::read_to_string(arg).map_err(|e| {
        Error::Validation(format!(
            "`{arg}` is neither a built-in game ({}) nor a readable file: {e}",
            fixtures::GAME_NAMES.join(", ")
        ))
    })?;
    parse_game(&text)
}

fn load_protocol(name: &str, dist: Option<&str>) -> Result<ProtocolSpec, Error> {
    let p = dist.map(load_dist).transpose()?;
    protocol_by_name(name, p.as_ref()).map_err(|e| match e {
        Error::Validation(msg) if msg.starts_with("unknown protocol") => Error::Validation(format!(
            "{msg}; known: {}",
            PROTOCOL_NAMES.join(", ")
        )),
        other => other,
    })
}

fn weight(text: &str) -> Result<Rational, Error> {
    parse_rational(text).ok_or_else(|| Error::Validation(format!("bad weight `{text}`")))
}

fn run(ctx: &mut Ctx, command: Command) -> Result<i32, Error> {
    match command {
        Command::Classify { dist, channel, adversary } => classify_cmd(ctx, &dist, channel, adversary),
        Command::Decompose { dist } => decompose_cmd(ctx, &dist),
        Command::Equilibria { game } => equilibria_cmd(ctx, &game),
        Command::CeOpt { game, w1, w2 } => ce_opt_cmd(ctx, &game, &weight(&w1)?, &weight(&w2)?),
        Command::Simulate { protocol, dist, trials, seed } => {
            simulate_cmd(ctx, &protocol, dist.as_deref(), trials, seed)
        }
        Command::Attack { protocol, adversary, side, dist } => {
            attack_cmd(ctx, &protocol, dist.as_deref(), &adversary, side.into())
        }
        Command::Verify { protocol, dist, games, claims } => {
            verify_cmd(ctx, &protocol, dist.as_deref(), &games, &claims)
        }
        Command::Table1 => table1_cmd(ctx),
    }
}

const CHANNELS: [Channel; 2] = [Channel::CheapTalk, Channel::PoliteTalk];
const MODELS: [AdversaryModel; 2] = [AdversaryModel::SemiHonest, AdversaryModel::Malicious];

fn classify_cmd(
    ctx: &mut Ctx,
    dist: &str,
    channel: Option<ChannelArg>,
    adversary: Option<ModelArg>,
) -> Result<i32, Error> {
    let p = load_dist(dist)?;
    if let (Some(c), Some(a)) = (channel, adversary) {
        ctx.line(classify(&p, c.into(), a.into()).to_string());
        return Ok(EXIT_OK);
    }
    let channels: Vec<Channel> = channel.map_or(CHANNELS.to_vec(), |c| vec![c.into()]);
    let models: Vec<AdversaryModel> = adversary.map_or(MODELS.to_vec(), |a| vec![a.into()]);
    for c in &channels {
        for a in &models {
            ctx.line(format!("{:<12} {:<12} {}", c.to_string(), a.to_string(), classify(&p, *c, *a)));
        }
    }
    Ok(EXIT_OK)
}

fn decompose_cmd(ctx: &mut Ctx, dist: &str) -> Result<i32, Error> {
    let p = load_dist(dist)?;
    let dec = ergodic_decomposition(&p);
    ctx.joint(&p);
    ctx.line(format!("components: {}", dec.len()));
    for w in dec.labels() {
        let xs: Vec<&str> = dec.xs_in(w).map(|x| p.alphabet_x().symbol(x)).collect();
        let ys: Vec<&str> = dec.ys_in(w).map(|y| p.alphabet_y().symbol(y)).collect();
        ctx.line(format!(
            "  W={w}: mass {}  X {{{}}}  Y {{{}}}",
            ctx.num(dec.component_mass(w)),
            xs.join(", "),
            ys.join(", ")
        ));
    }
    ctx.line(format!("separable: {}", is_separable(&p)));
    ctx.line(format!("independent: {}", is_product(&p)));
    ctx.line(format!("I(X;Y) = {:.6} bit", mutual_information(&p)));
    ctx.line(format!("H(W) = {:.6} bit", dec.entropy()));
    Ok(EXIT_OK)
}

fn equilibria_cmd(ctx: &mut Ctx, game: &str) -> Result<i32, Error> {
    let g = load_game(game)?;
    let nash = enumerate_nash_2x2(&g)?;
    ctx.line(format!("Nash equilibria: {}", nash.len()));
    for (i, s) in nash.iter().enumerate() {
        let pay = expected_payoffs(&g, &s.joint())?;
        ctx.line(format!(
            "  {}. P_X = ({})  P_Y = ({})  payoff ({}, {})",
            i + 1,
            marginal_text(ctx, s.px.alphabet().symbols(), s.px.mass()),
            marginal_text(ctx, s.py.alphabet().symbols(), s.py.mass()),
            ctx.num(&pay.p1),
            ctx.num(&pay.p2)
        ));
    }
    let hull: Vec<String> = nash_payoff_hull(&g)?
        .iter()
        .map(|p| format!("({}, {})", ctx.num(&p.p1), ctx.num(&p.p2)))
        .collect();
    ctx.line(format!("payoff hull: {}", hull.join(" ")));
    Ok(EXIT_OK)
}

fn marginal_text(ctx: &Ctx, symbols: &[String], mass: &[Rational]) -> String {
    symbols
        .iter()
        .zip(mass)
        .map(|(s, m)| format!("{s}: {}", ctx.num(m)))
        .collect::<Vec<_>>()
        .join(", ")
}

fn ce_opt_cmd(ctx: &mut Ctx, game: &str, w1: &Rational, w2: &Rational) -> Result<i32, Error> {
    let g = load_game(game)?;
    let (p, pay) = optimize_ce(&g, (w1.clone(), w2.clone()))?;
    ctx.line(format!("weights: ({}, {})", ctx.num(w1), ctx.num(w2)));
    ctx.line("optimal correlated equilibrium:");
    ctx.joint(&p);
    ctx.line(format!("payoff: ({}, {})", ctx.num(&pay.p1), ctx.num(&pay.p2)));
    let value = w1 * &pay.p1 + w2 * &pay.p2;
    ctx.line(format!("value: {}", ctx.num(&value)));
    ctx.line(format!("separable: {}", is_separable(&p)));
    Ok(EXIT_OK)
}

fn simulate_cmd(
    ctx: &mut Ctx,
    protocol: &str,
    dist: Option<&str>,
    trials: u64,
    seed: u64,
) -> Result<i32, Error> {
    let spec = load_protocol(protocol, dist)?;
    let (a, b) = (spec.party_a.as_ref(), spec.party_b.as_ref());
    ctx.line(format!("protocol: {} ({})", spec.name, spec.mode));
    ctx.line(format!("seed: {seed}"));
    ctx.line(format!("trials: {trials}"));
    let sample = run_once(a, b, spec.mode, seed)?;
    let rounds: Vec<String> = sample.transcript.entries.iter().map(ToString::to_string).collect();
    ctx.line(format!(
        "sample run: outputs ({}, {}), rounds {}, retries {}: {}",
        sample.output_a,
        sample.output_b,
        sample.transcript.rounds(),
        sample.transcript.retries,
        rounds.join("; ")
    ));
    let empirical = monte_carlo(a, b, spec.mode, trials, seed)?;
    let exact = enumerate_executions(a, b, spec.mode, RETRY_CAP)?;
    ctx.line("empirical:");
    ctx.joint(&empirical);
    if exact.tail_mass > zero() {
        ctx.line(format!("exact: unavailable (tail mass {})", ctx.num(&exact.tail_mass)));
        return Ok(EXIT_OK);
    }
    let exact = exact.output_distribution();
    let tv = total_variation(&empirical.cells(), &exact);
    ctx.line(format!("total variation to exact: {}", to_decimal(&tv, 6)));
    let target_tv = total_variation(&exact, &spec.target.cells());
    ctx.line(format!("exact distance to target: {}", ctx.num(&target_tv)));
    Ok(EXIT_OK)
}

fn attack_cmd(
    ctx: &mut Ctx,
    protocol: &str,
    dist: Option<&str>,
    kind: &str,
    side: Side,
) -> Result<i32, Error> {
    let spec = load_protocol(protocol, dist)?;
    let strategy = make_adversary(kind)?;
    let (a, b) = spec.with_adversary(side, &strategy);
    let tree = enumerate_executions(a.as_ref(), b.as_ref(), spec.mode, RETRY_CAP)?;
    tree.require_exact()?;
    let honest = side.other();
    ctx.line(format!("protocol: {} ({})", spec.name, spec.mode));
    ctx.line(format!("adversary: {strategy} as {side}; honest party {honest}"));
    let marginal: BTreeMap<String, Rational> = tree.marginal(honest);
    for (v, p) in &marginal {
        ctx.line(format!("Pr[output={v}] = {}", ctx.num(p)));
    }
    let observed = tree.output_pmf()?;
    ctx.line("joint outputs (rows A, columns B):");
    ctx.joint(&observed);
    let verdict = malicious_verdict(&observed, &spec.target, honest)?;
    ctx.line(format!("simulatable by an ideal adversary: {verdict}"));
    Ok(EXIT_OK)
}

fn verify_cmd(
    ctx: &mut Ctx,
    protocol: &str,
    dist: Option<&str>,
    games: &[String],
    extra: &[ClaimArg],
) -> Result<i32, Error> {
    let spec = load_protocol(protocol, dist)?;
    let games: Vec<(String, Game)> = if games.is_empty() {
        fixture_games()
    } else {
        games
            .iter()
            .map(|g| load_game(g).map(|game| (g.clone(), game)))
            .collect::<Result<_, _>>()?
    };
    let report = verify_protocol(&spec, &games)?;
    ctx.out.push_str(&report.to_string());
    let mut all = true;
    let mut claims = spec.claims.clone();
    claims.extend(extra.iter().map(|&c| SecurityClaim::from(c)));
    for claim in &claims {
        let ok = report.confirms(*claim, &games);
        all &= ok;
        ctx.line(format!("claim {claim}: {}", if ok { "confirmed" } else { "REFUTED" }));
    }
    Ok(if all { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

/// The reference distributions and the condition each quadrant requires.
fn table1_cmd(ctx: &mut Ctx) -> Result<i32, Error> {
    let fixtures = [
        ("uniform-product", fixtures::uniform_product()),
        ("coin", fixtures::coin()),
        ("block", fixtures::block()),
        ("triangle", fixtures::triangle()),
    ];
    ctx.line("secure sampling feasibility by channel and adversary");
    let mut header = format!("{:<12} {:<12} {:<12}", "channel", "adversary", "condition");
    for (name, _) in &fixtures {
        let _ = write!(header, " {name:<17}");
    }
    ctx.line(header.trim_end());
    for c in CHANNELS {
        for a in MODELS {
            let condition = match (c, a) {
                (Channel::PoliteTalk, AdversaryModel::Malicious) => "independent",
                _ => "separable",
            };
            let mut line = format!("{:<12} {:<12} {condition:<12}", c.to_string(), a.to_string());
            for (_, p) in &fixtures {
                let v = classify(p, c, a);
                let _ = write!(line, " {:<17}", if v.feasible { "feasible" } else { "infeasible" });
            }
            ctx.line(line.trim_end());
        }
    }
    for (name, p) in &fixtures {
        let (px, py) = marginals(p);
        ctx.line(format!(
            "{name}: separable={} independent={} P_X=({}) P_Y=({})",
            is_separable(p),
            is_product(p),
            marginal_text(ctx, px.alphabet().symbols(), px.mass()),
            marginal_text(ctx, py.alphabet().symbols(), py.mass())
        ));
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use secure_sampling::rational::{int, rat};

    #[test]
    fn numbers_render_exactly_with_optional_decimal() {
        let plain = Ctx { decimal: false, out: String::new() };
        let dec = Ctx { decimal: true, out: String::new() };
        assert_eq!(plain.num(&rat(2, 3)), "2/3");
        assert_eq!(dec.num(&rat(2, 3)), "2/3 (~0.666667)");
        assert_eq!(dec.num(&int(5)), "5");
    }

    #[test]
    fn weights_accept_fractions() {
        assert_eq!(weight("3/4").unwrap(), rat(3, 4));
        assert!(weight("x").is_err());
    }
}
