//! Two-player strategic games with rational utilities.
//!
//! Nash checks compare against every pure deviation, which is enough because
//! expected utility is linear in the deviating mixed strategy. Correlated
//! equilibrium checks use the per-signal swap inequalities: for every
//! recommended action and every alternative, following the recommendation
//! must be at least as good in conditional expectation.

use std::cmp::Ordering;
use std::fmt;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::lp::{solve_lp, LinearProgram, LpOutcome, Relation};
use crate::prob::{Alphabet, JointPMF, MarginalPMF};
use crate::rational::{one, zero, Rational};

/// A correlated strategy is a joint distribution over action profiles.
pub type CorrelatedStrategy = JointPMF;

#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    actions_a: Alphabet,
    actions_b: Alphabet,
    u1: Vec<Vec<Rational>>,
    u2: Vec<Vec<Rational>>,
}

impl Game {
    pub fn new(
        actions_a: Alphabet,
        actions_b: Alphabet,
        u1: Vec<Vec<Rational>>,
        u2: Vec<Vec<Rational>>,
    ) -> Result<Self> {
        for (name, u) in [("u1", &u1), ("u2", &u2)] {
            if u.len() != actions_a.len() || u.iter().any(|r| r.len() != actions_b.len()) {
                return Err(Error::DimensionMismatch(format!(
                    "{name} must be {}x{}",
                    actions_a.len(),
                    actions_b.len()
                )));
            }
        }
        Ok(Game {
            actions_a,
            actions_b,
            u1,
            u2,
        })
    }

    /// Every outcome pays `(c1, c2)`.
    pub fn constant(actions_a: Alphabet, actions_b: Alphabet, c1: Rational, c2: Rational) -> Self {
        let (r, c) = (actions_a.len(), actions_b.len());
        Game {
            actions_a,
            actions_b,
            u1: vec![vec![c1; c]; r],
            u2: vec![vec![c2; c]; r],
        }
    }

    pub fn actions_a(&self) -> &Alphabet {
        &self.actions_a
    }

    pub fn actions_b(&self) -> &Alphabet {
        &self.actions_b
    }

    pub fn u1(&self) -> &[Vec<Rational>] {
        &self.u1
    }

    pub fn u2(&self) -> &[Vec<Rational>] {
        &self.u2
    }

    /// Utility of `player` (0 = Alice, 1 = Bob) at `(x, y)`.
    pub fn utility(&self, player: usize, x: usize, y: usize) -> &Rational {
        if player == 0 {
            &self.u1[x][y]
        } else {
            &self.u2[x][y]
        }
    }

    fn check_alphabets(&self, ax: &Alphabet, ay: &Alphabet) -> Result<()> {
        if ax != &self.actions_a || ay != &self.actions_b {
            return Err(Error::AlphabetMismatch(format!(
                "strategy over [{ax}] x [{ay}] for game over [{}] x [{}]",
                self.actions_a, self.actions_b
            )));
        }
        Ok(())
    }

    /// The game on `(X x Z) x (Y x Z)` whose utilities ignore the labels.
    pub fn extended(&self, labels: usize) -> Game {
        let ext = |a: &Alphabet| {
            Alphabet::new((0..labels).flat_map(|z| {
                a.symbols().iter().map(move |s| lifted_label(s, z))
            }))
            .expect("labels are distinct")
        };
        let (r, c) = (self.actions_a.len(), self.actions_b.len());
        let widen = |u: &Vec<Vec<Rational>>| {
            (0..labels * r)
                .map(|i| (0..labels * c).map(|j| u[i % r][j % c].clone()).collect())
                .collect()
        };
        Game {
            actions_a: ext(&self.actions_a),
            actions_b: ext(&self.actions_b),
            u1: widen(&self.u1),
            u2: widen(&self.u2),
        }
    }
}

pub(crate) fn lifted_label(symbol: &str, z: usize) -> String {
    format!("({symbol},z{z})")
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    pub px: MarginalPMF,
    pub py: MarginalPMF,
}

impl StrategyProfile {
    pub fn new(px: MarginalPMF, py: MarginalPMF) -> Self {
        StrategyProfile { px, py }
    }

    pub fn joint(&self) -> JointPMF {
        JointPMF::product(&self.px, &self.py)
    }
}

impl fmt::Display for StrategyProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "A {} / B {}", self.px, self.py)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PayoffPoint {
    pub p1: Rational,
    pub p2: Rational,
}

impl PayoffPoint {
    pub fn new(p1: Rational, p2: Rational) -> Self {
        PayoffPoint { p1, p2 }
    }
}

impl fmt::Display for PayoffPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.p1, self.p2)
    }
}

pub fn expected_payoffs(g: &Game, s: &CorrelatedStrategy) -> Result<PayoffPoint> {
    g.check_alphabets(s.alphabet_x(), s.alphabet_y())?;
    let mut p1 = zero();
    let mut p2 = zero();
    for (x, y) in s.support() {
        p1 += s.get(x, y) * &g.u1[x][y];
        p2 += s.get(x, y) * &g.u2[x][y];
    }
    Ok(PayoffPoint { p1, p2 })
}

/// Expected utility of each of Alice's pure actions against `py`.
fn row_values(g: &Game, py: &MarginalPMF) -> Vec<Rational> {
    g.u1.iter()
        .map(|row| row.iter().zip(py.mass()).map(|(u, q)| u * q).sum())
        .collect()
}

fn col_values(g: &Game, px: &MarginalPMF) -> Vec<Rational> {
    (0..g.actions_b.len())
        .map(|y| px.mass().iter().enumerate().map(|(x, p)| p * &g.u2[x][y]).sum())
        .collect()
}

pub fn is_nash(g: &Game, s: &StrategyProfile) -> Result<bool> {
    g.check_alphabets(s.px.alphabet(), s.py.alphabet())?;
    let rows = row_values(g, &s.py);
    let cols = col_values(g, &s.px);
    let best_row = rows.iter().max().expect("non-empty");
    let best_col = cols.iter().max().expect("non-empty");
    Ok(s.px.support().all(|x| &rows[x] == best_row) && s.py.support().all(|y| &cols[y] == best_col))
}

pub fn is_correlated_eq(g: &Game, s: &CorrelatedStrategy) -> Result<bool> {
    g.check_alphabets(s.alphabet_x(), s.alphabet_y())?;
    let (r, c) = (s.rows(), s.cols());
    for x in 0..r {
        for alt in 0..r {
            let gain: Rational = (0..c)
                .map(|y| s.get(x, y) * (&g.u1[x][y] - &g.u1[alt][y]))
                .sum();
            if gain.is_negative() {
                return Ok(false);
            }
        }
    }
    for y in 0..c {
        for alt in 0..c {
            let gain: Rational = (0..r)
                .map(|x| s.get(x, y) * (&g.u2[x][y] - &g.u2[x][alt]))
                .sum();
            if gain.is_negative() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// All Nash equilibria of a 2x2 game.
///
/// Works on `p = P(first row)` and `q = P(first column)`. Alice's advantage
/// for the first row is linear in `q` and Bob's advantage for the first
/// column is linear in `p`. An equilibrium with interior `p` needs Alice
/// indifferent, which pins `q` to the zero of her advantage (and vice versa),
/// so every isolated equilibrium lies on the grid `{0, 1, p*} x {0, 1, q*}`.
/// A continuum exists exactly when one player's pure strategy leaves the
/// other indifferent while remaining a best response on an interval.
pub fn enumerate_nash_2x2(g: &Game) -> Result<Vec<StrategyProfile>> {
    if g.actions_a.len() != 2 || g.actions_b.len() != 2 {
        return Err(Error::NotTwoByTwo);
    }
    let u1 = &g.u1;
    let u2 = &g.u2;
    // Alice: adv_a(q) = q * a0 + (1 - q) * a1
    let a0 = &u1[0][0] - &u1[1][0];
    let a1 = &u1[0][1] - &u1[1][1];
    // Bob: adv_b(p) = p * b0 + (1 - p) * b1
    let b0 = &u2[0][0] - &u2[0][1];
    let b1 = &u2[1][0] - &u2[1][1];

    // Bob indifferent against pure row 0 (p = 1) or row 1 (p = 0).
    for (bob_tie, row_sign_at) in [(&b0, 0usize), (&b1, 1)] {
        if bob_tie.is_zero() && best_on_interval(&a0, &a1, row_sign_at == 0) {
            return Err(Error::DegenerateGame);
        }
    }
    for (alice_tie, col) in [(&a0, 0usize), (&a1, 1)] {
        if alice_tie.is_zero() && best_on_interval(&b0, &b1, col == 0) {
            return Err(Error::DegenerateGame);
        }
    }

    let mut ps = vec![one(), zero()];
    if let Some(p) = interior_zero(&b0, &b1) {
        ps.push(p);
    }
    let mut qs = vec![one(), zero()];
    if let Some(q) = interior_zero(&a0, &a1) {
        qs.push(q);
    }

    let mut found: Vec<StrategyProfile> = Vec::new();
    for p in &ps {
        for q in &qs {
            let px = MarginalPMF::new(g.actions_a.clone(), vec![p.clone(), one() - p])?;
            let py = MarginalPMF::new(g.actions_b.clone(), vec![q.clone(), one() - q])?;
            let s = StrategyProfile::new(px, py);
            if is_nash(g, &s)? && !found.contains(&s) {
                found.push(s);
            }
        }
    }
    Ok(found)
}

/// Zero of `t * c0 + (1 - t) * c1` strictly inside (0, 1), if unique.
fn interior_zero(c0: &Rational, c1: &Rational) -> Option<Rational> {
    let slope = c0 - c1;
    if slope.is_zero() {
        return None;
    }
    let t = -c1 / slope;
    (t.is_positive() && t < one()).then_some(t)
}

/// Whether the action favoured by a nonnegative (`first == true`) or
/// nonpositive advantage `t * c0 + (1 - t) * c1` holds for a set of `t` of
/// positive length in [0, 1].
fn best_on_interval(c0: &Rational, c1: &Rational, first: bool) -> bool {
    let (c0, c1) = if first {
        (c0.clone(), c1.clone())
    } else {
        (-c0.clone(), -c1.clone())
    };
    // A linear function is >= 0 on a positive-length subinterval of [0, 1]
    // iff it is > 0 at some endpoint, or it is identically zero.
    c0.is_positive() || c1.is_positive() || (c0.is_zero() && c1.is_zero())
}

/// Linear program maximizing `w1 E[u1] + w2 E[u2]` over the correlated
/// equilibrium polytope. Variable `x * |Y| + y` is the mass of `(x, y)`.
pub fn ce_program(g: &Game, weights: (&Rational, &Rational)) -> LinearProgram {
    let (r, c) = (g.actions_a.len(), g.actions_b.len());
    let mut lp = LinearProgram::new();
    for x in 0..r {
        for y in 0..c {
            let v = lp.add_variable(
                format!("p[{},{}]", g.actions_a.symbol(x), g.actions_b.symbol(y)),
                true,
            );
            lp.set_objective(v, weights.0 * &g.u1[x][y] + weights.1 * &g.u2[x][y]);
        }
    }
    lp.add_constraint((0..r * c).map(|v| (v, one())), Relation::Eq, one());
    for x in 0..r {
        for alt in (0..r).filter(|&a| a != x) {
            lp.add_constraint(
                (0..c).map(|y| (x * c + y, &g.u1[x][y] - &g.u1[alt][y])),
                Relation::Ge,
                zero(),
            );
        }
    }
    for y in 0..c {
        for alt in (0..c).filter(|&a| a != y) {
            lp.add_constraint(
                (0..r).map(|x| (x * c + y, &g.u2[x][y] - &g.u2[x][alt])),
                Relation::Ge,
                zero(),
            );
        }
    }
    lp
}

pub fn optimize_ce(
    g: &Game,
    weights: (Rational, Rational),
) -> Result<(CorrelatedStrategy, PayoffPoint)> {
    let lp = ce_program(g, (&weights.0, &weights.1));
    let assignment = match solve_lp(&lp)? {
        LpOutcome::Optimal { assignment, .. } => assignment,
        other => unreachable!("correlated equilibrium polytope is a non-empty polytope: {other:?}"),
    };
    let c = g.actions_b.len();
    let mass = assignment.chunks(c).map(<[Rational]>::to_vec).collect();
    let s = JointPMF::new(g.actions_a.clone(), g.actions_b.clone(), mass)?;
    let payoffs = expected_payoffs(g, &s)?;
    Ok((s, payoffs))
}

fn cross(o: &PayoffPoint, a: &PayoffPoint, b: &PayoffPoint) -> Rational {
    (&a.p1 - &o.p1) * (&b.p2 - &o.p2) - (&a.p2 - &o.p2) * (&b.p1 - &o.p1)
}

/// Vertices of the convex hull, counterclockwise from the lowest-leftmost
/// point. Collinear points are dropped.
pub fn convex_hull(points: &[PayoffPoint]) -> Vec<PayoffPoint> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| match a.p1.cmp(&b.p1) {
        Ordering::Equal => a.p2.cmp(&b.p2),
        o => o,
    });
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<PayoffPoint> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && !cross(&lower[lower.len() - 2], &lower[lower.len() - 1], p).is_positive() {
            lower.pop();
        }
        lower.push(p.clone());
    }
    let mut upper: Vec<PayoffPoint> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && !cross(&upper[upper.len() - 2], &upper[upper.len() - 1], p).is_positive() {
            upper.pop();
        }
        upper.push(p.clone());
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

pub fn nash_payoff_hull(g: &Game) -> Result<Vec<PayoffPoint>> {
    let points = enumerate_nash_2x2(g)?
        .iter()
        .map(|s| expected_payoffs(g, &s.joint()))
        .collect::<Result<Vec<_>>>()?;
    Ok(convex_hull(&points))
}

/// Exact membership test for a hull given as counterclockwise vertices
/// (boundary included).
pub fn hull_contains(hull: &[PayoffPoint], p: &PayoffPoint) -> bool {
    match hull.len() {
        0 => false,
        1 => &hull[0] == p,
        2 => {
            let (a, b) = (&hull[0], &hull[1]);
            cross(a, b, p).is_zero()
                && p.p1 >= a.p1.clone().min(b.p1.clone())
                && p.p1 <= a.p1.clone().max(b.p1.clone())
                && p.p2 >= a.p2.clone().min(b.p2.clone())
                && p.p2 <= a.p2.clone().max(b.p2.clone())
        }
        n => (0..n).all(|i| !cross(&hull[i], &hull[(i + 1) % n], p).is_negative()),
    }
}

/// Mixes Nash equilibria with a shared public label `Z`: Alice receives
/// `(X, Z)` and Bob `(Y, Z)`, with mass `w_z * px_z(x) * py_z(y)` on
/// `((x, z), (y, z))`.
pub fn lift_convex_combination(
    g: &Game,
    equilibria: &[StrategyProfile],
    weights: &[Rational],
) -> Result<JointPMF> {
    if equilibria.is_empty() || equilibria.len() != weights.len() {
        return Err(Error::BadWeights(format!(
            "{} weights for {} equilibria",
            weights.len(),
            equilibria.len()
        )));
    }
    if weights.iter().any(Signed::is_negative) {
        return Err(Error::BadWeights("negative weight".into()));
    }
    let total: Rational = weights.iter().sum();
    if total != one() {
        return Err(Error::BadWeights(format!("weights sum to {total}")));
    }
    for (i, s) in equilibria.iter().enumerate() {
        if !is_nash(g, s)? {
            return Err(Error::NotNash(i));
        }
    }
    let k = equilibria.len();
    let ext = g.extended(k);
    let (r, c) = (g.actions_a.len(), g.actions_b.len());
    let mut mass = vec![vec![zero(); k * c]; k * r];
    for (z, (s, w)) in equilibria.iter().zip(weights).enumerate() {
        for x in 0..r {
            for y in 0..c {
                mass[z * r + x][z * c + y] = w * s.px.get(x) * s.py.get(y);
            }
        }
    }
    JointPMF::new(ext.actions_a.clone(), ext.actions_b.clone(), mass)
}
