//! Exact two-phase simplex over rationals.
//!
//! Pivoting follows Bland's rule (lowest eligible index for both the
//! entering and the leaving variable), so the method terminates even on
//! degenerate problems. The tableau is dense; the programs built by this
//! crate have at most a few hundred columns.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{one, zero, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Variable {
    pub name: String,
    /// When false the variable ranges over all rationals.
    pub nonnegative: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coefficients: Vec<Rational>,
    pub relation: Relation,
    pub bound: Rational,
}

/// `maximize objective . x` subject to the constraints.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearProgram {
    pub variables: Vec<Variable>,
    pub objective: Vec<Rational>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a variable with a zero objective coefficient; returns its index.
    pub fn add_variable(&mut self, name: impl Into<String>, nonnegative: bool) -> usize {
        self.variables.push(Variable {
            name: name.into(),
            nonnegative,
        });
        self.objective.push(zero());
        for c in &mut self.constraints {
            c.coefficients.push(zero());
        }
        self.variables.len() - 1
    }

    pub fn set_objective(&mut self, var: usize, coefficient: Rational) {
        self.objective[var] = coefficient;
    }

    /// Adds `sum coeff * x_var  rel  bound` from sparse terms.
    pub fn add_constraint(
        &mut self,
        terms: impl IntoIterator<Item = (usize, Rational)>,
        relation: Relation,
        bound: Rational,
    ) {
        let mut coefficients = vec![zero(); self.variables.len()];
        for (v, c) in terms {
            coefficients[v] += c;
        }
        self.constraints.push(Constraint {
            coefficients,
            relation,
            bound,
        });
    }

    fn validate(&self) -> Result<()> {
        let n = self.variables.len();
        if n == 0 {
            return Err(Error::MalformedLp("no variables".into()));
        }
        if self.objective.len() != n {
            return Err(Error::MalformedLp(format!(
                "objective has {} coefficients for {n} variables",
                self.objective.len()
            )));
        }
        let mut names = BTreeSet::new();
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                return Err(Error::MalformedLp(format!("duplicate variable `{}`", v.name)));
            }
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coefficients.len() != n {
                return Err(Error::MalformedLp(format!(
                    "constraint {i} has {} coefficients for {n} variables",
                    c.coefficients.len()
                )));
            }
        }
        Ok(())
    }

    /// True when `x` satisfies every constraint and sign restriction exactly.
    pub fn is_feasible_point(&self, x: &[Rational]) -> bool {
        if x.len() != self.variables.len() {
            return false;
        }
        let signs_ok = self
            .variables
            .iter()
            .zip(x)
            .all(|(v, xi)| !v.nonnegative || !xi.is_negative());
        signs_ok
            && self.constraints.iter().all(|c| {
                let lhs: Rational = c.coefficients.iter().zip(x).map(|(a, b)| a * b).sum();
                match c.relation {
                    Relation::Le => lhs <= c.bound,
                    Relation::Eq => lhs == c.bound,
                    Relation::Ge => lhs >= c.bound,
                }
            })
    }

    pub fn objective_value(&self, x: &[Rational]) -> Rational {
        self.objective.iter().zip(x).map(|(a, b)| a * b).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal {
        assignment: Vec<Rational>,
        value: Rational,
    },
    /// `residual` is the minimum total artificial mass found by phase one; it
    /// is strictly positive and certifies that no feasible point exists.
    Infeasible { residual: Rational },
    Unbounded,
}

impl LpOutcome {
    pub fn is_feasible(&self) -> bool {
        !matches!(self, LpOutcome::Infeasible { .. })
    }
}

struct Tableau {
    // rows[i] = coefficients followed by rhs
    rows: Vec<Vec<Rational>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> &Rational {
        &self.rows[i][self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v /= &p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c].is_zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *v -= &f * pv;
                }
            }
        }
        self.basis[r] = c;
    }

    /// Maximizes `cost . x` over the columns in `allowed`. Returns false when
    /// unbounded.
    fn optimize(&mut self, cost: &[Rational], allowed: &dyn Fn(usize) -> bool) -> bool {
        loop {
            // reduced cost of column j: cost_j - sum_i cost_{basis_i} * a_ij
            let entering = (0..self.cols).filter(|&j| allowed(j)).find(|&j| {
                if self.basis.contains(&j) {
                    return false;
                }
                let mut rc = cost[j].clone();
                for (i, &b) in self.basis.iter().enumerate() {
                    if !cost[b].is_zero() && !self.rows[i][j].is_zero() {
                        rc -= &cost[b] * &self.rows[i][j];
                    }
                }
                rc.is_positive()
            });
            let Some(c) = entering else {
                return true;
            };
            let mut leaving: Option<(usize, Rational)> = None;
            for i in 0..self.rows.len() {
                let a = &self.rows[i][c];
                if !a.is_positive() {
                    continue;
                }
                let ratio = self.rhs(i) / a;
                let better = match &leaving {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && self.basis[i] < self.basis[*li]),
                };
                if better {
                    leaving = Some((i, ratio));
                }
            }
            match leaving {
                Some((r, _)) => self.pivot(r, c),
                None => return false,
            }
        }
    }
}

pub fn solve_lp(lp: &LinearProgram) -> Result<LpOutcome> {
    lp.validate()?;

    // Column layout: structural columns (free variables split into +/-),
    // then one slack per inequality, then one artificial per row.
    let mut structural: Vec<(usize, bool)> = Vec::new(); // (variable, negated)
    for (i, v) in lp.variables.iter().enumerate() {
        structural.push((i, false));
        if !v.nonnegative {
            structural.push((i, true));
        }
    }
    let n_struct = structural.len();
    let n_slack = lp
        .constraints
        .iter()
        .filter(|c| c.relation != Relation::Eq)
        .count();
    let m = lp.constraints.len();
    let first_art = n_struct + n_slack;
    let cols = first_art + m;

    let mut rows = Vec::with_capacity(m);
    let mut slack = n_struct;
    for c in &lp.constraints {
        let mut row = vec![zero(); cols + 1];
        for (k, &(v, neg)) in structural.iter().enumerate() {
            row[k] = if neg {
                -c.coefficients[v].clone()
            } else {
                c.coefficients[v].clone()
            };
        }
        match c.relation {
            Relation::Le => {
                row[slack] = one();
                slack += 1;
            }
            Relation::Ge => {
                row[slack] = -one();
                slack += 1;
            }
            Relation::Eq => {}
        }
        row[cols] = c.bound.clone();
        if c.bound.is_negative() {
            for v in row.iter_mut() {
                *v = -v.clone();
            }
        }
        rows.push(row);
    }
    for (i, row) in rows.iter_mut().enumerate() {
        row[first_art + i] = one();
    }
    let mut t = Tableau {
        rows,
        basis: (first_art..cols).collect(),
        cols,
    };

    // Phase one: maximize -(sum of artificials).
    let mut phase1 = vec![zero(); cols];
    for c in phase1.iter_mut().skip(first_art) {
        *c = -one();
    }
    t.optimize(&phase1, &|_| true);
    let residual: Rational = t
        .basis
        .iter()
        .enumerate()
        .filter(|(_, &b)| b >= first_art)
        .map(|(i, _)| t.rhs(i).clone())
        .sum();
    if residual.is_positive() {
        return Ok(LpOutcome::Infeasible { residual });
    }

    // Drive zero-valued artificials out of the basis; drop redundant rows.
    let mut i = 0;
    while i < t.rows.len() {
        if t.basis[i] >= first_art {
            match (0..first_art).find(|&j| !t.rows[i][j].is_zero()) {
                Some(j) => t.pivot(i, j),
                None => {
                    t.rows.remove(i);
                    t.basis.remove(i);
                    continue;
                }
            }
        }
        i += 1;
    }

    let mut cost = vec![zero(); cols];
    for (k, &(v, neg)) in structural.iter().enumerate() {
        cost[k] = if neg {
            -lp.objective[v].clone()
        } else {
            lp.objective[v].clone()
        };
    }
    if !t.optimize(&cost, &|j| j < first_art) {
        return Ok(LpOutcome::Unbounded);
    }

    let mut column_value = vec![zero(); cols];
    for (i, &b) in t.basis.iter().enumerate() {
        column_value[b] = t.rhs(i).clone();
    }
    let mut assignment = vec![zero(); lp.variables.len()];
    for (k, &(v, neg)) in structural.iter().enumerate() {
        if neg {
            assignment[v] -= &column_value[k];
        } else {
            assignment[v] += &column_value[k];
        }
    }
    let value = lp.objective_value(&assignment);
    Ok(LpOutcome::Optimal { assignment, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn single(bound: i64) -> LinearProgram {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", false);
        lp.set_objective(x, one());
        lp.add_constraint([(x, one())], Relation::Le, int(bound));
        lp.add_constraint([(x, one())], Relation::Ge, zero());
        lp
    }

    #[test]
    fn trivial_bounds() {
        assert_eq!(
            solve_lp(&single(1)).unwrap(),
            LpOutcome::Optimal {
                assignment: vec![one()],
                value: one()
            }
        );
        assert!(matches!(
            solve_lp(&single(-1)).unwrap(),
            LpOutcome::Infeasible { .. }
        ));
    }

    #[test]
    fn unbounded_and_free_variables() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", true);
        lp.set_objective(x, one());
        lp.add_constraint([(x, one())], Relation::Ge, int(2));
        assert_eq!(solve_lp(&lp).unwrap(), LpOutcome::Unbounded);

        // maximize -x with x free and x >= -3  ->  x = -3
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", false);
        lp.set_objective(x, int(-1));
        lp.add_constraint([(x, one())], Relation::Ge, int(-3));
        match solve_lp(&lp).unwrap() {
            LpOutcome::Optimal { assignment, value } => {
                assert_eq!(assignment, vec![int(-3)]);
                assert_eq!(value, int(3));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn textbook_problem() {
        // max 3x + 5y  s.t.  x <= 4, 2y <= 12, 3x + 2y <= 18  ->  (2, 6), 36
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", true);
        let y = lp.add_variable("y", true);
        lp.set_objective(x, int(3));
        lp.set_objective(y, int(5));
        lp.add_constraint([(x, one())], Relation::Le, int(4));
        lp.add_constraint([(y, int(2))], Relation::Le, int(12));
        lp.add_constraint([(x, int(3)), (y, int(2))], Relation::Le, int(18));
        let out = solve_lp(&lp).unwrap();
        assert_eq!(
            out,
            LpOutcome::Optimal {
                assignment: vec![int(2), int(6)],
                value: int(36)
            }
        );
    }

    #[test]
    fn redundant_equalities() {
        let mut lp = LinearProgram::new();
        let x = lp.add_variable("x", true);
        let y = lp.add_variable("y", true);
        lp.set_objective(y, one());
        lp.add_constraint([(x, one()), (y, one())], Relation::Eq, one());
        lp.add_constraint([(x, int(2)), (y, int(2))], Relation::Eq, int(2));
        lp.add_constraint([(x, one())], Relation::Ge, rat(1, 3));
        match solve_lp(&lp).unwrap() {
            LpOutcome::Optimal { assignment, value } => {
                assert_eq!(value, rat(2, 3));
                assert!(lp.is_feasible_point(&assignment));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn degenerate_cycling_example() {
        // Beale's example cycles under the textbook rule; Bland's rule terminates.
        let mut lp = LinearProgram::new();
        let v: Vec<usize> = (0..4).map(|i| lp.add_variable(format!("x{i}"), true)).collect();
        for (i, c) in [rat(3, 4), int(-150), rat(1, 50), int(-6)].into_iter().enumerate() {
            lp.set_objective(v[i], c);
        }
        lp.add_constraint(
            [(v[0], rat(1, 4)), (v[1], int(-60)), (v[2], rat(-1, 25)), (v[3], int(9))],
            Relation::Le,
            zero(),
        );
        lp.add_constraint(
            [(v[0], rat(1, 2)), (v[1], int(-90)), (v[2], rat(-1, 50)), (v[3], int(3))],
            Relation::Le,
            zero(),
        );
        lp.add_constraint([(v[2], one())], Relation::Le, one());
        match solve_lp(&lp).unwrap() {
            LpOutcome::Optimal { value, .. } => assert_eq!(value, rat(1, 20)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed() {
        let mut lp = single(1);
        lp.constraints[0].coefficients.push(one());
        assert!(matches!(solve_lp(&lp), Err(Error::MalformedLp(_))));
        assert!(matches!(
            solve_lp(&LinearProgram::new()),
            Err(Error::MalformedLp(_))
        ));
        let mut lp = single(1);
        lp.add_variable("x", true);
        assert!(matches!(solve_lp(&lp), Err(Error::MalformedLp(_))));
    }
}
