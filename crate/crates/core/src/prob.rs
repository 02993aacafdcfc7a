//! Finite joint distributions with exact rational mass.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::rational::{one, to_f64, zero, Rational};

/// Ordered, non-empty list of distinct symbol labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet(Vec<String>);

impl Alphabet {
    pub fn new<S: Into<String>>(symbols: impl IntoIterator<Item = S>) -> Result<Self> {
        let symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(Error::InvalidAlphabet("alphabet is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &symbols {
            if s.is_empty() || s.chars().any(char::is_whitespace) {
                return Err(Error::InvalidAlphabet(format!("bad label `{s}`")));
            }
            if !seen.insert(s.as_str()) {
                return Err(Error::InvalidAlphabet(format!("duplicate label `{s}`")));
            }
        }
        Ok(Alphabet(symbols))
    }

    /// `{"0", "1", ..., "n-1"}`.
    pub fn indexed(n: usize) -> Self {
        assert!(n > 0, "alphabet must be non-empty");
        Alphabet((0..n).map(|i| i.to_string()).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn symbols(&self) -> &[String] {
        &self.0
    }

    pub fn symbol(&self, i: usize) -> &str {
        &self.0[i]
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.0.iter().position(|s| s == symbol)
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalPMF {
    alphabet: Alphabet,
    mass: Vec<Rational>,
}

impl MarginalPMF {
    pub fn new(alphabet: Alphabet, mass: Vec<Rational>) -> Result<Self> {
        if mass.len() != alphabet.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} masses for {} symbols",
                mass.len(),
                alphabet.len()
            )));
        }
        if let Some((i, m)) = mass.iter().enumerate().find(|(_, m)| m.is_negative()) {
            return Err(Error::NegativeMass {
                row: i,
                col: 0,
                value: m.clone(),
            });
        }
        let total: Rational = mass.iter().sum();
        if total != one() {
            return Err(Error::MassNotOne(total));
        }
        Ok(MarginalPMF { alphabet, mass })
    }

    /// Point mass on symbol index `i`.
    pub fn delta(alphabet: Alphabet, i: usize) -> Self {
        let mut mass = vec![zero(); alphabet.len()];
        mass[i] = one();
        MarginalPMF { alphabet, mass }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn mass(&self) -> &[Rational] {
        &self.mass
    }

    pub fn get(&self, i: usize) -> &Rational {
        &self.mass[i]
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.mass.len()).filter(|&i| self.mass[i].is_positive())
    }

    pub fn entropy(&self) -> f64 {
        entropy_bits(self.mass.iter().map(to_f64))
    }
}

impl fmt::Display for MarginalPMF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cells: Vec<String> = self
            .alphabet
            .symbols()
            .iter()
            .zip(&self.mass)
            .map(|(s, m)| format!("{s}:{m}"))
            .collect();
        write!(f, "({})", cells.join(", "))
    }
}

/// Exact joint distribution over `X x Y`. Rows index `X`, columns index `Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPMF {
    alphabet_x: Alphabet,
    alphabet_y: Alphabet,
    mass: Vec<Vec<Rational>>,
}

pub fn make_joint(
    alphabet_x: Alphabet,
    alphabet_y: Alphabet,
    entries: Vec<Vec<Rational>>,
) -> Result<JointPMF> {
    JointPMF::new(alphabet_x, alphabet_y, entries)
}

impl JointPMF {
    pub fn new(
        alphabet_x: Alphabet,
        alphabet_y: Alphabet,
        mass: Vec<Vec<Rational>>,
    ) -> Result<Self> {
        if mass.len() != alphabet_x.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows for {} X symbols",
                mass.len(),
                alphabet_x.len()
            )));
        }
        for (i, row) in mass.iter().enumerate() {
            if row.len() != alphabet_y.len() {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} entries for {} Y symbols",
                    row.len(),
                    alphabet_y.len()
                )));
            }
        }
        for (i, row) in mass.iter().enumerate() {
            for (j, m) in row.iter().enumerate() {
                if m.is_negative() {
                    return Err(Error::NegativeMass {
                        row: i,
                        col: j,
                        value: m.clone(),
                    });
                }
            }
        }
        let total: Rational = mass.iter().flatten().sum();
        if total != one() {
            return Err(Error::MassNotOne(total));
        }
        Ok(JointPMF {
            alphabet_x,
            alphabet_y,
            mass,
        })
    }

    /// Independent coupling `P_X P_Y`.
    pub fn product(px: &MarginalPMF, py: &MarginalPMF) -> Self {
        let mass = px
            .mass
            .iter()
            .map(|a| py.mass.iter().map(|b| a * b).collect())
            .collect();
        JointPMF {
            alphabet_x: px.alphabet.clone(),
            alphabet_y: py.alphabet.clone(),
            mass,
        }
    }

    /// Builds a joint from labelled cells; every label must be in the given
    /// alphabets.
    pub fn from_cells(
        alphabet_x: Alphabet,
        alphabet_y: Alphabet,
        cells: &BTreeMap<(String, String), Rational>,
    ) -> Result<Self> {
        let mut mass = vec![vec![zero(); alphabet_y.len()]; alphabet_x.len()];
        for ((x, y), p) in cells {
            let i = alphabet_x
                .index_of(x)
                .ok_or_else(|| Error::AlphabetMismatch(format!("`{x}` not in X alphabet")))?;
            let j = alphabet_y
                .index_of(y)
                .ok_or_else(|| Error::AlphabetMismatch(format!("`{y}` not in Y alphabet")))?;
            mass[i][j] += p;
        }
        JointPMF::new(alphabet_x, alphabet_y, mass)
    }

    /// Builds a joint whose alphabets are exactly the labels that occur,
    /// sorted.
    pub fn from_observed(cells: &BTreeMap<(String, String), Rational>) -> Result<Self> {
        let xs: BTreeSet<&String> = cells.keys().map(|(x, _)| x).collect();
        let ys: BTreeSet<&String> = cells.keys().map(|(_, y)| y).collect();
        let ax = Alphabet::new(xs.into_iter().cloned())?;
        let ay = Alphabet::new(ys.into_iter().cloned())?;
        JointPMF::from_cells(ax, ay, cells)
    }

    pub fn alphabet_x(&self) -> &Alphabet {
        &self.alphabet_x
    }

    pub fn alphabet_y(&self) -> &Alphabet {
        &self.alphabet_y
    }

    pub fn mass(&self) -> &[Vec<Rational>] {
        &self.mass
    }

    pub fn get(&self, x: usize, y: usize) -> &Rational {
        &self.mass[x][y]
    }

    pub fn rows(&self) -> usize {
        self.mass.len()
    }

    pub fn cols(&self) -> usize {
        self.alphabet_y.len()
    }

    /// Supported cells in row-major order.
    pub fn support(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.rows())
            .flat_map(move |x| (0..self.cols()).map(move |y| (x, y)))
            .filter(move |&(x, y)| self.mass[x][y].is_positive())
    }

    pub fn row_sums(&self) -> Vec<Rational> {
        self.mass.iter().map(|row| row.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<Rational> {
        (0..self.cols())
            .map(|y| self.mass.iter().map(|row| &row[y]).sum())
            .collect()
    }

    /// Labelled cells with positive mass.
    pub fn cells(&self) -> BTreeMap<(String, String), Rational> {
        self.support()
            .map(|(x, y)| {
                (
                    (
                        self.alphabet_x.symbol(x).to_string(),
                        self.alphabet_y.symbol(y).to_string(),
                    ),
                    self.mass[x][y].clone(),
                )
            })
            .collect()
    }

    pub fn transpose(&self) -> JointPMF {
        let mass = (0..self.cols())
            .map(|y| self.mass.iter().map(|row| row[y].clone()).collect())
            .collect();
        JointPMF {
            alphabet_x: self.alphabet_y.clone(),
            alphabet_y: self.alphabet_x.clone(),
            mass,
        }
    }

    pub fn joint_entropy(&self) -> f64 {
        entropy_bits(self.mass.iter().flatten().map(to_f64))
    }

    /// `H(Y | X)` in bits.
    pub fn conditional_entropy_y_given_x(&self) -> f64 {
        let (px, _) = marginals(self);
        self.joint_entropy() - px.entropy()
    }
}

impl fmt::Display for JointPMF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "      {}", self.alphabet_y)?;
        for (x, row) in self.alphabet_x.symbols().iter().zip(&self.mass) {
            let cells: Vec<String> = row.iter().map(ToString::to_string).collect();
            writeln!(f, "{x:>5} {}", cells.join(" "))?;
        }
        Ok(())
    }
}

pub fn marginals(p: &JointPMF) -> (MarginalPMF, MarginalPMF) {
    (
        MarginalPMF {
            alphabet: p.alphabet_x.clone(),
            mass: p.row_sums(),
        },
        MarginalPMF {
            alphabet: p.alphabet_y.clone(),
            mass: p.col_sums(),
        },
    )
}

pub fn is_product(p: &JointPMF) -> bool {
    let rows = p.row_sums();
    let cols = p.col_sums();
    (0..p.rows()).all(|x| (0..p.cols()).all(|y| p.mass[x][y] == &rows[x] * &cols[y]))
}

/// Shannon mutual information `I(X;Y)` in bits.
pub fn mutual_information(p: &JointPMF) -> f64 {
    let rows = p.row_sums();
    let cols = p.col_sums();
    let mut mi = 0.0;
    for (x, y) in p.support() {
        let pxy = to_f64(&p.mass[x][y]);
        let ratio = to_f64(&(&p.mass[x][y] / (&rows[x] * &cols[y])));
        mi += pxy * ratio.log2();
    }
    mi.max(0.0)
}

/// Entropy in bits with the `0 log 0 = 0` convention.
pub fn entropy_bits(probs: impl IntoIterator<Item = f64>) -> f64 {
    probs
        .into_iter()
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

/// Total variation distance between two labelled distributions; labels
/// missing from one side count as zero mass there.
pub fn total_variation<K: Ord + Clone>(
    a: &BTreeMap<K, Rational>,
    b: &BTreeMap<K, Rational>,
) -> Rational {
    let keys: BTreeSet<&K> = a.keys().chain(b.keys()).collect();
    let z = zero();
    let l1: Rational = keys
        .into_iter()
        .map(|k| (a.get(k).unwrap_or(&z) - b.get(k).unwrap_or(&z)).abs())
        .sum();
    l1 / Rational::from_integer(2.into())
}

/// Drops zero entries so that labelled distributions compare structurally.
pub fn prune<K: Ord>(mut d: BTreeMap<K, Rational>) -> BTreeMap<K, Rational> {
    d.retain(|_, v| !v.is_zero());
    d
}
