//! Ergodic decomposition of a joint distribution and the feasibility
//! classifier for secure sampling.
//!
//! The decomposition labels the connected components of the bipartite
//! support graph (an edge joins `x` and `y` whenever `P(x, y) > 0`). The
//! label `W` is then a deterministic function of `X` alone and of `Y` alone.
//! A distribution is *separable* when `X - W - Y` is a Markov chain, which is
//! exactly the case where mutual information equals Wyner's common
//! information.

use std::fmt;

use num_traits::Signed;

use crate::prob::{is_product, JointPMF};
use crate::rational::{zero, Rational};

struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, v: usize) -> usize {
        let mut root = v;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut v = v;
        while self.parent[v] != root {
            let next = self.parent[v];
            self.parent[v] = root;
            v = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicDecomposition {
    component_of_x: Vec<Option<usize>>,
    component_of_y: Vec<Option<usize>>,
    component_mass: Vec<Rational>,
}

impl ErgodicDecomposition {
    /// Component label of row symbol `x`; `None` for zero-mass symbols.
    pub fn component_of_x(&self, x: usize) -> Option<usize> {
        self.component_of_x[x]
    }

    pub fn component_of_y(&self, y: usize) -> Option<usize> {
        self.component_of_y[y]
    }

    pub fn component_mass(&self, w: usize) -> &Rational {
        &self.component_mass[w]
    }

    pub fn masses(&self) -> &[Rational] {
        &self.component_mass
    }

    /// Labels `0..n`, ordered by the smallest row index in each component.
    pub fn labels(&self) -> std::ops::Range<usize> {
        0..self.component_mass.len()
    }

    pub fn len(&self) -> usize {
        self.component_mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.component_mass.is_empty()
    }

    pub fn xs_in(&self, w: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.component_of_x.len()).filter(move |&x| self.component_of_x[x] == Some(w))
    }

    pub fn ys_in(&self, w: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.component_of_y.len()).filter(move |&y| self.component_of_y[y] == Some(w))
    }

    /// Entropy of `W` in bits.
    pub fn entropy(&self) -> f64 {
        crate::prob::entropy_bits(self.component_mass.iter().map(crate::rational::to_f64))
    }
}

pub fn ergodic_decomposition(p: &JointPMF) -> ErgodicDecomposition {
    let (rows, cols) = (p.rows(), p.cols());
    // Nodes 0..rows are X symbols, rows..rows+cols are Y symbols.
    let mut dsu = DisjointSet::new(rows + cols);
    for (x, y) in p.support() {
        dsu.union(x, rows + y);
    }
    let row_sums = p.row_sums();
    let col_sums = p.col_sums();

    let mut root_label: Vec<Option<usize>> = vec![None; rows + cols];
    let mut component_mass: Vec<Rational> = Vec::new();
    let mut component_of_x = vec![None; rows];
    for x in 0..rows {
        if !row_sums[x].is_positive() {
            continue;
        }
        let root = dsu.find(x);
        let w = *root_label[root].get_or_insert_with(|| {
            component_mass.push(zero());
            component_mass.len() - 1
        });
        component_of_x[x] = Some(w);
        component_mass[w] += &row_sums[x];
    }
    let component_of_y = (0..cols)
        .map(|y| {
            if col_sums[y].is_positive() {
                root_label[dsu.find(rows + y)]
            } else {
                None
            }
        })
        .collect();

    ErgodicDecomposition {
        component_of_x,
        component_of_y,
        component_mass,
    }
}

/// Exact test of `X - W - Y` for the ergodic decomposition `W`.
pub fn is_separable(p: &JointPMF) -> bool {
    let dec = ergodic_decomposition(p);
    let rows = p.row_sums();
    let cols = p.col_sums();
    dec.labels().all(|w| {
        let m = dec.component_mass(w);
        dec.xs_in(w).all(|x| {
            dec.ys_in(w)
                .all(|y| p.get(x, y) * m == &rows[x] * &cols[y])
        })
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    CheapTalk,
    PoliteTalk,
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::CheapTalk => "cheap-talk",
            Channel::PoliteTalk => "polite-talk",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AdversaryModel {
    SemiHonest,
    Malicious,
}

impl fmt::Display for AdversaryModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdversaryModel::SemiHonest => "semi-honest",
            AdversaryModel::Malicious => "malicious",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityReason {
    Independent,
    Separable,
    NotSeparable,
    Dependent,
}

impl fmt::Display for FeasibilityReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeasibilityReason::Independent => "independent",
            FeasibilityReason::Separable => "separable",
            FeasibilityReason::NotSeparable => "not separable",
            FeasibilityReason::Dependent => "not independent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeasibilityVerdict {
    pub channel: Channel,
    pub adversary: AdversaryModel,
    pub feasible: bool,
    pub reason: FeasibilityReason,
}

impl fmt::Display for FeasibilityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let word = if self.feasible { "feasible" } else { "infeasible" };
        write!(f, "{word} ({})", self.reason)
    }
}

/// Semi-honest parties (either channel) and malicious parties over cheap
/// talk need separability; malicious parties restricted to polite talk need
/// independence.
pub fn classify(p: &JointPMF, channel: Channel, adversary: AdversaryModel) -> FeasibilityVerdict {
    let (feasible, reason) = match (channel, adversary) {
        (Channel::PoliteTalk, AdversaryModel::Malicious) => {
            if is_product(p) {
                (true, FeasibilityReason::Independent)
            } else {
                (false, FeasibilityReason::Dependent)
            }
        }
        _ => {
            if is_separable(p) {
                (true, FeasibilityReason::Separable)
            } else {
                (false, FeasibilityReason::NotSeparable)
            }
        }
    };
    FeasibilityVerdict {
        channel,
        adversary,
        feasible,
        reason,
    }
}
