//! Canonical distributions and games used by the examples, the acceptance
//! suite, and the CLI's built-in names.

use crate::game::Game;
use crate::prob::{Alphabet, JointPMF};
use crate::rational::{int, one, rat, zero, Rational};

fn joint(x: &[&str], y: &[&str], mass: Vec<Vec<Rational>>) -> JointPMF {
    JointPMF::new(
        Alphabet::new(x.iter().copied()).unwrap(),
        Alphabet::new(y.iter().copied()).unwrap(),
        mass,
    )
    .expect("fixture is a valid distribution")
}

fn ints(rows: &[&[i64]]) -> Vec<Vec<Rational>> {
    rows.iter().map(|r| r.iter().map(|&v| int(v)).collect()).collect()
}

/// Perfectly correlated unbiased bit: `1/2` on `(0,0)` and `(1,1)`.
pub fn coin() -> JointPMF {
    joint(
        &["0", "1"],
        &["0", "1"],
        vec![vec![rat(1, 2), zero()], vec![zero(), rat(1, 2)]],
    )
}

pub fn uniform_product() -> JointPMF {
    let q = rat(1, 4);
    joint(&["0", "1"], &["0", "1"], vec![vec![q.clone(); 2], vec![q; 2]])
}

/// Uniform on `{(0,0), (0,1), (1,1)}`: one component, dependent.
pub fn triangle() -> JointPMF {
    let t = rat(1, 3);
    joint(
        &["0", "1"],
        &["0", "1"],
        vec![vec![t.clone(), t.clone()], vec![zero(), t]],
    )
}

/// `1/8` on each of `{a1,a2} x {b1,b2}` and `1/2` on `(a3,b3)`.
pub fn block() -> JointPMF {
    let e = rat(1, 8);
    joint(
        &["a1", "a2", "a3"],
        &["b1", "b2", "b3"],
        vec![
            vec![e.clone(), e.clone(), zero()],
            vec![e.clone(), e, zero()],
            vec![zero(), zero(), rat(1, 2)],
        ],
    )
}

pub fn battle_of_sexes() -> Game {
    let a = Alphabet::new(["M", "O"]).unwrap();
    Game::new(a.clone(), a, ints(&[&[2, 0], &[0, 1]]), ints(&[&[1, 0], &[0, 2]])).unwrap()
}

pub fn chicken_or_dare() -> Game {
    let a = Alphabet::new(["C", "D"]).unwrap();
    Game::new(a.clone(), a, ints(&[&[4, 1], &[5, 0]]), ints(&[&[4, 5], &[1, 0]])).unwrap()
}

/// 2x2 game over `{0, 1}` paying `(1, 1)` everywhere.
pub fn constant_game() -> Game {
    Game::constant(Alphabet::indexed(2), Alphabet::indexed(2), one(), one())
}

/// `lambda` on `(M,M)` and `1 - lambda` on `(O,O)`.
pub fn bos_diagonal(lambda: Rational) -> JointPMF {
    let rest = one() - &lambda;
    joint(
        &["M", "O"],
        &["M", "O"],
        vec![vec![lambda, zero()], vec![zero(), rest]],
    )
}

/// Uniform on `{(C,C), (C,D), (D,C)}`.
pub fn cod_ce() -> JointPMF {
    let t = rat(1, 3);
    joint(
        &["C", "D"],
        &["C", "D"],
        vec![vec![t.clone(), t.clone()], vec![t, zero()]],
    )
}

/// Half on each pure equilibrium `(C,D)` and `(D,C)`; separable.
pub fn cod_alternating() -> JointPMF {
    joint(
        &["C", "D"],
        &["C", "D"],
        vec![vec![zero(), rat(1, 2)], vec![rat(1, 2), zero()]],
    )
}

pub const DIST_NAMES: &[&str] = &[
    "coin",
    "uniform-product",
    "triangle",
    "block",
    "bos-diag",
    "cod-ce",
    "cod-alternating",
];

pub const GAME_NAMES: &[&str] = &["bos", "cod", "constant"];

pub fn dist_by_name(name: &str) -> Option<JointPMF> {
    Some(match name {
        "coin" => coin(),
        "uniform-product" => uniform_product(),
        "triangle" => triangle(),
        "block" => block(),
        "bos-diag" => bos_diagonal(rat(1, 2)),
        "cod-ce" => cod_ce(),
        "cod-alternating" => cod_alternating(),
        _ => return None,
    })
}

pub fn game_by_name(name: &str) -> Option<Game> {
    Some(match name {
        "bos" => battle_of_sexes(),
        "cod" => chicken_or_dare(),
        "constant" => constant_game(),
        _ => return None,
    })
}
