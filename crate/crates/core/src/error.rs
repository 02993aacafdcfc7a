use thiserror::Error;

use crate::rational::Rational;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("negative mass {value} at cell ({row}, {col})")]
    NegativeMass {
        row: usize,
        col: usize,
        value: Rational,
    },
    #[error("probability mass sums to {0}, expected exactly 1")]
    MassNotOne(Rational),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid alphabet: {0}")]
    InvalidAlphabet(String),
    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("game is not 2x2")]
    NotTwoByTwo,
    #[error("degenerate game: a continuum of Nash equilibria exists")]
    DegenerateGame,
    #[error("strategy profile {0} is not a Nash equilibrium")]
    NotNash(usize),
    #[error("bad mixing weights: {0}")]
    BadWeights(String),
    #[error("malformed linear program: {0}")]
    MalformedLp(String),

    #[error("party `{party}` does not support {mode} channels")]
    ModeError { party: String, mode: String },
    #[error("execution exceeded {0} steps without terminating")]
    NonTermination(usize),
    #[error("execution tree exceeded node budget of {0}")]
    StateExplosion(usize),
    #[error("invalid randomness request: {0}")]
    InvalidRandomness(String),

    #[error("distribution is not separable")]
    NotSeparable,
    #[error("partition class {0} has zero mass")]
    EmptyPartitionClass(u8),
    #[error("unknown adversary kind `{0}`")]
    UnknownKind(String),
    #[error("target distribution is not a correlated equilibrium of the game")]
    NotCorrelatedEq,
    #[error("deviating strategy `{strategy}` produced output `{output}` outside the action alphabet")]
    OutputOutsideAlphabet { strategy: String, output: String },

    #[error("execution tree has nonzero tail mass {0}; exact check impossible")]
    TailMassNonzero(Rational),
    #[error("honest output marginal differs from target at `{symbol}`: expected {expected}, got {got}")]
    MarginalMismatch {
        symbol: String,
        expected: Rational,
        got: Rational,
    },
    #[error("implication violated for fixture `{fixture}`: {detail}")]
    ImplicationViolated { fixture: String, detail: String },

    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error: {0}")]
    Validation(String),
}
