//! Exact simulation and verification of two-party sampling protocols that
//! stand in for a trusted mediator in two-player games.
//!
//! The crate covers:
//!
//! - exact finite probability ([`prob`]) and the ergodic decomposition with
//!   the feasibility classifier ([`common_info`]);
//! - two-player games, Nash and correlated equilibria, and an exact simplex
//!   solver ([`game`], [`lp`]);
//! - an interactive protocol engine with cheap-talk and polite-talk channels
//!   that enumerates executions exactly ([`engine`]);
//! - concrete protocols and adversaries ([`protocols`]);
//! - checkers for correctness, semi-honest, malicious and rational security
//!   ([`security`]);
//! - a small text format for games and distributions ([`specfile`]).

pub mod common_info;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod game;
pub mod lp;
pub mod prob;
pub mod protocols;
pub mod rational;
pub mod security;
pub mod specfile;

pub use error::{Error, Result};
pub use rational::Rational;
