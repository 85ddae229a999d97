//! Runtime monitoring of temporal expectations over a discrete Event
//! Calculus, with a flood-plain settlement scenario built on top.

pub mod check;
pub mod cli;
pub mod engine;
pub mod formula;
pub mod game;
pub mod monitor;
pub mod scenario;
pub mod syntax;
pub mod term;
