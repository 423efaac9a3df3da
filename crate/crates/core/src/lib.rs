//! Partial-order causal-link planning with configurable flaw selection.
//!
//! A [`task::Task`] pairs a parsed [`domain::Domain`] with a
//! [`domain::Problem`]. [`search::plan`] runs best-first search over
//! [`plan::PartialPlan`]s, repairing one flaw per expansion as chosen by a
//! [`strategy::Strategy`]. [`bench`] runs strategy/problem matrices and
//! computes %-overrun tables.

pub mod bench;
pub mod bundled;
pub mod domain;
pub mod flaw;
pub mod ordering;
pub mod plan;
pub mod search;
pub mod sexpr;
pub mod strategy;
pub mod symbol;
pub mod task;
pub mod term;

pub use search::{plan, plan_observed, RankWeights, SearchConfig, SearchOutcome, Status};
pub use strategy::Strategy;
pub use task::Task;
