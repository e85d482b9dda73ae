//! Equilibrium analysis and prize design for crowdsearch contests.
//!
//! `n` agents with private search costs drawn from a common distribution
//! decide whether to search for an object; each searcher finds it
//! independently with probability `q` and the prize goes to a uniformly
//! chosen finder. The crate computes the threshold equilibrium, its
//! large-crowd limits, the principal's optimal prize, and the expert,
//! multi-prize and heterogeneous-ability variants. A seeded Monte Carlo
//! simulator of the underlying game serves as an independent check.

pub mod asymptotics;
pub mod distributions;
pub mod equilibrium;
pub mod error;
pub mod expert;
pub mod hetero;
pub mod montecarlo;
pub mod multiprize;
pub mod numeric;
pub mod principal;

pub use distributions::{CostDistribution, DistributionSpec};
pub use equilibrium::{ContestConfig, EquilibriumResult};
pub use error::{Error, Result};
