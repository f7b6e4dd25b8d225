//! Grid-world pursuit-evasion engine.
//!
//! Pursuers form coalitions around groups of evaders. Evaders are grouped by
//! clustering their membership vectors, and pursuers move by tabular
//! Q-learning over a Gaussian reward field centred on their group.

pub mod clustering;
pub mod coalition;
pub mod error;
pub mod experiment;
pub mod grid_world;
pub mod learning;
pub mod membership;
pub mod rng;

pub use error::{PursuitError, Result};
pub use grid_world::{Action, AgentId, EvaderState, GridConfig, Position, PursuerState, WorldState};
