//! Congestion and load-balancing games: latency functions, approximate
//! equilibria, one-round walks, analytic efficiency bounds and generators
//! for the worst-case instance families that make those bounds tight.
//!
//! The crate is organised bottom-up:
//!
//! - [`latency`]: latency functions (polynomial or registered custom) with
//!   integral, marginal and semi-convexity primitives;
//! - [`game`]: the game model, strategy profiles and cost functions;
//! - [`dynamics`]: equilibrium checks, one-round walks and brute force;
//! - [`bounds`]: the β/γ bound machinery, closed forms and witnesses;
//! - [`generators`]: lower-bound instance families;
//! - [`tables`]: reproduction of the reference tables of bound values.

pub mod bounds;
pub mod caps;
pub mod dynamics;
pub mod error;
pub mod game;
pub mod generators;
pub mod latency;
pub mod numeric;
pub mod tables;

pub use error::{Error, Result};
pub use game::{CongestionGame, GameFlags, Player, Resource, StrategyProfile};
pub use latency::LatencyFunction;
