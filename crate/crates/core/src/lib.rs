//! Modeling, simulation and translation toolkit for continuous, hybrid and
//! D-elementary hybrid Petri nets.
//!
//! - [`net`]: net model, text format, structural validation, incidence matrix.
//! - [`ccpn`]: constant-speed continuous nets (macro-markings, evolution graphs).
//! - [`vcpn`]: variable-speed continuous nets, integrated numerically.
//! - [`hybrid`]: hybrid and D-elementary nets with discrete firing policies.
//! - [`ha`]: hybrid automata, translation of D-elementary nets, and an automaton
//!   simulator used to cross-check translations.

pub mod ccpn;
pub mod ha;
pub mod hybrid;
pub mod net;
pub mod rational;
pub mod trajectory;
pub mod vcpn;

pub use net::{parse_model, serialize_model, validate_structure, HybridNet, Marking, NetClass};
pub use rational::Rational;
pub use trajectory::Trajectory;
