//! Simultaneous task allocation and planning (STAP) for heterogeneous robot
//! teams under one global finite-LTL mission.
//!
//! The pipeline: a mission formula is translated into a progression
//! automaton ([`ltl`]); each robot's world model is a transition system that
//! is composed with the automaton into a product ([`models`]); the products
//! are chained into a team automaton and searched once for an allocation
//! ([`team`]). At run time, disturbances are repaired by local or global
//! reallocation ([`realloc`]), chosen by a per-robot behavior tree ([`bt`])
//! inside a deterministic tick-driven simulator ([`sim`]).

pub mod bt;
pub mod ltl;
pub mod models;
pub mod realloc;
pub mod sim;
pub mod team;
