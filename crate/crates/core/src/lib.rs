//! Instruction-driven layout optimization for 3D widget interfaces.
//!
//! An instruction is checked for ambiguity, turned into a parameterized
//! optimization spec, solved with constrained NSGA-III, reduced to a few
//! candidates and ranked by a validator.

pub mod agents;
pub mod config;
pub mod moo;
pub mod objectives;
pub mod pipeline;
pub mod scene;

