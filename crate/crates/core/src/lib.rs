//! credo: a logical-consistency engine for stores of factual beliefs.
//!
//! Propositional constraints over fact variables are compiled into
//! decision-diagram circuits supporting exact weighted model counting
//! and gradients; the semantic loss built on those counts trains a
//! desk-scale belief model toward logical consistency; and a metric
//! suite scores factuality, implication/negation (self-)consistency,
//! entailment-tree consistency, and an exact MaxSAT repair baseline.

pub mod beliefs;
pub mod circuit;
pub mod cli;
pub mod consistency;
pub mod kb;
pub mod logic;
pub mod objective;
pub mod trainer;
