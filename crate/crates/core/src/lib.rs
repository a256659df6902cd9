//! Ensemble-based component runtime with supervised value estimates,
//! assignment heuristics and a smart-factory access-control simulation.

pub mod estimates;
pub mod experiment;
pub mod factory;
pub mod heuristics;
pub mod model;
pub mod oracle;
