//! Deterministic round-synchronous CONGEST laboratory: graph primitives,
//! a message-accounting simulator, expander decomposition machinery,
//! skip-stream execution, partition trees, and clique listing, all checked
//! against brute-force oracles.

pub mod conductance;
pub mod expander;
pub mod gen;
pub mod graph;
pub mod harness;
pub mod listing;
pub mod ptree;
pub mod rational;
pub mod routing;
pub mod sim;
pub mod skipstream;
