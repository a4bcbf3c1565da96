//! Symbolic verification of Lorentzian concircular structures, their
//! quarter-symmetric metric connections, and invariant submanifolds.

pub mod cli;
pub mod connection;
pub mod expr;
pub mod lcs;
pub mod manifold;
pub mod report;
pub mod submanifold;
