//! Design-space models for phase-change-material photonic memory: material
//! data, a finite-difference mode solver, cell figures of merit, transient
//! heating, array budgets and sweep/Pareto tooling.

pub mod array;
pub mod cell;
pub mod dse;
pub mod error;
pub mod linalg;
pub mod materials;
pub mod modesolver;
pub mod thermal;

pub use error::{Error, Result};
