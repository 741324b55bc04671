//! Simulation and analysis of metastable transition layers for
//! `u_t = Q(ε² u_x)_x − F'(u)` on an interval with zero-flux boundaries.

pub mod diagnostics;
pub mod energy;
pub mod error;
pub mod flux;
pub mod grid;
pub mod potentials;
pub mod profiles;
pub mod quadrature;
pub mod runner;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use flux::FluxModel;
pub use grid::{Field, Grid1D};
pub use potentials::PotentialSpec;
pub use profiles::{LayerPattern, ProfileTable};
