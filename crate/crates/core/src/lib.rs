//! Exact diagonalization of paired lattice fermions in classical U(1) gauge
//! fields, with checks of the π-flux optimality statements.

pub mod anneal;
pub mod config;
pub mod experiments;
pub mod fock;
pub mod gauge;
pub mod lattice;
pub mod model;
pub mod par;
pub mod rng;
pub mod runner;
pub mod sectors;
pub mod spectral;
pub mod transforms;

pub use fock::{Complex, FockOperator, ModeIndex, Spin};
pub use gauge::{GaugeField, Path, SitePhases};
pub use lattice::{Bond, Lattice, Parity, Plaquette};
pub use par::Exec;
