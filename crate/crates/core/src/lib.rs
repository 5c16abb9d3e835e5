//! Numerical characterization of omega-limit sets for flows of dimension one
//! to three.
//!
//! The crate covers the whole pipeline: built-in vector fields with exact
//! Jacobians ([`systems`]), adaptive integration with dense output
//! ([`integrate`]), equilibria and bifurcation thresholds ([`equilibria`]),
//! the Lorenz trapping-sphere certificate ([`invariance`]), point-cloud
//! estimates of the omega-limit set ([`omega`]) and Poincare-section
//! diagnostics ([`section`]).

pub mod csv;
pub mod eigen;
pub mod equilibria;
pub mod error;
pub mod integrate;
pub mod invariance;
pub mod omega;
pub mod section;
pub mod spatial;
pub mod systems;

pub use error::{Error, Result};
pub use integrate::{IntegratorConfig, Mode, Trajectory};
pub use systems::{builtin, LorenzParams, Matrix, StateVec, SystemSpec, VectorField};
