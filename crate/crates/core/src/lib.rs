//! Volume minimization of totally geodesic real projective spaces in CP^n:
//! Fubini–Study geometry, Haar sampling, exact intersection counts, Crofton
//! volumes, and Hamiltonian lifts with flow monitors.

pub mod crofton;
pub mod error;
pub mod hamflow;
pub mod haar;
pub mod intersect;
pub mod numeric;
pub mod polynomial;
pub mod projective;
pub mod report;
pub mod selftest;
pub mod submanifolds;

pub use error::{Error, Result};
pub use haar::{sample_stabilizer, sample_unitary, GroupElement};
pub use projective::{CVec, ProjPoint, C64};
pub use submanifolds::{ChartedSubmanifold, SphereSubmanifold};
