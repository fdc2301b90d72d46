//! Ellipsoidal robust positive invariant sets for polytopic linear systems.

mod ellipsoid;
mod lmi;
mod rpi;
pub mod sdp;
mod system;

pub use ellipsoid::{Ellipsoid, EllipsoidJson};
pub use lmi::assemble_lmi_block;
pub use rpi::{
    certificate_residual, default_tau2_grid, log_grid, solve_rpi, solve_rpi_with, symmetrize_over_group,
    worst_case_vdot, GridPoint, RpiOptions, SdpResult, SdpResultJson,
};
pub use sdp::{BarrierSolver, LogDetSolver, SdpOptions};
pub use system::{ErrorSystemJson, PolytopicErrorSystem, StateSymmetry};

/// Projection onto the coordinates `coords`.
pub fn project_ellipsoid(e: &Ellipsoid, coords: &[usize]) -> crate::Result<Ellipsoid> {
    e.project(coords)
}

/// Half-width of the set along state `i`.
pub fn axis_bound(e: &Ellipsoid, i: usize) -> crate::Result<f64> {
    e.axis_bound(i)
}
