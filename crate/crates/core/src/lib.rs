//! Trajectory tracking for autonomous helicopters with certified
//! ellipsoidal tracking-error bounds.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod attitude;
pub mod config;
pub mod control;
pub mod error;
pub mod errsys;
pub mod flatness;
pub mod invariant;
pub mod io;
pub mod linalg;
pub mod plant;
pub mod plot;
pub mod reference;
pub mod sim;
pub mod taylor;
pub mod verify;

pub use error::{Error, Result};
pub use invariant::{Ellipsoid, PolytopicErrorSystem, SdpResult};
