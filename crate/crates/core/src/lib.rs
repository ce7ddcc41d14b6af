//! Stackelberg-Nash hierarchical boundary control of the 1D wave equation on the
//! moving domain `0 < x < 1 + k t`.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh`]: moving-domain geometry, time grid, per-level meshes, control segments.
//! * [`fem`]: P1 mass/stiffness assembly, tridiagonal solves, interpolation, fluxes.
//! * [`wave`]: forward and backward implicit time marching on the moving meshes.
//! * [`stackelberg`]: the leader/follower fixed-point driver and optimality checks.
//! * [`experiment`]: run configuration, sweeps and CSV output used by the CLI.
//! * [`verify`]: quick self-checks against closed forms and identities.

pub mod error;
pub mod experiment;
pub mod fem;
pub mod mesh;
pub mod stackelberg;
pub mod verify;
pub mod wave;

pub use error::{Error, Result};
