//! Linearised Einstein equation on homogeneous vacuum backgrounds.
//!
//! - [`spectral`]: truncated Fourier fields on flat tori and Sobolev norms.
//! - [`calculus`]: per-mode tensor calculus over jets in time.
//! - [`invariant`]: the left-invariant sector of the Berger spheres.
//! - [`geometry`]: slices, spacetime backgrounds and their operators.
//! - [`constraints`]: the constraint map, its linearisation and the normal identities.
//! - [`decomposition`]: the split operator, the gamma-space and Moncrief decompositions.
//! - [`evolution`]: the Cauchy problem per mode, its monitors and gauge recovery.
//! - [`io`]: snapshots, run configuration, manifests and reports.

pub mod calculus;
pub mod constraints;
pub mod decomposition;
pub mod error;
pub mod evolution;
pub mod geometry;
pub mod invariant;
pub mod io;
pub mod spectral;

pub use error::{Error, Result};
