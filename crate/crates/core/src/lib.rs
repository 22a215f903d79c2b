//! Numerical laboratory for the (d+1)-body problem in d-space.
//!
//! Configurations of `d + 1` bodies are reduced to `d × d` matrices in
//! normalized Jacobi coordinates, where the mass metric becomes the Frobenius
//! metric and the coplanar (degenerate) configurations are exactly the
//! matrices with zero determinant. The signed distance `S` to that locus is
//! the last signed principal value of a pseudo-singular value decomposition.
//!
//! The crate integrates Newton's equations under attractive pair potentials,
//! locates and classifies degeneration instants, and checks along computed
//! solutions that zero-angular-momentum motion crosses the degeneration locus
//! at least once per window of length `π / √(G M δ)`.

pub mod dynamics;
pub mod events;
mod error;
pub mod linalg;
pub mod pipeline;
pub mod potentials;
pub mod real;
pub mod reduction;
pub mod scenarios;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{pseudo_svd, signed_distance, singular_margin, PseudoSvd, SquareMatrix};
pub use reduction::{FullConfiguration, FullVelocity, MassSystem};
pub use nalgebra::DMatrix;
