//! Planar three-body problem across a full coordinate atlas.
//!
//! The crate implements translation-reduced relative coordinates, spherical
//! and rotation-reduced homogeneous coordinates (projective, affine and round
//! shape-sphere charts), simultaneous Levi-Civita regularization of the three
//! binary collisions, and McGehee blow-up of triple collision.  Every chart
//! exposes its Hamiltonian and vector field; the [`integrate`] module drives
//! them with an adaptive 8(5,3) Runge–Kutta scheme and the [`oracle`] module
//! verifies them independently.

pub mod algebra;
pub mod atlas;
pub mod blowup;
pub mod error;
pub mod form;
pub mod integrate;
pub mod oracle;
pub mod reduced;
pub mod regularize;
pub mod relative;
pub mod spherical;
pub mod suites;

pub use algebra::{CoConfig3, Config3, Masses, Triple, C64};
pub use error::{Error, Result};
