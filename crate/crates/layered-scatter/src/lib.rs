//! Time-harmonic acoustic scattering in a two-layered medium separated by a
//! locally rough interface, with an optional embedded obstacle.
//!
//! The field of a point source above or below the flat line x₂ = 0 is given
//! by Sommerfeld-type Fourier integrals ([`layered_green`]). A first volume
//! equation on the half-disc B1 deforms the flat line into a lower arc, and a
//! second one on B2 deforms the arc into the rough interface ([`ls_volume`]).
//! Obstacles below the interface are handled with a combined-layer boundary
//! integral equation or, when penetrable, a volume equation ([`obstacle`]).
//! [`forward`] composes the stages and [`verify`] holds independent oracles.

pub mod error;
pub mod forward;
pub mod geometry;
pub mod layered_green;
pub mod ls_volume;
pub mod obstacle;
pub mod quad;
pub mod specfun;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::Point;
