//! Maximal spacelike surfaces in the pseudo-hyperbolic space `H^{2,n}`.
//!
//! The crate is organised bottom-up: [`ambient`] holds the quadratic space and the
//! warped chart, [`loops`] the boundary data at infinity and finite curves, [`surfaces`]
//! the discrete surfaces and their geometric quantities, [`plateau`] the solvers and
//! [`verify`] the post-hoc checks.

pub mod ambient;
pub mod error;
pub(crate) mod linalg;
pub mod loops;
pub mod plateau;
pub mod surfaces;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::loglog_slope;
