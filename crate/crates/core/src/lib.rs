//! Finite-resolution models of multiplication operators `f(z) -> z f(z)` on
//! `L^p` of a compactly supported measure.
//!
//! The crate builds generalized Haar systems over dyadic trees (intervals on
//! the line, alternating rectangle splits on the plane), splits the
//! multiplication operator into a diagonal part plus a small remainder with a
//! machine-checked error certificate, and decides similarity-modulo-compact
//! and approximate-similarity relations between pairs of operators from
//! symbolic measure descriptions.
//!
//! Modules, bottom-up:
//! - [`dyadic`]: cell indexing and geometry of the dyadic trees.
//! - [`measure`]: symbolic measures (atoms + piecewise-constant densities) and
//!   the set-theoretic predicates on them.
//! - [`lpnum`]: weighted finite-dimensional `l^p` spaces, operators, norm
//!   bounds.
//! - [`haar`]: generalized Haar and hybrid bases, unconditional-constant
//!   estimation.
//! - [`decompose`]: the diagonal-plus-remainder construction and its
//!   certificate.
//! - [`classify`]: decision procedures and constructive witnesses for the
//!   similarity relations.

pub mod classify;
pub mod corpus;
pub mod decompose;
pub mod dyadic;
pub mod error;
pub mod haar;
pub mod lpnum;
pub mod measure;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
