//! The narrative guide, embedded chapter by chapter so its examples compile
//! and run as doc-tests.
//!
//! The same markdown builds as a standalone site with `mdbook build book`
//! from the repository root. Chapter order follows the book's table of
//! contents; the hidden lines (`# ...`) inside snippets are compiled but not
//! rendered.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/random-fields.md")]
pub mod random_fields {}

#[doc = include_str!("../../../book/src/legendre-kernels.md")]
pub mod legendre_kernels {}

#[doc = include_str!("../../../book/src/critical-points.md")]
pub mod critical_points {}

#[doc = include_str!("../../../book/src/predictions.md")]
pub mod predictions {}

#[doc = include_str!("../../../book/src/reduction.md")]
pub mod reduction {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments_guide {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
