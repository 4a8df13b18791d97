//! The guide in `book/` as doc-tests.
//!
//! mdbook cannot run listings that depend on a workspace crate, so each
//! chapter is included here and `cargo test` runs its code blocks.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/configuration.md")]
pub mod configuration {}
#[doc = include_str!("../../../book/src/wavefield.md")]
pub mod wavefield {}
#[doc = include_str!("../../../book/src/particle.md")]
pub mod particle {}
#[doc = include_str!("../../../book/src/ensemble.md")]
pub mod ensemble {}
#[doc = include_str!("../../../book/src/analytic.md")]
pub mod analytic {}
#[doc = include_str!("../../../book/src/statistics.md")]
pub mod statistics {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
