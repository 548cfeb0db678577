//! The guide under `book/` rendered as rustdoc, one module per chapter, so
//! `cargo test` compiles and runs every listing against the current crate.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/normalization.md")]
pub mod normalization {}
#[doc = include_str!("../../../book/src/representations.md")]
pub mod representations {}
#[doc = include_str!("../../../book/src/vectorization.md")]
pub mod vectorization {}
#[doc = include_str!("../../../book/src/scorers.md")]
pub mod scorers {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/running.md")]
pub mod running {}
