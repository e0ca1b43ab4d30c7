//! The chapters of `book/` as doc modules, so `cargo test` runs every
//! code sample in the guide.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/problems.md")]
pub mod problems {}

#[doc = include_str!("../../../book/src/models.md")]
pub mod models {}

#[doc = include_str!("../../../book/src/prox.md")]
pub mod prox {}

#[doc = include_str!("../../../book/src/algorithms.md")]
pub mod algorithms {}

#[doc = include_str!("../../../book/src/stationarity.md")]
pub mod stationarity {}

#[doc = include_str!("../../../book/src/stability.md")]
pub mod stability {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
