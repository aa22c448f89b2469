//! Book chapters compiled as documentation so `cargo test` runs every snippet.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}

#[doc = include_str!("../../../book/src/rng.md")]
pub mod rng {}

#[doc = include_str!("../../../book/src/tandem.md")]
pub mod tandem {}

#[doc = include_str!("../../../book/src/closed-form.md")]
pub mod closed_form {}

#[doc = include_str!("../../../book/src/gg.md")]
pub mod gg {}

#[doc = include_str!("../../../book/src/pareto.md")]
pub mod pareto {}

#[doc = include_str!("../../../book/src/slotted.md")]
pub mod slotted {}

#[doc = include_str!("../../../book/src/harness.md")]
pub mod harness {}
