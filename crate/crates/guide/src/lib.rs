//! The chapters of `book/` compiled as documentation, so every Rust snippet in
//! the guide runs under `cargo test --doc`. One module per chapter keeps
//! failures traceable to their file.

#[doc = include_str!("../../../book/src/oracles.md")]
pub mod oracles {}

#[doc = include_str!("../../../book/src/estimation.md")]
pub mod estimation {}

#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}
