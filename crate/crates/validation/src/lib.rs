//! Holds the `acceptance` test target, which checks every acceptance
//! criterion and prints one `[PASS]` or `[FAIL]` line per criterion:
//!
//! ```text
//! cargo test --release -p zoro-validation --test acceptance
//! ```
