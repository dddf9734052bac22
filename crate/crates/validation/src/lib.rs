//! Holds the `acceptance` test target, which runs every acceptance criterion
//! and prints one PASS/FAIL line per criterion:
//!
//! ```text
//! cargo test -p hetsign-validation --test acceptance
//! ```
