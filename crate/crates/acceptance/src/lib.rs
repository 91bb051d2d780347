//! Acceptance checks live in `tests/acceptance.rs`; run them with
//! `cargo test -p fourthdown-acceptance`, optionally followed by `--` and
//! substrings selecting which checks to run.
