//! Holds the acceptance suite in `tests/acceptance.rs`. The package name sorts
//! after the other workspace members so that `cargo test --workspace` reaches
//! it only after every unit and integration test has run.
