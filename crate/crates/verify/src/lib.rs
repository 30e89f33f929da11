//! Acceptance checks for `rarcd`. Everything lives in `tests/acceptance.rs`.
