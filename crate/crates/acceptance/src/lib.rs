// Criteria live in tests/acceptance.rs; run with `cargo test --release -p vo-acceptance`.
