//! Shared inputs for the benchmarks.

use std::path::{Path, PathBuf};

use lexstress_core::pipeline::Inputs;
use lexstress_core::RunConfig;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

pub fn fixture_config() -> RunConfig {
    let text = std::fs::read_to_string(fixture("lexstress.toml")).expect("fixture config");
    RunConfig::from_toml(&text, &fixture("")).expect("valid fixture config")
}

pub fn fixture_inputs() -> Inputs {
    Inputs::load(&fixture_config()).expect("fixture inputs load")
}
