//! Experiment-config parsing must never panic on untrusted TOML: every
//! outcome is Ok or a structured configuration error. Accepted configs must
//! re-render and re-parse.

#![no_main]

use coopkb::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = ExperimentConfig::from_toml_str(text) {
        let rendered = config.to_toml_string().expect("accepted config renders");
        ExperimentConfig::from_toml_str(&rendered).expect("rendered config re-parses");
    }
});
