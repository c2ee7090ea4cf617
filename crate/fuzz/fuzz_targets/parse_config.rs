#![no_main]

use adhesion_lab::config::{parse_config, to_toml, Preset};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(scenario) = parse_config(s) {
            let _ = to_toml(&scenario, Preset::Experiment);
        }
    }
});
