#![no_main]

use conehedge::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    if text.len() > 8192 {
        return;
    }
    if let Ok(c) = RunConfig::from_json_str(text) {
        if c.mu.len() <= 4 {
            let _ = c.validate();
        }
    }
});
