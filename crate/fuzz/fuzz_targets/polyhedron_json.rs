#![no_main]

use libfuzzer_sys::fuzz_target;
use ratgeom::{from_json_str, to_json_string};

fuzz_target!(|text: &str| {
    // Conversion cost grows fast with size; keep inputs desk-sized.
    if text.len() > 4096 {
        return;
    }
    if let Ok(p) = from_json_str(text) {
        let again = from_json_str(&to_json_string(&p)).unwrap();
        assert_eq!(again, p);
    }
});
