#![no_main]

use libfuzzer_sys::fuzz_target;
use ratgeom::{format_rat, parse_rat};

fuzz_target!(|text: &str| {
    if let Ok(x) = parse_rat(text) {
        assert_eq!(parse_rat(&format_rat(&x)).unwrap(), x);
    }
});
