#![no_main]
use libfuzzer_sys::fuzz_target;
use zms::io::parse_classical;

fuzz_target!(|data: &[u8]| {
    let _ = parse_classical(data, "fuzz");
});
