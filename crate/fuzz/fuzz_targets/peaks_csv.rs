#![no_main]
use libfuzzer_sys::fuzz_target;
use zms::analysis::{dominant_frequencies, fit_envelope};
use zms::io::parse_peaks;

fuzz_target!(|data: &[u8]| {
    if let Ok(peaks) = parse_peaks(data, "fuzz") {
        let _ = fit_envelope(&peaks);
        let _ = dominant_frequencies(&peaks);
    }
});
