#![no_main]
use libfuzzer_sys::fuzz_target;
use zms::analysis::{dominant_frequencies, extract_peaks, fit_envelope};
use zms::io::parse_traces;

fuzz_target!(|data: &[u8]| {
    if let Ok(traces) = parse_traces(data, "fuzz") {
        if let Ok(peaks) = extract_peaks(&traces) {
            let _ = fit_envelope(&peaks);
            let _ = dominant_frequencies(&peaks);
        }
    }
});
