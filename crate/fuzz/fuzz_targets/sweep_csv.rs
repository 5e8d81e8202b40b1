#![no_main]
use libfuzzer_sys::fuzz_target;
use zms::analysis::linear_fit;
use zms::io::parse_sweep;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_sweep(data, "fuzz") {
        let b: Vec<f64> = rows.iter().map(|r| r.b_gauss).collect();
        let f: Vec<f64> = rows.iter().map(|r| r.freq_hz).collect();
        let _ = linear_fit(&b, &f);
    }
});
