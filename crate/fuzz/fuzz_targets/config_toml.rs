#![no_main]
use libfuzzer_sys::{fuzz_target, Corpus};
use zms::config::RunConfig;

fuzz_target!(|data: &[u8]| -> Corpus {
    let Ok(text) = std::str::from_utf8(data) else {
        return Corpus::Reject;
    };
    let Ok(cfg) = RunConfig::from_toml_str(text) else {
        return Corpus::Keep;
    };
    // anything accepted must survive a round trip
    let again = cfg.to_toml_string().expect("serialize accepted config");
    assert_eq!(RunConfig::from_toml_str(&again).expect("reparse"), cfg);
    let _ = cfg.pulse_sequence();
    let _ = cfg.environment();
    Corpus::Keep
});
