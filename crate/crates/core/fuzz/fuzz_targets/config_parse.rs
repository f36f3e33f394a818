#![no_main]

use libfuzzer_sys::fuzz_target;
use otfs_ipac::config::SimConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = SimConfig::parse(text) else {
        return;
    };
    // validation must reject, never panic
    if cfg.validate().is_ok() {
        let again = SimConfig::parse(&cfg.to_toml()).expect("serialized config parses");
        assert_eq!(again.to_toml(), cfg.to_toml());
    }
});
