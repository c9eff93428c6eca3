#![no_main]

use libfuzzer_sys::fuzz_target;
use parspike::config::RunConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = RunConfig::from_toml(text) {
            let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(again.to_toml().unwrap(), cfg.to_toml().unwrap());
        }
    }
});
