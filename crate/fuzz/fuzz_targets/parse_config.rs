#![no_main]

use libfuzzer_sys::fuzz_target;
use varholder::config::{RunConfig, COMMANDS};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(cfg) = RunConfig::from_toml(text) else {
        return;
    };
    for cmd in COMMANDS {
        let _ = cfg.validate(cmd);
    }
    let _ = RunConfig::from_toml(&cfg.to_toml()).expect("emitted config parses");
});
