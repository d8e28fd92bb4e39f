#![no_main]

use libfuzzer_sys::fuzz_target;
use varholder::VerificationRecord;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for line in text.lines() {
        if let Ok(r) = VerificationRecord::from_json(line) {
            let back = VerificationRecord::from_json(&r.to_json()).expect("encoded record decodes");
            assert_eq!(back, r);
        }
    }
});
