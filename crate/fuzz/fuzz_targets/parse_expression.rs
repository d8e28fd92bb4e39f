#![no_main]

use libfuzzer_sys::fuzz_target;
use varholder::parse_expression;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(e) = parse_expression(src) {
        // Printing then re-parsing must give the same tree.
        let printed = e.to_string();
        let again = parse_expression(&printed).expect("printed expression parses");
        assert_eq!(again.to_string(), printed);
    }
});
