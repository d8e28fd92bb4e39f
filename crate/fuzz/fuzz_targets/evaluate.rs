#![no_main]

use libfuzzer_sys::fuzz_target;
use varholder::parse_expression;

// First 24 bytes: a point in R³; the rest: expression source.
fuzz_target!(|data: &[u8]| {
    if data.len() < 24 {
        return;
    }
    let mut x = [0.0f64; 3];
    for (k, c) in data[..24].chunks_exact(8).enumerate() {
        x[k] = f64::from_le_bytes(c.try_into().unwrap());
    }
    let Ok(src) = std::str::from_utf8(&data[24..]) else {
        return;
    };
    if let Ok(e) = parse_expression(src) {
        for dim in 1..=3 {
            let _ = e.evaluate(&x[..dim], dim);
        }
    }
});
