#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(w) = gpauli::io::parse_weights(text, None) {
            assert!(w.weights.iter().all(|&x| x > 0.0));
            assert!((w.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }
});
