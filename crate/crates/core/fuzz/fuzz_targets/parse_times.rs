#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(times) = gpauli::io::parse_times(text) {
            assert!(times.iter().all(|t| t.is_finite() && *t >= 0.0));
            assert!(times.windows(2).all(|w| w[0] <= w[1]));
        }
    }
});
