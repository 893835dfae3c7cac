#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(set) = gpauli::io::parse_mub_set(text) {
            let report = gpauli::mub::verify_mub(&set, 1e-12);
            assert_eq!(report.d, set.dim());
        }
    }
});
