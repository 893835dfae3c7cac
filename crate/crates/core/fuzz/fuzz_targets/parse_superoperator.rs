#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = gpauli::io::parse_superoperator(text) {
            let d = s.dim();
            assert_eq!(s.matrix().nrows(), d * d);
            let _ = s.to_choi().is_cp(1e-10);
        }
    }
});
