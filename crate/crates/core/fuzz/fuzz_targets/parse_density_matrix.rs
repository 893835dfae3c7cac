#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rho) = gpauli::io::parse_density_matrix(text) {
            assert!(rho.min_eigenvalue() >= -1e-9);
        }
    }
});
