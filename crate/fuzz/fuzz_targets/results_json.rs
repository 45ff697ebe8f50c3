#![no_main]

use libfuzzer_sys::fuzz_target;
use qadapt::harness::parse_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(file) = parse_json(text) {
        // Accepted configs must validate without panicking, whatever the answer.
        let _ = file.config.validate();
        let _ = file.config.env_spec.validate();
    }
});
