#![no_main]

use std::str::FromStr;

use libfuzzer_sys::fuzz_target;
use qadapt::envstates::EnvFamily;
use qadapt::figures::Figure;
use qadapt::harness::OutputFormat;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(f) = EnvFamily::from_str(s) {
        assert_eq!(EnvFamily::from_str(f.as_str()).unwrap(), f);
        assert_eq!(EnvFamily::from_str(f.cli_name()).unwrap(), f);
    }
    if let Ok(f) = Figure::from_str(s) {
        assert_eq!(Figure::from_str(f.name()).unwrap(), f);
    }
    if let Ok(f) = OutputFormat::from_str(s) {
        assert_eq!(OutputFormat::from_str(f.extension()).unwrap(), f);
    }
});
