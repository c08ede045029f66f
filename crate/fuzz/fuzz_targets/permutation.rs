#![no_main]

use libfuzzer_sys::fuzz_target;
use ofnn::data::PermutationSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(spec) = PermutationSpec::parse(&String::from_utf8_lossy(data), 0) {
        assert!(spec.is_bijection());
        assert_eq!(spec.inverse().inverse(), spec);
    }
});
