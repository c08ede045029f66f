#![no_main]

use libfuzzer_sys::fuzz_target;
use ofnn::data::parse_har2_labels;

fuzz_target!(|data: &[u8]| {
    let _ = parse_har2_labels(&String::from_utf8_lossy(data));
});
