#![no_main]

use libfuzzer_sys::fuzz_target;
use ofnn::data::{interleave_uci_signals, parse_har2_features, HAR_CHANNELS};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = parse_har2_features(&text);
    let signals: Vec<&str> = text.splitn(HAR_CHANNELS, '|').collect();
    let _ = interleave_uci_signals(&signals);
});
