#![no_main]

use libfuzzer_sys::fuzz_target;
use ofnn::cli::{decode_params, encode_params};

fuzz_target!(|data: &[u8]| {
    if let Ok((shape, params)) = decode_params(data) {
        assert_eq!(encode_params(&params, shape.num_channels), data);
    }
});
