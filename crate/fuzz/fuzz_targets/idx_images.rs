#![no_main]

use libfuzzer_sys::fuzz_target;
use ofnn::data::{idx_to_dataset, parse_idx_images};

fuzz_target!(|data: &[u8]| {
    if let Ok(images) = parse_idx_images(data) {
        assert_eq!(images.pixels.len(), images.count * images.rows * images.cols);
        let labels = vec![0u8; images.count];
        let _ = idx_to_dataset(&images, &labels);
    }
});
