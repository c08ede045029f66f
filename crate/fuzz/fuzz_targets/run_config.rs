#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use ofnn::cli::{parse_pairs, RunConfig};

fuzz_target!(|data: &[u8]| {
    let text = String::from_utf8_lossy(data);
    let _ = parse_pairs(&text);
    if let Ok(cfg) = RunConfig::parse(&text, Path::new("/base")) {
        let rendered = cfg.to_text();
        let again = RunConfig::parse(&rendered, Path::new("/base")).expect("rendered config parses");
        assert_eq!(again.to_text(), rendered);
    }
});
