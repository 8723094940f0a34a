#![no_main]

use libfuzzer_sys::fuzz_target;
use prefcorpus::filters::{extract_numbers, normalize_number, number_consistency};

fuzz_target!(|data: &str| {
    for n in extract_numbers(data) {
        assert_eq!(normalize_number(&n), n);
    }
    assert!(number_consistency(data, data).passed);
});
