#![no_main]

use libfuzzer_sys::fuzz_target;
use prefcorpus::lang::LanguageRegistry;
use prefcorpus::records::{read_candidate_sets, read_preference_pairs, read_sources};

fuzz_target!(|data: &[u8]| {
    let registry = LanguageRegistry::builtin();
    let _ = read_candidate_sets(data, &registry);
    let _ = read_preference_pairs(data, &registry);
    let _ = read_sources(data, &registry);
});
