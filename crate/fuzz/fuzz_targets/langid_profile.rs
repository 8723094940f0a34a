#![no_main]

use libfuzzer_sys::fuzz_target;
use prefcorpus::lang::LanguageRegistry;
use prefcorpus::langid::{LanguageDetector, ProfileDetector};

fuzz_target!(|data: &str| {
    let registry = LanguageRegistry::builtin();
    if let Ok(detector) = ProfileDetector::from_json("fuzz", data, &registry) {
        let _ = detector.detect("Können Sie die Bestellung heute senden?");
    }
});
