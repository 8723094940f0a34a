#![no_main]

use libfuzzer_sys::fuzz_target;
use prefcorpus::lang::LanguageRegistry;
use prefcorpus::providers::mock::PhraseBook;
use prefcorpus::reward::Rubric;

fuzz_target!(|data: &str| {
    let builtin = LanguageRegistry::builtin();
    if let Ok(registry) = LanguageRegistry::from_toml(data) {
        let _ = registry.english();
    }
    if let Ok(rubric) = Rubric::from_toml(data, &builtin) {
        let _ = rubric.hash();
    }
    let _ = PhraseBook::from_toml(data);
});
