#![no_main]

use libfuzzer_sys::fuzz_target;
use prefcorpus::corpus::parse_line;
use prefcorpus::lang::LanguageRegistry;

fuzz_target!(|data: &str| {
    let registry = LanguageRegistry::builtin();
    if let Ok(entry) = parse_line(data, 1, &registry) {
        // Whatever parses must survive a write/read cycle unchanged.
        let line = entry.to_line();
        let again = parse_line(&line, 1, &registry).expect("written line parses");
        assert_eq!(again, entry);
    }
});
