#![no_main]

use libfuzzer_sys::fuzz_target;
use prefcorpus::filters::{DangerWords, EmojiList};
use prefcorpus::lang::LanguageRegistry;
use prefcorpus::pipeline::ModelRegistry;

fuzz_target!(|data: &str| {
    let registry = LanguageRegistry::builtin();
    let emoji = EmojiList::parse(data);
    let _ = emoji.scan(data);
    let danger = DangerWords::parse(data);
    let _ = danger.find(data, &registry, &registry.english());
    let _ = ModelRegistry::parse(data, &registry);
});
