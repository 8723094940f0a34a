#![no_main]

use libfuzzer_sys::fuzz_target;
use prefcorpus::providers::http::decode_response;
use prefcorpus::providers::ProviderKind;

fuzz_target!(|data: &[u8]| {
    let Some((&selector, body)) = data.split_first() else {
        return;
    };
    let kind = match selector % 4 {
        0 => ProviderKind::Translate,
        1 => ProviderKind::Judge,
        2 => ProviderKind::Embed,
        _ => ProviderKind::Score,
    };
    let _ = decode_response(kind, body);
});
