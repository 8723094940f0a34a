//! Replays the checked-in fuzz seeds through the same entry points as the
//! fuzz targets, so the invariants they assert also run under `cargo test`.

use std::fs;
use std::path::PathBuf;

use prefcorpus::corpus::parse_line;
use prefcorpus::eval::EvalReport;
use prefcorpus::filters::{extract_numbers, normalize_number, number_consistency, DangerWords, EmojiList};
use prefcorpus::lang::LanguageRegistry;
use prefcorpus::langid::{LanguageDetector, ProfileDetector};
use prefcorpus::pipeline::{ModelRegistry, PipelineManifest};
use prefcorpus::providers::http::decode_response;
use prefcorpus::providers::mock::PhraseBook;
use prefcorpus::providers::ProviderKind;
use prefcorpus::records::{read_candidate_sets, read_preference_pairs, read_sources};
use prefcorpus::reward::{RewardModelParams, Rubric};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

fn text(bytes: &[u8]) -> Option<&str> {
    std::str::from_utf8(bytes).ok()
}

#[test]
fn corpus_line_seeds() {
    let r = LanguageRegistry::builtin();
    let mut parsed = 0;
    for (name, data) in seeds("corpus_line") {
        let Some(s) = text(&data) else { continue };
        if let Ok(e) = parse_line(s, 1, &r) {
            assert_eq!(parse_line(&e.to_line(), 1, &r).unwrap(), e, "{name}");
            parsed += 1;
        }
    }
    assert!(parsed >= 2);
}

#[test]
fn records_seeds() {
    let r = LanguageRegistry::builtin();
    let mut ok = 0;
    for (_, data) in seeds("records") {
        ok += usize::from(read_candidate_sets(&data[..], &r).is_ok());
        ok += usize::from(read_preference_pairs(&data[..], &r).is_ok());
        let _ = read_sources(&data[..], &r);
    }
    assert!(ok >= 2);
}

#[test]
fn toml_table_seeds() {
    let r = LanguageRegistry::builtin();
    let mut ok = 0;
    for (_, data) in seeds("toml_tables") {
        let Some(s) = text(&data) else { continue };
        ok += usize::from(LanguageRegistry::from_toml(s).is_ok());
        ok += usize::from(Rubric::from_toml(s, &r).is_ok());
        ok += usize::from(PhraseBook::from_toml(s).is_ok());
    }
    assert!(ok >= 3);
}

#[test]
fn langid_profile_seeds() {
    let r = LanguageRegistry::builtin();
    let mut ok = 0;
    for (_, data) in seeds("langid_profile") {
        let Some(s) = text(&data) else { continue };
        if let Ok(d) = ProfileDetector::from_json("seed", s, &r) {
            let _ = d.detect("Tu pedido llegará en tres días.");
            ok += 1;
        }
    }
    assert!(ok >= 1);
}

#[test]
fn json_document_seeds() {
    for (name, data) in seeds("json_documents") {
        let Some(s) = text(&data) else { continue };
        let manifest = PipelineManifest::from_json(s).map(|m| m.balanced());
        let params = RewardModelParams::from_json(s).map(|p| {
            assert_eq!(RewardModelParams::from_json(&p.to_json()).unwrap(), p);
        });
        let report = EvalReport::from_json(s).map(|r| r.to_table());
        assert!(manifest.is_ok() || params.is_ok() || report.is_ok(), "{name} parses as nothing");
    }
}

#[test]
fn provider_response_seeds() {
    for (name, data) in seeds("provider_response") {
        let Some((&sel, body)) = data.split_first() else { continue };
        let kind = [ProviderKind::Translate, ProviderKind::Judge, ProviderKind::Embed, ProviderKind::Score][usize::from(sel % 4)];
        let res = decode_response(kind, body);
        assert_eq!(res.is_ok(), !name.contains("overflow"), "{name}: {res:?}");
    }
}

#[test]
fn number_token_seeds() {
    for (_, data) in seeds("number_tokens") {
        let Some(s) = text(&data) else { continue };
        for n in extract_numbers(s) {
            assert_eq!(normalize_number(&n), n);
        }
        assert!(number_consistency(s, s).passed);
    }
}

#[test]
fn word_list_seeds() {
    let r = LanguageRegistry::builtin();
    for (_, data) in seeds("word_lists") {
        let Some(s) = text(&data) else { continue };
        assert!(!EmojiList::parse(s).scan(s).is_empty());
        assert!(DangerWords::parse(s).find(s, &r, &r.english()).is_some());
        let _ = ModelRegistry::parse(s, &r);
    }
}
