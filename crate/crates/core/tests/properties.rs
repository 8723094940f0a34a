use proptest::prelude::*;

use prefcorpus::corpus::{parse_line, CorpusEntry, FilterName};
use prefcorpus::eval::chrf;
use prefcorpus::filters::{
    emoji_preserved, length_ratio, normalize_number, number_consistency, run_cascade, CascadeDeps, EmojiList,
    FilterConfig, DEFAULT_CASCADE,
};
use prefcorpus::lang::LanguageRegistry;
use prefcorpus::langid::builtin_detectors;
use prefcorpus::pipeline::{CorpusStore, FixedClock};
use prefcorpus::providers::mock::MockTranslator;
use prefcorpus::reward::{argmax_first, bt_loss_from_gap};
use prefcorpus::similarity::{cosine, Embedder, HashedNgramEmbedder};

const CODES: [&str; 6] = ["en", "de", "es", "fr", "ja", "zh"];

fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9äöüéñ日本語中文 ,.!?😊\"\\\\]{1,40}".prop_filter("needs a visible char", |s| !s.trim().is_empty())
}

fn lang_pair() -> impl Strategy<Value = (usize, usize)> {
    (0..CODES.len(), 1..CODES.len()).prop_map(|(a, d)| (a, (a + d) % CODES.len()))
}

fn entry(r: &LanguageRegistry, src: &str, s: usize, tgt: &str, t: usize) -> CorpusEntry {
    CorpusEntry::new(src, r.tag(CODES[s]).unwrap(), tgt, r.tag(CODES[t]).unwrap(), "p", FixedClock::epoch().0)
        .unwrap()
}

proptest! {
    #[test]
    fn entry_line_round_trips(src in text(), tgt in text(), (s, t) in lang_pair()) {
        let r = LanguageRegistry::builtin();
        let e = entry(&r, &src, s, &tgt, t);
        let line = e.to_line();
        prop_assert!(!line.contains('\n'));
        let back = parse_line(&line, 1, &r).unwrap();
        prop_assert_eq!(&back, &e);
        prop_assert_eq!(back.to_line(), line);
    }

    #[test]
    fn length_ratio_is_symmetric_and_at_least_one(a in text(), b in text()) {
        let x = length_ratio(&a, &b).unwrap();
        prop_assert_eq!(x, length_ratio(&b, &a).unwrap());
        prop_assert!(x >= 1.0);
    }

    #[test]
    fn chrf_is_bounded_and_maximal_on_identity(h in text(), r in text()) {
        let s = chrf(&h, &r).unwrap();
        prop_assert!((0.0..=100.0).contains(&s), "{}", s);
        prop_assert!((chrf(&r, &r).unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn number_normalization_is_idempotent(token in "[0-9][0-9 .,]{0,12}") {
        let once = normalize_number(&token);
        prop_assert_eq!(normalize_number(&once), once);
    }

    #[test]
    fn number_check_ignores_order(a in 0u32..1_000_000, b in 0u32..1_000_000) {
        let v = number_consistency(&format!("{a} then {b}"), &format!("{b} before {a}"));
        prop_assert!(v.passed);
    }

    #[test]
    fn dropping_an_emoji_fails_the_emoji_check(s in "[a-z ]{1,20}", i in 0usize..3) {
        let list = EmojiList::default();
        let e = ["😊", "🙂", "👍"][i];
        let (with, moved) = (format!("{s}{e}"), format!("{e}{s}"));
        prop_assert!(emoji_preserved(&with, &moved, &list).passed);
        prop_assert!(!emoji_preserved(&with, &s, &list).passed);
    }

    #[test]
    fn cosine_is_bounded_and_self_similar(a in text(), b in text()) {
        let emb = HashedNgramEmbedder::default();
        let (u, v) = (emb.embed(&a).unwrap(), emb.embed(&b).unwrap());
        let c = cosine(&u, &v).unwrap();
        prop_assert!((-1.0..=1.0).contains(&c));
        prop_assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn argmax_is_the_first_maximum(scores in prop::collection::vec(-3i8..3, 1..40)) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert_eq!(argmax_first(&scores), scores.iter().position(|s| *s == max));
    }

    #[test]
    fn pairwise_loss_decreases_in_the_gap(a in -50.0f64..50.0, d in 1e-3f64..10.0) {
        prop_assert!(bt_loss_from_gap(a) > 0.0);
        prop_assert!(bt_loss_from_gap(a + d) < bt_loss_from_gap(a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cascade_trail_is_a_prefix_of_the_order(
        src in text(),
        tgt in text(),
        (s, t) in lang_pair(),
        order in Just(DEFAULT_CASCADE.to_vec()).prop_shuffle(),
    ) {
        let r = LanguageRegistry::builtin();
        let (a, b) = builtin_detectors(&r).unwrap();
        let pivot = MockTranslator::new("pivot");
        let emb = HashedNgramEmbedder::default();
        let deps = CascadeDeps::new(&r).with_detectors(&*a, &*b).with_pivot(&pivot).with_embedder(&emb);
        let config = FilterConfig { cascade_order: order.clone(), ..FilterConfig::default() };
        let out = run_cascade(&entry(&r, &src, s, &tgt, t), &config, &deps).unwrap();
        let names: Vec<FilterName> = out.trail.iter().map(|v| v.filter).collect();
        prop_assert_eq!(&names[..], &order[..names.len()]);
        let passed = out.trail.iter().filter(|v| v.passed).count();
        prop_assert!(passed + 1 >= names.len());
        prop_assert_eq!(out.passed(), passed == order.len());
    }

    #[test]
    fn store_insert_is_idempotent(rows in prop::collection::vec((text(), text(), lang_pair()), 1..20)) {
        let r = LanguageRegistry::builtin();
        let dir = tempfile::tempdir().unwrap();
        let mut store = CorpusStore::open(dir.path(), &r).unwrap();
        let entries: Vec<CorpusEntry> = rows.iter().map(|(a, b, (s, t))| entry(&r, a, *s, b, *t)).collect();
        let first = store.insert_all(&entries).unwrap();
        prop_assert_eq!(first.inserted + first.duplicates, entries.len());
        let second = store.insert_all(&entries).unwrap();
        prop_assert_eq!(second.inserted, 0);
        prop_assert_eq!(second.duplicates, entries.len());
        let reopened = CorpusStore::open(dir.path(), &r).unwrap();
        prop_assert_eq!(reopened.len(), first.inserted);
    }
}
