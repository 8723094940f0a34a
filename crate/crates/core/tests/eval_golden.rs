//! Evaluation against a checked-in golden report. Set
//! `PREFCORPUS_UPDATE_GOLDEN=1` to rewrite the golden after an intended change.

use std::path::PathBuf;

use prefcorpus::eval::{chrf, eval_run, EvalOptions, EvalReport, GoldenCheck, IdentitySystem, Metric};
use prefcorpus::lang::LanguageRegistry;
use prefcorpus::providers::mock::MockTranslator;
use prefcorpus::reward::Rubric;
use prefcorpus::util::canonical_hash;

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

const METRICS: [Metric; 3] = [Metric::Chrf, Metric::Preference, Metric::NumberAccuracy];

fn report(config_hash: &str) -> EvalReport {
    let r = LanguageRegistry::builtin();
    let rubric = Rubric::builtin(&r);
    let options = EvalOptions {
        metrics: &METRICS,
        rubric: Some(&rubric),
        scorer: None,
        config_hash,
    };
    eval_run(&golden_dir().join("testset.jsonl"), &IdentitySystem, &r, &options).unwrap()
}

fn config_hash() -> String {
    canonical_hash(&serde_json::json!({ "metrics": ["chrf", "preference", "number_accuracy"], "system": "identity" }))
}

#[test]
fn identity_report_matches_golden() {
    let current = report(&config_hash());
    let path = golden_dir().join("identity.json");
    if std::env::var_os("PREFCORPUS_UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, current.to_json() + "\n").unwrap();
    }
    let golden = EvalReport::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(current.check_golden(&golden, 1e-9), GoldenCheck::Match);
    assert_eq!(current.entry_count, 6);
    assert_eq!(current.directions.len(), 4);
    // Every source number survives the identity system.
    assert_eq!(current.aggregate["number_accuracy"], 1.0);
}

#[test]
fn golden_is_invalidated_by_another_config() {
    let golden = report(&config_hash());
    let other = report("something-else");
    assert!(matches!(other.check_golden(&golden, 1e-9), GoldenCheck::Invalidated { .. }));
}

#[test]
fn mock_system_beats_identity_on_chrf() {
    let r = LanguageRegistry::builtin();
    let mock = MockTranslator::new("mock").with_default_style("polite").unwrap();
    let system = prefcorpus::eval::RoutedSystem::new(
        "mock",
        prefcorpus::pipeline::ModelRegistry::parse("en-de, en-es, de-en, en-ja", &r).unwrap(),
        &mock,
        r.english(),
    );
    let options = EvalOptions {
        metrics: &[Metric::Chrf],
        rubric: None,
        scorer: None,
        config_hash: "x",
    };
    let routed = eval_run(&golden_dir().join("testset.jsonl"), &system, &r, &options).unwrap();
    let identity = report("x");
    assert_eq!(routed.failed_count, 0);
    assert!(routed.aggregate["chrf"] > identity.aggregate["chrf"] + 30.0, "{}", routed.to_table());
}

#[test]
fn chrf_matches_hand_computed_values() {
    // abc/abd: orders 1-3 give F = 2/3, 1/2, 0; longer orders have no n-grams.
    assert!((chrf("abc", "abd").unwrap() - 700.0 / 18.0).abs() < 1e-9);
    // ab/abc: order 1 P=1 R=2/3, order 2 P=1 R=1/2, beta 2; order 3 absent in the hypothesis.
    let f1 = 5.0 * (2.0 / 3.0) / (4.0 + 2.0 / 3.0);
    let f2 = 5.0 * 0.5 / (4.0 + 0.5);
    assert!((chrf("ab", "abc").unwrap() - 100.0 * (f1 + f2) / 2.0).abs() < 1e-9);
    assert_eq!(chrf("a b c", "abc").unwrap(), 100.0);
}
