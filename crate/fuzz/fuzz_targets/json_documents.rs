#![no_main]

use libfuzzer_sys::fuzz_target;
use prefcorpus::eval::EvalReport;
use prefcorpus::pipeline::PipelineManifest;
use prefcorpus::reward::RewardModelParams;

fuzz_target!(|data: &str| {
    if let Ok(m) = PipelineManifest::from_json(data) {
        let _ = m.balanced();
        let _ = m.summary();
    }
    if let Ok(p) = RewardModelParams::from_json(data) {
        let back = RewardModelParams::from_json(&p.to_json()).expect("params round-trip");
        assert_eq!(back, p);
    }
    if let Ok(r) = EvalReport::from_json(data) {
        let _ = r.to_table();
    }
});
