use tracing::warn;

use crate::providers::{judge, Judge, JudgeRequest, Winner};
use crate::records::{CandidateSet, PreferencePair};

pub const DEFAULT_MAX_PAIRS_PER_SET: usize = 6;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelOutcome {
    pub pairs: Vec<PreferencePair>,
    /// Sets skipped: fewer than two distinct candidates, or a judge failure.
    pub skipped_sets: usize,
}

/// Asks the judge about candidate pairs `(i, j)`, `i < j`, in index order,
/// at most `max_pairs_per_set` per set. Any judge failure drops the whole
/// set; nothing is guessed.
pub fn label_pairs(
    judge_provider: &dyn Judge,
    sets: &[CandidateSet],
    rubric_prompt: &str,
    max_pairs_per_set: usize,
) -> LabelOutcome {
    let mut out = LabelOutcome::default();
    'sets: for (n, set) in sets.iter().enumerate() {
        let mut texts: Vec<&str> = Vec::new();
        for c in &set.candidates {
            if !texts.contains(&c.text.as_str()) {
                texts.push(&c.text);
            }
        }
        if texts.len() < 2 {
            warn!(set = n, "skipping candidate set with fewer than two distinct candidates");
            out.skipped_sets += 1;
            continue;
        }
        let mut labelled = Vec::new();
        let pairs = (0..texts.len())
            .flat_map(|i| (i + 1..texts.len()).map(move |j| (i, j)))
            .take(max_pairs_per_set.max(1));
        for (i, j) in pairs {
            let request = JudgeRequest {
                source_text: &set.source_text,
                source_lang: &set.source_lang,
                target_lang: &set.target_lang,
                a: texts[i],
                b: texts[j],
                rubric_prompt,
            };
            let winner = match judge(judge_provider, &request) {
                Ok(w) => w,
                Err(e) => {
                    warn!(set = n, judge = judge_provider.name(), error = %e, "judge failed; skipping set");
                    out.skipped_sets += 1;
                    continue 'sets;
                }
            };
            let (chosen, rejected) = match winner {
                Winner::A => (texts[i], texts[j]),
                Winner::B => (texts[j], texts[i]),
            };
            match PreferencePair::new(
                set.source_text.clone(),
                set.source_lang.clone(),
                set.target_lang.clone(),
                chosen,
                rejected,
                judge_provider.label_source(),
            ) {
                Ok(pair) => labelled.push(pair),
                Err(e) => {
                    warn!(set = n, error = %e, "invalid candidate; skipping set");
                    out.skipped_sets += 1;
                    continue 'sets;
                }
            }
        }
        out.pairs.extend(labelled);
    }
    out
}
