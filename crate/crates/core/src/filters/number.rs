use std::collections::BTreeMap;
use std::sync::LazyLock;

use regex::Regex;

use crate::corpus::{FilterName, FilterVerdict};

const DIGIT: &str = "[0-9\u{0660}-\u{0669}\u{06F0}-\u{06F9}\u{0966}-\u{096F}\u{09E6}-\u{09EF}\u{0E50}-\u{0E59}\u{1040}-\u{1049}\u{FF10}-\u{FF19}]";

const ZEROS: [u32; 8] = [0x30, 0x0660, 0x06F0, 0x0966, 0x09E6, 0x0E50, 0x1040, 0xFF10];

static NUMBER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        "{DIGIT}+(?:[.,]{DIGIT}+|[ \u{00A0}\u{202F}]{DIGIT}{{3}}\\b)*"
    ))
    .expect("number pattern compiles")
});

fn ascii_digit(c: char) -> Option<char> {
    let cp = c as u32;
    ZEROS
        .iter()
        .find(|&&z| (z..z + 10).contains(&cp))
        .map(|&z| char::from(b'0' + (cp - z) as u8))
}

/// Canonical form of one matched numeric token: ASCII digits, grouping
/// separators dropped, decimal mark `.`.
///
/// Spaces always group. With both `.` and `,` present the later one is the
/// decimal mark. A single kind of mark repeated is grouping. A lone `.` is
/// decimal; a lone `,` is grouping when exactly three digits follow it and
/// decimal otherwise.
pub fn normalize_number(token: &str) -> String {
    let mut s: String = token
        .chars()
        .filter(|c| !matches!(c, ' ' | '\u{00A0}' | '\u{202F}'))
        .map(|c| ascii_digit(c).unwrap_or(c))
        .collect();
    let dots = s.matches('.').count();
    let commas = s.matches(',').count();
    let decimal = match (dots, commas) {
        (0, 0) => None,
        (_, 0) if dots > 1 => None,
        (0, _) if commas > 1 => None,
        (1, 0) => Some('.'),
        (0, 1) => {
            let after = s.len() - s.find(',').unwrap() - 1;
            (after != 3).then_some(',')
        }
        _ => {
            let last_dot = s.rfind('.').unwrap();
            let last_comma = s.rfind(',').unwrap();
            Some(if last_dot > last_comma { '.' } else { ',' })
        }
    };
    if let Some(mark) = decimal {
        let pos = s.rfind(mark).unwrap();
        let (int, frac) = s.split_at(pos);
        let int: String = int.chars().filter(char::is_ascii_digit).collect();
        s = format!("{int}.{}", &frac[1..]);
    } else {
        s.retain(|c| c.is_ascii_digit());
    }
    s
}

/// Normalized numeric tokens of `text`, in order of appearance.
pub fn extract_numbers(text: &str) -> Vec<String> {
    NUMBER
        .find_iter(text)
        .map(|m| normalize_number(m.as_str()))
        .collect()
}

fn multiset(text: &str) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for n in extract_numbers(text) {
        *m.entry(n).or_insert(0) += 1;
    }
    m
}

pub fn number_consistency(source_text: &str, target_text: &str) -> FilterVerdict {
    let s = multiset(source_text);
    let t = multiset(target_text);
    if s == t {
        FilterVerdict::pass(FilterName::Number)
    } else {
        let show = |m: &BTreeMap<String, usize>| {
            m.iter()
                .flat_map(|(k, &n)| std::iter::repeat_n(k.as_str(), n))
                .collect::<Vec<_>>()
                .join(" ")
        };
        FilterVerdict::fail(
            FilterName::Number,
            format!("source [{}] vs target [{}]", show(&s), show(&t)),
        )
    }
}
