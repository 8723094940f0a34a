use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::corpus::{FilterName, FilterVerdict};
use crate::error::Error;
use crate::util::{parse_word_list, read_to_string};

const BUILTIN_EMOJI: &str = include_str!("../../data/emoji.txt");

/// Emoji sequences, indexed by first scalar for longest-match scanning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmojiList {
    by_first: HashMap<char, Vec<Vec<char>>>,
    count: usize,
}

impl Default for EmojiList {
    fn default() -> Self {
        Self::parse(BUILTIN_EMOJI)
    }
}

impl EmojiList {
    pub fn parse(text: &str) -> Self {
        Self::from_sequences(parse_word_list(text))
    }

    pub fn from_sequences<I, S>(seqs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut by_first: HashMap<char, Vec<Vec<char>>> = HashMap::new();
        let mut count = 0;
        for s in seqs {
            let chars: Vec<char> = s.as_ref().chars().collect();
            let Some(&first) = chars.first() else { continue };
            let bucket = by_first.entry(first).or_default();
            if !bucket.contains(&chars) {
                bucket.push(chars);
                count += 1;
            }
        }
        for bucket in by_first.values_mut() {
            bucket.sort_by(|a, b| b.len().cmp(&a.len()).then(a.cmp(b)));
        }
        Self { by_first, count }
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        Ok(Self::parse(&read_to_string(path)?))
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Multiset of listed emoji in `text`, scanning left to right and
    /// taking the longest listed sequence at each position.
    pub fn scan(&self, text: &str) -> BTreeMap<String, usize> {
        let chars: Vec<char> = text.chars().collect();
        let mut found = BTreeMap::new();
        let mut i = 0;
        while i < chars.len() {
            let hit = self
                .by_first
                .get(&chars[i])
                .and_then(|cands| cands.iter().find(|c| chars[i..].starts_with(c)));
            match hit {
                Some(seq) => {
                    *found.entry(seq.iter().collect::<String>()).or_insert(0) += 1;
                    i += seq.len();
                }
                None => i += 1,
            }
        }
        found
    }
}

pub fn emoji_preserved(source_text: &str, target_text: &str, list: &EmojiList) -> FilterVerdict {
    let s = list.scan(source_text);
    let t = list.scan(target_text);
    if s == t {
        FilterVerdict::pass(FilterName::Emoji)
    } else {
        FilterVerdict::fail(FilterName::Emoji, format!("source {s:?} != target {t:?}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        let list = EmojiList::default();
        assert!(emoji_preserved("Thanks 😊", "Gracias 😊", &list).passed);
        assert!(!emoji_preserved("Thanks 😊", "Gracias", &list).passed);
        assert!(!emoji_preserved("😊😊 thanks", "Gracias 😊", &list).passed);
        assert!(emoji_preserved("🎉 a 😊", "😊 b 🎉", &list).passed);
        assert!(emoji_preserved("no emoji", "ninguno", &list).passed);
    }

    #[test]
    fn longest_match() {
        let list = EmojiList::from_sequences(["❤", "❤\u{fe0f}"]);
        let m = list.scan("❤\u{fe0f}❤");
        assert_eq!(m.get("❤\u{fe0f}"), Some(&1));
        assert_eq!(m.get("❤"), Some(&1));
        assert!(!emoji_preserved("❤\u{fe0f}", "❤", &list).passed);
    }

    #[test]
    fn unlisted_symbols_are_ignored() {
        let list = EmojiList::from_sequences(["😊"]);
        assert!(emoji_preserved("🦀 hi", "hola", &list).passed);
    }
}
