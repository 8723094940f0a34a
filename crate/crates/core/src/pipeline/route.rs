use std::collections::BTreeSet;

use crate::error::Error;
use crate::lang::{Direction, LanguageRegistry, LanguageTag};

/// Directions for which a dedicated translation model exists.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ModelRegistry {
    directions: BTreeSet<Direction>,
}

impl ModelRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_directions(directions: impl IntoIterator<Item = Direction>) -> Self {
        Self {
            directions: directions.into_iter().collect(),
        }
    }

    /// Parses a comma or whitespace separated list such as `en-es, ja-en`.
    pub fn parse(list: &str, registry: &LanguageRegistry) -> Result<Self, Error> {
        list.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| Direction::parse(s, registry))
            .collect::<Result<BTreeSet<_>, _>>()
            .map(|directions| Self { directions })
    }

    pub fn insert(&mut self, direction: Direction) -> bool {
        self.directions.insert(direction)
    }

    pub fn contains(&self, src: &LanguageTag, tgt: &LanguageTag) -> bool {
        self.directions
            .iter()
            .any(|d| &d.src == src && &d.tgt == tgt)
    }

    pub fn directions(&self) -> impl Iterator<Item = &Direction> {
        self.directions.iter()
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}

/// Translation plan from `src` to `tgt`: the direct model when there is
/// one, otherwise two hops through English.
pub fn route(
    src: &LanguageTag,
    tgt: &LanguageTag,
    models: &ModelRegistry,
    english: &LanguageTag,
) -> Result<Vec<Direction>, Error> {
    let direct = Direction::new(src.clone(), tgt.clone())?;
    if models.contains(src, tgt) {
        return Ok(vec![direct]);
    }
    let no_route = |missing: String| Error::NoRoute {
        src: src.code().to_string(),
        tgt: tgt.code().to_string(),
        missing,
    };
    if src == english || tgt == english {
        return Err(no_route(direct.to_string()));
    }
    let first = Direction::new(src.clone(), english.clone())?;
    let second = Direction::new(english.clone(), tgt.clone())?;
    for hop in [&first, &second] {
        if !models.contains(&hop.src, &hop.tgt) {
            return Err(no_route(hop.to_string()));
        }
    }
    Ok(vec![first, second])
}
