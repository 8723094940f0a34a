//! Preference-aligned parallel corpus construction.
//!
//! Candidate translations come from pluggable providers, pass a cascade of
//! cleaning filters, are ranked by a pairwise reward model and land in a
//! deduplicated, per-direction corpus store.

pub mod corpus;
pub mod error;
pub mod eval;
pub mod filters;
pub mod lang;
pub mod langid;
pub mod pipeline;
pub mod providers;
pub mod records;
pub mod reward;
pub mod similarity;
pub mod util;

pub use error::{Error, Result};
