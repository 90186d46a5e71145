//! Tokenization and stemming shared by indexing, query analysis and training-query counting.
//!
//! Text is lowercased and split on every non-alphanumeric character. Stopwords are
//! kept; only the BM25 index can optionally drop them (see [`StopwordSet`]).

mod porter;

use std::borrow::Borrow;
use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use porter::stem_ascii;

/// A stemmed query or document term, the unit of every RSJ estimate.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Term(String);

impl Term {
    /// Wraps an already-stemmed string. No analysis is applied.
    pub fn new(stem: impl Into<String>) -> Self {
        Term(stem.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Term {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Term {
    fn from(s: &str) -> Self {
        Term(s.to_owned())
    }
}

/// Splits `text` into lowercase alphanumeric tokens.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            // Lowercasing can emit combining marks (e.g. 'İ'); keep only alphanumerics.
            current.extend(c.to_lowercase().filter(|l| l.is_alphanumeric()));
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Porter-stems a token. Tokens containing non-ASCII characters pass through unchanged.
pub fn stem(token: &str) -> Term {
    if token.is_ascii() {
        Term(stem_ascii(token))
    } else {
        Term(token.to_owned())
    }
}

/// `tokenize` followed by `stem`, preserving order and duplicates.
pub fn analyze(text: &str) -> Vec<Term> {
    tokenize(text).iter().map(|t| stem(t)).collect()
}

/// Words excluded from the BM25 index. Entries are analyzed like any other
/// text so that they compare against stems.
#[derive(Clone, Debug, Default)]
pub struct StopwordSet {
    terms: HashSet<Term>,
}

impl StopwordSet {
    pub fn from_words<'a>(words: impl IntoIterator<Item = &'a str>) -> Self {
        let terms = words.into_iter().flat_map(analyze).collect();
        StopwordSet { terms }
    }

    /// Reads a UTF-8 file with one word per line.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_words(text.lines()))
    }

    pub fn contains(&self, term: &Term) -> bool {
        self.terms.contains(term)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}
