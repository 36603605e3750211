//! Deterministic text analysis shared by retrievers and metrics.

mod porter;

use std::borrow::Borrow;
use std::collections::BTreeSet;
use std::fmt;
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};

pub use porter::stem;

/// A single analyzed word: a non-empty run of letters and digits.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Token(String);

impl Token {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl Borrow<str> for Token {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

fn is_token_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Byte ranges of every maximal run of Unicode letters/digits in `text`.
pub fn token_spans(text: &str) -> Vec<Range<usize>> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        match (is_token_char(c), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                spans.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        spans.push(s..text.len());
    }
    spans
}

/// Splits text into maximal runs of letters and digits, dropping everything
/// else.
pub fn tokenize(text: &str) -> Vec<Token> {
    token_spans(text)
        .into_iter()
        .map(|r| Token(text[r].to_string()))
        .collect()
}

/// Simple (one-to-one) lowercase mapping. Characters whose full lowercase
/// expands to several code points are left unchanged.
pub fn simple_lowercase(s: &str) -> String {
    s.chars()
        .map(|c| {
            let mut lower = c.to_lowercase();
            match (lower.next(), lower.next()) {
                (Some(l), None) => l,
                _ => c,
            }
        })
        .collect()
}

/// Per-token normalization applied after tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnalysisChain {
    pub lowercase: bool,
    pub stem: bool,
    pub stopwords: BTreeSet<String>,
}

impl Default for AnalysisChain {
    fn default() -> Self {
        Self::index()
    }
}

impl AnalysisChain {
    /// Lowercase and stem: the chain used for indexing and querying.
    pub fn index() -> Self {
        AnalysisChain {
            lowercase: true,
            stem: true,
            stopwords: BTreeSet::new(),
        }
    }

    /// Lowercase only: the chain used by the evaluation metrics.
    pub fn metric() -> Self {
        AnalysisChain {
            lowercase: true,
            stem: false,
            stopwords: BTreeSet::new(),
        }
    }

    pub fn with_stopwords<I, S>(mut self, words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.stopwords = words.into_iter().map(Into::into).collect();
        self
    }

    /// Analyzes `text`: tokenize, lowercase, drop stopwords, stem.
    pub fn analyze(&self, text: &str) -> Vec<Token> {
        tokenize(text)
            .into_iter()
            .filter_map(|t| self.normalize(t))
            .collect()
    }

    fn normalize(&self, token: Token) -> Option<Token> {
        let mut s = token.0;
        if self.lowercase {
            s = simple_lowercase(&s);
        }
        if self.stopwords.contains(&s) {
            return None;
        }
        if self.stem {
            s = stem(&s);
        }
        Some(Token(s))
    }
}

/// Convenience wrapper for [`AnalysisChain::analyze`].
pub fn analyze(text: &str, chain: &AnalysisChain) -> Vec<Token> {
    chain.analyze(text)
}

/// Reads a stopword list: one word per line, blank lines ignored.
pub fn load_stopwords(path: impl AsRef<Path>) -> Result<BTreeSet<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// All contiguous windows of length `n`, in order.
pub fn ngrams<T: Clone>(tokens: &[T], n: usize) -> Result<Vec<Vec<T>>> {
    if n == 0 {
        return Err(Error::invalid("n-gram order must be at least 1"));
    }
    Ok(tokens.windows(n).map(<[T]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn strs(tokens: &[Token]) -> Vec<&str> {
        tokens.iter().map(Token::as_str).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert!(tokenize("").is_empty());
        assert_eq!(
            strs(&tokenize("fire-resistance rating")),
            ["fire", "resistance", "rating"]
        );
        assert_eq!(strs(&tokenize("A-3.8.2.5")), ["A", "3", "8", "2", "5"]);
    }

    #[test]
    fn analyze_examples() {
        let no_stem = AnalysisChain::metric();
        assert_eq!(strs(&no_stem.analyze("Fire Doors")), ["fire", "doors"]);
        assert_eq!(strs(&AnalysisChain::index().analyze("Doors")), ["door"]);
        let stop = AnalysisChain::metric().with_stopwords(["the"]);
        assert_eq!(strs(&stop.analyze("the door")), ["door"]);
    }

    #[test]
    fn stopwords_match_after_lowercasing() {
        let chain = AnalysisChain::index().with_stopwords(["the"]);
        assert_eq!(strs(&chain.analyze("The Doors")), ["door"]);
    }

    #[test]
    fn ngram_examples() {
        let t = ["a", "b", "c", "d"];
        assert_eq!(ngrams(&t[..3], 2).unwrap(), vec![vec!["a", "b"], vec!["b", "c"]]);
        assert!(ngrams(&t[..1], 3).unwrap().is_empty());
        assert_eq!(
            ngrams(&t, 3).unwrap(),
            vec![vec!["a", "b", "c"], vec!["b", "c", "d"]]
        );
        assert!(matches!(ngrams(&t, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn stopword_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stop.txt");
        std::fs::write(&path, "the\n\n a \nof\n").unwrap();
        let words = load_stopwords(&path).unwrap();
        assert_eq!(words.into_iter().collect::<Vec<_>>(), ["a", "of", "the"]);
        assert!(load_stopwords(dir.path().join("missing.txt")).is_err());
    }

    proptest! {
        #[test]
        fn spans_are_strictly_increasing(s in "\\PC{0,60}") {
            let spans = token_spans(&s);
            for w in spans.windows(2) {
                prop_assert!(w[0].end < w[1].start);
            }
        }

        #[test]
        fn tokens_are_alphanumeric(s in "\\PC{0,60}") {
            for t in AnalysisChain::index().analyze(&s) {
                prop_assert!(!t.as_str().is_empty());
                prop_assert!(t.as_str().chars().all(char::is_alphanumeric));
            }
        }

        #[test]
        fn analyze_is_deterministic(s in "\\PC{0,60}") {
            let chain = AnalysisChain::index();
            prop_assert_eq!(chain.analyze(&s), chain.analyze(&s));
        }

        #[test]
        fn lowercase_is_idempotent(s in "\\PC{0,60}") {
            let once = simple_lowercase(&s);
            prop_assert_eq!(simple_lowercase(&once), once);
        }

        #[test]
        fn ngram_count(len in 0usize..20, n in 1usize..6) {
            let t: Vec<usize> = (0..len).collect();
            prop_assert_eq!(ngrams(&t, n).unwrap().len(), (len + 1).saturating_sub(n));
        }
    }
}
