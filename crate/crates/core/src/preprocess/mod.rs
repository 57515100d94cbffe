//! Tokenization and the tf-idf document-term matrix.

mod matrix;
pub mod porter;
mod stopwords;

use serde::{Deserialize, Serialize};

pub use matrix::{
    build_matrix, frequent_terms, prune_sparse, rank_terms, read_term_totals, DocTermMatrix,
    Vocabulary,
};
pub use stopwords::StopWords;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stemmer {
    None,
    #[default]
    Porter,
}

impl Stemmer {
    pub fn apply(self, word: &str) -> String {
        match self {
            Stemmer::None => word.to_owned(),
            Stemmer::Porter => porter::stem(word),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessOptions {
    pub min_word_len: usize,
    pub stop_words: StopWords,
    pub stemmer: Stemmer,
    /// Drop every token containing a digit.
    pub remove_numbers: bool,
    pub lowercase: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            min_word_len: 3,
            stop_words: StopWords::english(),
            stemmer: Stemmer::Porter,
            remove_numbers: true,
            lowercase: true,
        }
    }
}

impl PreprocessOptions {
    pub fn validate(&self) -> crate::Result<()> {
        if self.min_word_len == 0 {
            return Err(crate::Error::config("min_word_len must be at least 1"));
        }
        Ok(())
    }

    /// Lowercases (when enabled) and stems a single word the same way
    /// [`tokenize`] does, without stop-word or length filtering. Used to
    /// bring lexicon entries into the token space.
    pub fn normalize_word(&self, word: &str) -> String {
        let word = if self.lowercase {
            word.to_lowercase()
        } else {
            word.to_owned()
        };
        self.stemmer.apply(&word)
    }

    fn is_stop_word(&self, token: &str) -> bool {
        !self.stop_words.is_empty() && self.stop_words.contains(&token.to_lowercase())
    }
}

/// The ordered terms of one document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenList {
    pub doc_id: String,
    pub tokens: Vec<String>,
}

impl TokenList {
    pub fn new(doc_id: impl Into<String>, tokens: Vec<String>) -> Self {
        TokenList {
            doc_id: doc_id.into(),
            tokens,
        }
    }

    /// Token count.
    pub fn n_d(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Splits cleaned text into normalized terms.
///
/// Order of operations: split on non-alphanumeric characters, lowercase,
/// drop digit-bearing tokens, drop stop words, stem, then drop stop words a
/// second time (a stem can coincide with a stop word) and tokens shorter
/// than `min_word_len` characters.
pub fn tokenize(doc_id: impl Into<String>, text: &str, options: &PreprocessOptions) -> TokenList {
    let tokens = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|piece| !piece.is_empty())
        .filter_map(|piece| {
            let token = if options.lowercase {
                piece.to_lowercase()
            } else {
                piece.to_owned()
            };
            if options.remove_numbers && token.chars().any(|c| c.is_numeric()) {
                return None;
            }
            if options.is_stop_word(&token) {
                return None;
            }
            let stemmed = options.stemmer.apply(&token);
            if options.is_stop_word(&stemmed) || stemmed.chars().count() < options.min_word_len {
                return None;
            }
            Some(stemmed)
        })
        .collect();
    TokenList::new(doc_id, tokens)
}
