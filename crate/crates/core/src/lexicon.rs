//! Polarity lexicons and the occurrence-count sentiment score.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::{PreprocessOptions, TokenList};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn value(self) -> i64 {
        match self {
            Polarity::Positive => 1,
            Polarity::Negative => -1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LexiconSource {
    Generic,
    Domain,
    Slang,
}

impl fmt::Display for LexiconSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LexiconSource::Generic => "generic",
            LexiconSource::Domain => "domain",
            LexiconSource::Slang => "slang",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Entry {
    pub polarity: Polarity,
    pub source: LexiconSource,
}

/// Word to polarity map. Every word has exactly one polarity.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<String, Entry>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a lexicon from in-memory word lists; same rules as
    /// [`load_lexicon`].
    pub fn from_words<P, N>(positive: P, negative: N, source: LexiconSource) -> Result<Self>
    where
        P: IntoIterator,
        P::Item: AsRef<str>,
        N: IntoIterator,
        N::Item: AsRef<str>,
    {
        let mut entries = BTreeMap::new();
        for word in positive {
            let word = normalize_entry(word.as_ref());
            if !word.is_empty() {
                entries.insert(
                    word,
                    Entry {
                        polarity: Polarity::Positive,
                        source,
                    },
                );
            }
        }
        for word in negative {
            let word = normalize_entry(word.as_ref());
            if word.is_empty() {
                continue;
            }
            if let Some(e) = entries.get(&word) {
                if e.polarity == Polarity::Positive {
                    return Err(Error::LexiconConflict { word });
                }
            }
            entries.insert(
                word,
                Entry {
                    polarity: Polarity::Negative,
                    source,
                },
            );
        }
        Ok(Lexicon { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<Entry> {
        self.entries.get(word).copied()
    }

    pub fn polarity(&self, word: &str) -> Option<Polarity> {
        self.entries.get(word).map(|e| e.polarity)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Entry)> {
        self.entries.iter().map(|(w, &e)| (w.as_str(), e))
    }

    pub fn insert(&mut self, word: impl Into<String>, polarity: Polarity, source: LexiconSource) {
        self.entries.insert(word.into(), Entry { polarity, source });
    }

    /// Every entry with its sign inverted.
    pub fn flipped(&self) -> Lexicon {
        Lexicon {
            entries: self
                .entries
                .iter()
                .map(|(w, e)| {
                    (
                        w.clone(),
                        Entry {
                            polarity: e.polarity.flipped(),
                            source: e.source,
                        },
                    )
                })
                .collect(),
        }
    }

    /// Maps entries into the token space produced by `options` (lowercase and
    /// stemming). Words whose normal forms collide with opposite polarities
    /// are dropped and returned.
    pub fn normalized(&self, options: &PreprocessOptions) -> (Lexicon, Vec<String>) {
        let mut out: BTreeMap<String, Entry> = BTreeMap::new();
        let mut ambiguous = std::collections::BTreeSet::new();
        for (word, entry) in &self.entries {
            let key = options.normalize_word(word);
            match out.get(&key) {
                Some(existing) if existing.polarity != entry.polarity => {
                    ambiguous.insert(key);
                }
                _ => {
                    out.insert(key, *entry);
                }
            }
        }
        for key in &ambiguous {
            out.remove(key);
        }
        (Lexicon { entries: out }, ambiguous.into_iter().collect())
    }

    /// TSV with header `term\tpolarity\tprovenance`; polarity as `+1`/`-1`.
    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut text = String::from("term\tpolarity\tprovenance\n");
        for (word, e) in &self.entries {
            let sign = if e.polarity == Polarity::Positive { "+1" } else { "-1" };
            text.push_str(&format!("{word}\t{sign}\t{}\n", e.source));
        }
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

fn normalize_entry(word: &str) -> String {
    word.trim().to_lowercase()
}

fn read_word_list(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(|line| line.split('#').next().unwrap_or("").trim().to_owned())
        .filter(|w| !w.is_empty())
        .collect())
}

/// Loads a positive and a negative word list (one word per line, `#`
/// comments). Words are trimmed and lowercased; a word in both lists is an
/// error.
pub fn load_lexicon(positive_path: &Path, negative_path: &Path, source: LexiconSource) -> Result<Lexicon> {
    let positive = read_word_list(positive_path)?;
    let negative = read_word_list(negative_path)?;
    Lexicon::from_words(positive, negative, source)
}

/// Outcome of [`merge_lexicons`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MergeReport {
    /// Terms an overlay replaced, in merge order.
    pub overridden: Vec<String>,
    /// How many of those replacements changed the polarity.
    pub polarity_flips: usize,
}

/// Layers `overlays` over `base`; a later lexicon wins on shared terms.
pub fn merge_lexicons(base: &Lexicon, overlays: &[Lexicon]) -> (Lexicon, MergeReport) {
    let mut merged = base.clone();
    let mut report = MergeReport::default();
    for overlay in overlays {
        for (word, entry) in &overlay.entries {
            if let Some(previous) = merged.entries.insert(word.clone(), *entry) {
                if previous.polarity != entry.polarity {
                    report.polarity_flips += 1;
                }
                report.overridden.push(word.clone());
            }
        }
    }
    (merged, report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Negative,
    Neutral,
    Positive,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::Negative, Label::Neutral, Label::Positive];

    pub fn from_score(score: i64) -> Self {
        match score.signum() {
            1 => Label::Positive,
            0 => Label::Neutral,
            _ => Label::Negative,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Negative => "negative",
            Label::Neutral => "neutral",
            Label::Positive => "positive",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negative" => Ok(Label::Negative),
            "neutral" => Ok(Label::Neutral),
            "positive" => Ok(Label::Positive),
            other => Err(Error::data(format!("unknown sentiment label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentimentScore {
    pub doc_id: String,
    pub score: i64,
    pub label: Label,
}

impl SentimentScore {
    pub fn new(doc_id: impl Into<String>, score: i64) -> Self {
        SentimentScore {
            doc_id: doc_id.into(),
            score,
            label: Label::from_score(score),
        }
    }
}

/// Positive minus negative word occurrences; unknown words count zero.
pub fn score(tokens: &TokenList, lexicon: &Lexicon) -> SentimentScore {
    let total = tokens
        .tokens
        .iter()
        .filter_map(|t| lexicon.polarity(t))
        .map(Polarity::value)
        .sum();
    SentimentScore::new(tokens.doc_id.clone(), total)
}

pub fn score_corpus(corpus_tokens: &[TokenList], lexicon: &Lexicon) -> Vec<SentimentScore> {
    corpus_tokens.iter().map(|t| score(t, lexicon)).collect()
}

pub fn write_scores_csv(scores: &[SentimentScore], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["doc_id", "score", "label"])?;
    for s in scores {
        w.write_record([s.doc_id.as_str(), &s.score.to_string(), s.label.as_str()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<SentimentScore>> {
    if !path.exists() {
        return Err(Error::MissingArtifact(path.to_owned()));
    }
    let mut reader = csv::Reader::from_path(path)?;
    let mut scores = Vec::new();
    for record in reader.records() {
        let record = record?;
        let bad = || Error::data(format!("{}: bad row {:?}", path.display(), record));
        let doc_id = record.get(0).ok_or_else(bad)?;
        let value: i64 = record.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let label: Label = record.get(2).ok_or_else(bad)?.parse()?;
        if label != Label::from_score(value) {
            return Err(bad());
        }
        scores.push(SentimentScore::new(doc_id, value));
    }
    Ok(scores)
}

/// Writes frequent terms for manual annotation: `term<TAB>count<TAB>` per
/// line. Filling the last column with `+` or `-` turns the file into a
/// lexicon readable by [`load_annotated_terms`].
pub fn write_candidate_terms(terms: &[(String, u64)], path: &Path) -> Result<()> {
    let mut text = String::from(
        "# candidate lexicon terms: set the third column to + or - (blank lines are skipped)\n\
         # term\tcount\tpolarity\n",
    );
    for (term, count) in terms {
        text.push_str(&format!("{term}\t{count}\t\n"));
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads an annotated candidate-term file. Rows without a polarity mark are
/// skipped.
pub fn load_annotated_terms(path: &Path, source: LexiconSource) -> Result<Lexicon> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut positive = Vec::new();
    let mut negative = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim_start().starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut cols = line.split('\t');
        let term = cols.next().unwrap_or("").trim();
        let mark = cols.nth(1).unwrap_or("").trim();
        match mark {
            "" => {}
            "+" | "+1" | "positive" => positive.push(term.to_owned()),
            "-" | "-1" | "negative" => negative.push(term.to_owned()),
            other => {
                return Err(Error::BadLine {
                    path: path.to_owned(),
                    line: i + 1,
                    message: format!("unknown polarity mark {other:?}"),
                })
            }
        }
    }
    Lexicon::from_words(positive, negative, source)
}
