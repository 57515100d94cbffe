//! Multinomial Naive Bayes with add-one (Laplace) smoothing, trained on
//! labels bootstrapped from lexicon scores.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{Label, SentimentScore};
use crate::preprocess::TokenList;

pub const MODEL_VERSION: u32 = 1;
const TIE_BREAK: &str = "first-in-class-order";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledDoc {
    #[serde(flatten)]
    pub tokens: TokenList,
    pub label: String,
}

impl LabeledDoc {
    pub fn new(tokens: TokenList, label: impl Into<String>) -> Self {
        LabeledDoc {
            tokens,
            label: label.into(),
        }
    }

    pub fn doc_id(&self) -> &str {
        &self.tokens.doc_id
    }
}

/// Distant supervision: score > 0 becomes `positive`, score < 0 `negative`,
/// zero scores are left out.
pub fn bootstrap_labels(scores: &[SentimentScore], tokens: &[TokenList]) -> Result<Vec<LabeledDoc>> {
    if scores.len() != tokens.len() {
        return Err(Error::data(format!(
            "{} scores but {} token lists",
            scores.len(),
            tokens.len()
        )));
    }
    let mut labeled = Vec::new();
    for (s, t) in scores.iter().zip(tokens) {
        if s.doc_id != t.doc_id {
            return Err(Error::data(format!(
                "doc_id mismatch: score for {:?}, tokens for {:?}",
                s.doc_id, t.doc_id
            )));
        }
        if s.label != Label::Neutral {
            labeled.push(LabeledDoc::new(t.clone(), s.label.as_str()));
        }
    }
    Ok(labeled)
}

/// Relative gap below which two log-posteriors are treated as equal.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Log-space class priors and per-class term likelihoods.
#[derive(Debug, Clone, PartialEq)]
pub struct NBModel {
    classes: Vec<String>,
    log_prior: Vec<f64>,
    vocabulary: Vec<String>,
    /// `log_cond[class][term]`, terms in vocabulary order.
    log_cond: Vec<Vec<f64>>,
    class_term_totals: Vec<u64>,
    index: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub doc_id: String,
    pub predicted: String,
    /// Unnormalized, in the model's class order.
    pub log_posteriors: Vec<f64>,
}

/// Fits priors `N_c / N` and likelihoods `(T_ct + 1) / (sum_t' T_ct' + |V|)`
/// over the vocabulary of all training documents.
///
/// `classes` fixes the class order used for tie-breaking; every class needs
/// at least one training document.
pub fn train<S: AsRef<str>>(examples: &[LabeledDoc], classes: &[S]) -> Result<NBModel> {
    let classes: Vec<String> = classes.iter().map(|c| c.as_ref().to_owned()).collect();
    if classes.is_empty() {
        return Err(Error::data("no classes declared"));
    }
    let class_index: HashMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    if class_index.len() != classes.len() {
        return Err(Error::data("duplicate class names"));
    }
    if examples.is_empty() {
        return Err(Error::data("empty training set"));
    }

    let vocabulary: Vec<String> = examples
        .iter()
        .flat_map(|ex| ex.tokens.tokens.iter().cloned())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if vocabulary.is_empty() {
        return Err(Error::data("empty training vocabulary"));
    }
    let index: HashMap<String, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, t)| (t.clone(), i))
        .collect();

    let mut doc_counts = vec![0u64; classes.len()];
    let mut term_counts = vec![vec![0u64; vocabulary.len()]; classes.len()];
    for ex in examples {
        let c = *class_index.get(ex.label.as_str()).ok_or_else(|| {
            Error::data(format!(
                "document {:?} has undeclared class {:?}",
                ex.doc_id(),
                ex.label
            ))
        })?;
        doc_counts[c] += 1;
        for t in &ex.tokens.tokens {
            term_counts[c][index[t]] += 1;
        }
    }
    if let Some(c) = doc_counts.iter().position(|&n| n == 0) {
        return Err(Error::data(format!(
            "class {:?} has no training documents",
            classes[c]
        )));
    }

    let n_docs = examples.len() as f64;
    let b = vocabulary.len() as u64;
    let log_prior = doc_counts.iter().map(|&n| (n as f64 / n_docs).ln()).collect();
    let class_term_totals: Vec<u64> = term_counts.iter().map(|row| row.iter().sum()).collect();
    let log_cond = term_counts
        .iter()
        .zip(&class_term_totals)
        .map(|(row, &total)| {
            let denom = (total + b) as f64;
            row.iter().map(|&t| ((t + 1) as f64 / denom).ln()).collect()
        })
        .collect();

    Ok(NBModel {
        classes,
        log_prior,
        vocabulary,
        log_cond,
        class_term_totals,
        index,
    })
}

impl NBModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    /// Vocabulary size `B`.
    pub fn vocabulary_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn log_prior(&self, class: usize) -> f64 {
        self.log_prior[class]
    }

    pub fn class_term_totals(&self) -> &[u64] {
        &self.class_term_totals
    }

    pub fn class_position(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    /// `log P(term | class)`, or `None` for terms outside the vocabulary.
    pub fn log_cond(&self, term: &str, class: usize) -> Option<f64> {
        self.index.get(term).map(|&t| self.log_cond[class][t])
    }

    /// MAP class for a document. Tokens outside the vocabulary are skipped;
    /// ties go to the earliest class in [`NBModel::classes`]. Log-posteriors
    /// within [`TIE_TOLERANCE`] (relative) count as tied, so posteriors that
    /// are equal as exact fractions tie regardless of summation rounding.
    pub fn predict(&self, tokens: &TokenList) -> Prediction {
        let mut log_posteriors = self.log_prior.clone();
        for t in tokens.tokens.iter().filter_map(|t| self.index.get(t)) {
            for (c, lp) in log_posteriors.iter_mut().enumerate() {
                *lp += self.log_cond[c][*t];
            }
        }
        let mut best = 0;
        for (c, &lp) in log_posteriors.iter().enumerate().skip(1) {
            let incumbent = log_posteriors[best];
            if lp - incumbent > TIE_TOLERANCE * incumbent.abs().max(1.0) {
                best = c;
            }
        }
        Prediction {
            doc_id: tokens.doc_id.clone(),
            predicted: self.classes[best].clone(),
            log_posteriors,
        }
    }

    pub fn predict_all(&self, docs: &[TokenList]) -> Vec<Prediction> {
        docs.iter().map(|d| self.predict(d)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            version: MODEL_VERSION,
            tie_break: TIE_BREAK.to_owned(),
            classes: self.classes.clone(),
            log_prior: self.log_prior.clone(),
            vocabulary: self.vocabulary.clone(),
            log_cond: self.log_cond.clone(),
            class_term_totals: self.class_term_totals.clone(),
        };
        let text = serde_json::to_string_pretty(&file).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<NBModel> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                Error::MissingArtifact(path.to_owned())
            } else {
                Error::io(path, e)
            }
        })?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<NBModel> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        file.into_model()
    }
}

pub fn predict(model: &NBModel, tokens: &TokenList) -> Prediction {
    model.predict(tokens)
}

pub fn save_model(model: &NBModel, path: &Path) -> Result<()> {
    model.save(path)
}

pub fn load_model(path: &Path) -> Result<NBModel> {
    NBModel::load(path)
}

/// On-disk layout of a trained model.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    tie_break: String,
    classes: Vec<String>,
    log_prior: Vec<f64>,
    vocabulary: Vec<String>,
    log_cond: Vec<Vec<f64>>,
    class_term_totals: Vec<u64>,
}

impl ModelFile {
    fn into_model(self) -> Result<NBModel> {
        let bad = |m: &str| Err(Error::Format(m.to_owned()));
        if self.version != MODEL_VERSION {
            return Err(Error::Format(format!(
                "unsupported model version {} (expected {MODEL_VERSION})",
                self.version
            )));
        }
        if self.tie_break != TIE_BREAK {
            return Err(Error::Format(format!("unknown tie-break rule {:?}", self.tie_break)));
        }
        let k = self.classes.len();
        if k == 0 || self.log_prior.len() != k || self.log_cond.len() != k || self.class_term_totals.len() != k {
            return bad("class tables disagree in length");
        }
        if self.vocabulary.is_empty() || self.log_cond.iter().any(|row| row.len() != self.vocabulary.len()) {
            return bad("likelihood rows do not match the vocabulary");
        }
        let index: HashMap<String, usize> = self
            .vocabulary
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        if index.len() != self.vocabulary.len() {
            return bad("duplicate vocabulary terms");
        }
        let all_finite = self
            .log_prior
            .iter()
            .chain(self.log_cond.iter().flatten())
            .all(|v| v.is_finite() && *v <= 0.0);
        if !all_finite {
            return bad("log-probabilities must be finite and non-positive");
        }
        Ok(NBModel {
            classes: self.classes,
            log_prior: self.log_prior,
            vocabulary: self.vocabulary,
            log_cond: self.log_cond,
            class_term_totals: self.class_term_totals,
            index,
        })
    }
}

pub fn write_labeled_jsonl(docs: &[LabeledDoc], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in docs {
        let line = serde_json::to_string(doc).map_err(|e| Error::Internal(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_labeled_jsonl(path: &Path) -> Result<Vec<LabeledDoc>> {
    let file = std::fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact(path.to_owned())
        } else {
            Error::io(path, e)
        }
    })?;
    let mut docs = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        docs.push(serde_json::from_str(&line).map_err(|e| Error::BadLine {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(docs)
}

/// `doc_id,predicted,log_posterior_<class>...`
pub fn write_predictions_csv(model: &NBModel, predictions: &[Prediction], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["doc_id".to_owned(), "predicted".to_owned()];
    header.extend(model.classes.iter().map(|c| format!("log_posterior_{c}")));
    w.write_record(&header)?;
    for p in predictions {
        let mut row = vec![p.doc_id.clone(), p.predicted.clone()];
        row.extend(p.log_posteriors.iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, words: &[&str], label: &str) -> LabeledDoc {
        LabeledDoc::new(
            TokenList::new(id, words.iter().map(|s| s.to_string()).collect()),
            label,
        )
    }

    fn toy() -> NBModel {
        train(
            &[doc("p", &["good", "good"], "positive"), doc("n", &["bad"], "negative")],
            &["positive", "negative"],
        )
        .unwrap()
    }

    #[test]
    fn toy_parameters() {
        let m = toy();
        assert_eq!(m.vocabulary(), ["bad", "good"]);
        assert_eq!(m.vocabulary_size(), 2);
        let p = |t: &str, c: usize| m.log_cond(t, c).unwrap().exp();
        assert!((p("good", 0) - 0.75).abs() < 1e-15);
        assert!((p("bad", 0) - 0.25).abs() < 1e-15);
        assert!((p("good", 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((p("bad", 1) - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.log_prior(0).exp() - 0.5).abs() < 1e-15);
        assert_eq!(m.class_term_totals(), [2, 1]);
    }

    #[test]
    fn toy_prediction() {
        let m = toy();
        let pred = m.predict(&TokenList::new("q", vec!["good".into()]));
        assert_eq!(pred.predicted, "positive");
        assert!((pred.log_posteriors[0].exp() - 0.375).abs() < 1e-15);
        assert!((pred.log_posteriors[1].exp() - 0.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ties_and_unseen_tokens() {
        let m = toy();
        let empty = m.predict(&TokenList::new("e", vec![]));
        assert_eq!(empty.predicted, "positive");
        let unseen = m.predict(&TokenList::new("u", vec!["zebra".into(), "quux".into()]));
        assert_eq!(unseen.predicted, empty.predicted);
        assert_eq!(unseen.log_posteriors, empty.log_posteriors);

        let swapped = train(
            &[doc("p", &["good", "good"], "positive"), doc("n", &["bad"], "negative")],
            &["negative", "positive"],
        )
        .unwrap();
        assert_eq!(swapped.predict(&TokenList::new("e", vec![])).predicted, "negative");
    }

    #[test]
    fn training_errors() {
        let none: [&str; 2] = ["positive", "negative"];
        assert!(train(&[], &none).unwrap_err().to_string().contains("empty training set"));
        let err = train(&[doc("p", &["good"], "positive")], &none).unwrap_err();
        assert_eq!(err.to_string(), "data error: class \"negative\" has no training documents");
        assert!(train(&[doc("p", &["good"], "positive")], &["positive"]).is_ok());
        assert!(train(&[doc("p", &["good"], "other")], &["positive"]).is_err());
        assert!(train(&[doc("p", &[], "positive")], &["positive"]).is_err());
    }

    #[test]
    fn duplication_keeps_priors() {
        let base = vec![
            doc("a", &["x", "y"], "positive"),
            doc("b", &["y"], "negative"),
            doc("c", &["x"], "positive"),
        ];
        let doubled: Vec<LabeledDoc> = base.iter().chain(base.iter()).cloned().collect();
        let (m1, m2) = (train(&base, &["positive", "negative"]).unwrap(), train(&doubled, &["positive", "negative"]).unwrap());
        for c in 0..2 {
            assert_eq!(m1.log_prior(c), m2.log_prior(c));
        }
    }

    #[test]
    fn permutation_invariance() {
        let docs = vec![
            doc("a", &["x", "y", "x"], "positive"),
            doc("b", &["y", "z"], "negative"),
            doc("c", &["w"], "positive"),
            doc("d", &["z", "z"], "negative"),
        ];
        let mut rev = docs.clone();
        rev.reverse();
        assert_eq!(train(&docs, &["negative", "positive"]).unwrap(), train(&rev, &["negative", "positive"]).unwrap());
    }

    #[test]
    fn likelihoods_normalize() {
        let m = train(
            &[doc("a", &["x", "y", "x", "q"], "positive"), doc("b", &["y", "z"], "negative")],
            &["positive", "negative"],
        )
        .unwrap();
        for c in 0..2 {
            let total: f64 = m.vocabulary().iter().map(|t| m.log_cond(t, c).unwrap().exp()).sum();
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn bootstrap_rules() {
        let scores = vec![SentimentScore::new("a", 2), SentimentScore::new("b", 0), SentimentScore::new("c", -1)];
        let tokens: Vec<TokenList> = ["a", "b", "c"].iter().map(|id| TokenList::new(*id, vec![])).collect();
        let labeled = bootstrap_labels(&scores, &tokens).unwrap();
        let labels: Vec<_> = labeled.iter().map(|d| (d.doc_id(), d.label.as_str())).collect();
        assert_eq!(labels, [("a", "positive"), ("c", "negative")]);

        let zeros = vec![SentimentScore::new("a", 0)];
        assert!(bootstrap_labels(&zeros, &tokens[..1]).unwrap().is_empty());
        assert!(bootstrap_labels(&zeros, &tokens[1..2]).is_err());
        assert!(bootstrap_labels(&zeros, &tokens).is_err());
    }

    #[test]
    fn model_file_round_trip_and_corruption() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let m = toy();
        m.save(&path).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded, m);

        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() / 2]).unwrap();
        assert!(matches!(load_model(&path), Err(Error::Format(_))));

        let bumped = text.replace("\"version\": 1", "\"version\": 2");
        assert!(matches!(NBModel::from_json(&bumped), Err(Error::Format(m)) if m.contains("version")));
    }

    #[test]
    fn labeled_jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labeled.jsonl");
        let docs = vec![doc("a", &["x"], "positive"), doc("b", &[], "negative")];
        write_labeled_jsonl(&docs, &path).unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap().lines().next().unwrap(),
            r#"{"doc_id":"a","tokens":["x"],"label":"positive"}"#
        );
        assert_eq!(read_labeled_jsonl(&path).unwrap(), docs);
    }
}
