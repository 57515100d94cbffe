//! Declarative end-to-end runs: collect, preprocess, score, bootstrap,
//! train, evaluate and report, each stage reading and writing canonical
//! artifacts in the output directory.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::info;
use serde::Deserialize;

use crate::classifier::{self, LabeledDoc, NBModel};
use crate::collector::{self, EndpointConfig, FileFormat, HttpCollector, RawRecord, SourceKind};
use crate::corpus::{self, Corpus, FieldMap};
use crate::error::{Error, Result};
use crate::evaluate::{self, SplitSpec};
use crate::lexicon::{self, Label, Lexicon, LexiconSource};
use crate::preprocess::{self, PreprocessOptions, Stemmer, StopWords, TokenList};

pub const RAW: &str = "raw.jsonl";
pub const CORPUS: &str = "corpus.jsonl";
pub const TOKENS: &str = "tokens.jsonl";
pub const MATRIX: &str = "matrix.csv";
pub const VOCABULARY: &str = "vocabulary.csv";
pub const FREQUENT_TERMS: &str = "frequent_terms.csv";
pub const LEXICON: &str = "lexicon.tsv";
pub const SCORES: &str = "scores.csv";
pub const LABELED: &str = "labeled.jsonl";
pub const MODEL: &str = "model.json";
pub const TEST_SET: &str = "test.jsonl";
pub const PREDICTIONS: &str = "predictions.csv";
pub const CONFUSION: &str = "confusion.csv";
pub const CONFUSION_FRACTIONS: &str = "confusion_fractions.csv";
pub const EVALUATION: &str = "evaluation.json";
pub const DISTRIBUTION: &str = "distribution.csv";
pub const DISTRIBUTION_PRODUCTS: &str = "distribution_products.csv";
pub const DISTRIBUTION_JSON: &str = "distribution.json";
pub const RATIOS: &str = "ratios.csv";
pub const HISTOGRAM: &str = "histogram.json";
pub const HISTOGRAM_CSV: &str = "histogram.csv";
pub const CORPUS_PREDICTIONS: &str = "corpus_predictions.csv";
pub const COMPARISON: &str = "comparison.csv";
pub const CANDIDATE_TERMS: &str = "candidate_terms.tsv";

/// Classes of the bootstrapped classifier, in tie-break order.
pub const BINARY_CLASSES: [&str; 2] = ["negative", "positive"];
const UNLABELED_GROUP: &str = "(none)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Collect,
    Preprocess,
    Score,
    Bootstrap,
    Train,
    Evaluate,
    Report,
    Predict,
    Compare,
    ExportTerms,
}

impl Stage {
    /// The stages of a full run, in order.
    pub const DEFAULT_RUN: [Stage; 7] = [
        Stage::Collect,
        Stage::Preprocess,
        Stage::Score,
        Stage::Bootstrap,
        Stage::Train,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Collect => "collect",
            Stage::Preprocess => "preprocess",
            Stage::Score => "score",
            Stage::Bootstrap => "bootstrap",
            Stage::Train => "train",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
            Stage::Predict => "predict",
            Stage::Compare => "compare",
            Stage::ExportTerms => "export-terms",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Stage::Collect,
            Stage::Preprocess,
            Stage::Score,
            Stage::Bootstrap,
            Stage::Train,
            Stage::Evaluate,
            Stage::Report,
            Stage::Predict,
            Stage::Compare,
            Stage::ExportTerms,
        ]
        .into_iter()
        .find(|st| st.name() == s)
        .ok_or_else(|| Error::config(format!("unknown stage {s:?}")))
    }
}

/// One input: either a local file or a paginated endpoint, with the labels
/// attached to every document it yields.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(default)]
    pub file: Option<PathBuf>,
    #[serde(default)]
    pub format: FileFormat,
    /// Fail on malformed lines instead of skipping them.
    #[serde(default)]
    pub strict: bool,
    #[serde(default)]
    pub endpoint: Option<EndpointConfig>,
    /// Overrides the record source tag.
    #[serde(default)]
    pub source: Option<SourceKind>,
    #[serde(default)]
    pub brand: Option<String>,
    #[serde(default)]
    pub product: Option<String>,
    /// Overrides the top-level field map for this source.
    #[serde(default)]
    pub fields: Option<FieldMap>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessSettings {
    pub min_word_len: usize,
    /// Stop-word file; the bundled English list when absent.
    pub stop_words: Option<PathBuf>,
    pub stemmer: Stemmer,
    pub remove_numbers: bool,
    pub lowercase: bool,
}

impl Default for PreprocessSettings {
    fn default() -> Self {
        PreprocessSettings {
            min_word_len: 3,
            stop_words: None,
            stemmer: Stemmer::Porter,
            remove_numbers: true,
            lowercase: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordLists {
    pub positive: PathBuf,
    pub negative: PathBuf,
}

/// Lexicon layers, merged generic < domain < annotated domain terms < slang.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LexiconSettings {
    pub generic: WordLists,
    #[serde(default)]
    pub domain: Option<WordLists>,
    /// Candidate-term file annotated with `+`/`-` marks.
    #[serde(default)]
    pub domain_annotated: Option<PathBuf>,
    #[serde(default)]
    pub slang: Option<WordLists>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub train_fraction: f64,
    pub shuffle: bool,
}

impl Default for SplitSettings {
    fn default() -> Self {
        SplitSettings {
            train_fraction: 0.75,
            shuffle: true,
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_sparsity() -> f64 {
    0.99
}

fn default_top_terms() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Seeds the train/test shuffle, the only random step.
    #[serde(default)]
    pub seed: u64,
    pub sources: Vec<SourceConfig>,
    #[serde(default)]
    pub fields: FieldMap,
    /// Keywords for product tagging of documents without a product label.
    #[serde(default)]
    pub products: Vec<String>,
    #[serde(default)]
    pub preprocess: PreprocessSettings,
    pub lexicon: LexiconSettings,
    #[serde(default = "default_sparsity")]
    pub sparsity: f64,
    #[serde(default)]
    pub split: SplitSettings,
    #[serde(default = "default_top_terms")]
    pub top_terms: usize,
    /// Bearer token for endpoint sources; taken from the environment only.
    #[serde(skip)]
    pub auth_token: Option<String>,
}

impl PipelineConfig {
    /// Reads a TOML or JSON config (by extension). Relative paths inside the
    /// file are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        let mut config: PipelineConfig = if is_json {
            serde_json::from_str(&text)
                .map_err(|e| Error::config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?
        };
        let base = path.parent().unwrap_or(Path::new("."));
        config.resolve_paths(base);
        config.validate()?;
        Ok(config)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for s in &mut self.sources {
            if let Some(f) = &mut s.file {
                fix(f);
            }
        }
        if let Some(p) = &mut self.preprocess.stop_words {
            fix(p);
        }
        let lex = &mut self.lexicon;
        for lists in [Some(&mut lex.generic), lex.domain.as_mut(), lex.slang.as_mut()]
            .into_iter()
            .flatten()
        {
            fix(&mut lists.positive);
            fix(&mut lists.negative);
        }
        if let Some(p) = &mut lex.domain_annotated {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sources.is_empty() {
            return Err(Error::config("at least one source is required"));
        }
        for (i, s) in self.sources.iter().enumerate() {
            match (&s.file, &s.endpoint) {
                (Some(_), None) => {}
                (None, Some(ep)) => ep.validate()?,
                _ => {
                    return Err(Error::config(format!(
                        "source {i}: set exactly one of `file` or `endpoint`"
                    )))
                }
            }
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return Err(Error::config(format!("sparsity must be in [0, 1), got {}", self.sparsity)));
        }
        if self.preprocess.min_word_len == 0 {
            return Err(Error::config("preprocess.min_word_len must be at least 1"));
        }
        self.split_spec().validate()
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.split.train_fraction,
            seed: self.seed,
            shuffle: self.split.shuffle,
        }
    }

    pub fn preprocess_options(&self) -> Result<PreprocessOptions> {
        let p = &self.preprocess;
        let stop_words = match &p.stop_words {
            Some(path) => StopWords::from_file(path)?,
            None => StopWords::english(),
        };
        let options = PreprocessOptions {
            min_word_len: p.min_word_len,
            stop_words,
            stemmer: p.stemmer,
            remove_numbers: p.remove_numbers,
            lowercase: p.lowercase,
        };
        options.validate()?;
        Ok(options)
    }

    /// Loads and merges every configured lexicon layer, then maps the result
    /// into the token space of `options`.
    pub fn lexicon(&self, options: &PreprocessOptions) -> Result<Lexicon> {
        let lex = &self.lexicon;
        let generic = lexicon::load_lexicon(&lex.generic.positive, &lex.generic.negative, LexiconSource::Generic)?;
        let mut overlays = Vec::new();
        if let Some(d) = &lex.domain {
            overlays.push(lexicon::load_lexicon(&d.positive, &d.negative, LexiconSource::Domain)?);
        }
        if let Some(path) = &lex.domain_annotated {
            overlays.push(lexicon::load_annotated_terms(path, LexiconSource::Domain)?);
        }
        if let Some(s) = &lex.slang {
            overlays.push(lexicon::load_lexicon(&s.positive, &s.negative, LexiconSource::Slang)?);
        }
        let (merged, report) = lexicon::merge_lexicons(&generic, &overlays);
        if !report.overridden.is_empty() {
            info!(
                "lexicon merge: {} overrides ({} polarity flips)",
                report.overridden.len(),
                report.polarity_flips
            );
        }
        let (normalized, dropped) = merged.normalized(options);
        if !dropped.is_empty() {
            info!("lexicon: dropped {} ambiguous stems: {}", dropped.len(), dropped.join(", "));
        }
        Ok(normalized)
    }
}

pub struct Pipeline {
    config: PipelineConfig,
}

impl Pipeline {
    pub fn new(config: PipelineConfig) -> Result<Self> {
        config.validate()?;
        Ok(Pipeline { config })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn artifact(&self, name: &str) -> PathBuf {
        self.config.output_dir.join(name)
    }

    /// Runs `stages` in order, stopping at the first failure.
    pub fn run(&self, stages: &[Stage]) -> Result<()> {
        let dir = &self.config.output_dir;
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for &stage in stages {
            info!("stage {stage}");
            self.run_stage(stage).map_err(|e| e.in_stage(stage.name()))?;
        }
        Ok(())
    }

    fn run_stage(&self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Collect => self.collect(),
            Stage::Preprocess => self.preprocess(),
            Stage::Score => self.score(),
            Stage::Bootstrap => self.bootstrap(),
            Stage::Train => self.train(),
            Stage::Evaluate => self.evaluate(),
            Stage::Report => self.report(),
            Stage::Predict => self.predict(),
            Stage::Compare => self.compare(),
            Stage::ExportTerms => {
                export_candidate_terms(
                    &self.artifact(MATRIX),
                    self.config.top_terms,
                    &self.artifact(CANDIDATE_TERMS),
                )?;
                Ok(())
            }
        }
    }

    fn collect(&self) -> Result<()> {
        let mut raw: Vec<RawRecord> = Vec::new();
        let mut documents = Vec::new();
        let mut http = HttpCollector::new();
        for source in &self.config.sources {
            let records = match (&source.file, &source.endpoint) {
                (Some(path), _) => collector::ingest_file(path, source.format, source.strict)?.records,
                (None, Some(endpoint)) => {
                    let mut endpoint = endpoint.clone();
                    endpoint.auth_token = self.config.auth_token.clone();
                    http.collect(&endpoint)?
                }
                (None, None) => unreachable!("validated"),
            };
            let fields = source.fields.as_ref().unwrap_or(&self.config.fields);
            for record in &records {
                let mut doc = corpus::parse_record(record, fields)?;
                if let Some(kind) = source.source {
                    doc.source = kind;
                }
                if source.brand.is_some() {
                    doc.brand.clone_from(&source.brand);
                }
                if source.product.is_some() {
                    doc.product.clone_from(&source.product);
                }
                documents.push(doc);
            }
            raw.extend(records);
        }
        corpus::tag_products(&mut documents, &self.config.products);
        let corpus = corpus::build_corpus(documents);
        info!("corpus: {} documents from {} records", corpus.len(), raw.len());
        collector::write_payloads_jsonl(&raw, &self.artifact(RAW))?;
        corpus.write_jsonl(&self.artifact(CORPUS))
    }

    fn load_corpus(&self) -> Result<Corpus> {
        Corpus::read_jsonl(&self.artifact(CORPUS))
    }

    fn tokenized(&self, corpus: &Corpus, options: &PreprocessOptions) -> Vec<TokenList> {
        corpus
            .documents()
            .iter()
            .map(|d| preprocess::tokenize(d.id.clone(), &d.text, options))
            .collect()
    }

    fn preprocess(&self) -> Result<()> {
        let corpus = self.load_corpus()?;
        let options = self.config.preprocess_options()?;
        let tokens = self.tokenized(&corpus, &options);
        write_jsonl(&tokens, &self.artifact(TOKENS))?;
        let matrix = preprocess::build_matrix(&tokens)?;
        let pruned = preprocess::prune_sparse(&matrix, self.config.sparsity)?;
        info!(
            "matrix: {} documents, {} terms ({} after pruning at {})",
            matrix.n_docs(),
            matrix.vocabulary().len(),
            pruned.vocabulary().len(),
            self.config.sparsity
        );
        pruned.write_csv(&self.artifact(MATRIX), &self.artifact(VOCABULARY))?;
        let mut w = csv::Writer::from_path(self.artifact(FREQUENT_TERMS))?;
        w.write_record(["term", "count"])?;
        for (term, count) in preprocess::frequent_terms(&pruned, self.config.top_terms) {
            w.write_record([term, count.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(self.artifact(FREQUENT_TERMS), e))
    }

    fn score(&self) -> Result<()> {
        let corpus = self.load_corpus()?;
        let options = self.config.preprocess_options()?;
        let lexicon = self.config.lexicon(&options)?;
        lexicon.write_tsv(&self.artifact(LEXICON))?;
        let tokens = self.tokenized(&corpus, &options);
        let scores = lexicon::score_corpus(&tokens, &lexicon);
        lexicon::write_scores_csv(&scores, &self.artifact(SCORES))
    }

    fn bootstrap(&self) -> Result<()> {
        let corpus = self.load_corpus()?;
        let scores = lexicon::read_scores_csv(&self.artifact(SCORES))?;
        let options = self.config.preprocess_options()?;
        let tokens = self.tokenized(&corpus, &options);
        let labeled = classifier::bootstrap_labels(&scores, &tokens)?;
        info!("bootstrap: {} of {} documents labeled", labeled.len(), tokens.len());
        classifier::write_labeled_jsonl(&labeled, &self.artifact(LABELED))
    }

    fn train(&self) -> Result<()> {
        let labeled = classifier::read_labeled_jsonl(&self.artifact(LABELED))?;
        let (train, test) = evaluate::split(&labeled, &self.config.split_spec())?;
        info!("train: {} training / {} test documents", train.len(), test.len());
        let model = classifier::train(&train, &BINARY_CLASSES)?;
        model.save(&self.artifact(MODEL))?;
        classifier::write_labeled_jsonl(&test, &self.artifact(TEST_SET))
    }

    fn evaluate(&self) -> Result<()> {
        let model = NBModel::load(&self.artifact(MODEL))?;
        let test = classifier::read_labeled_jsonl(&self.artifact(TEST_SET))?;
        let tokens: Vec<TokenList> = test.iter().map(|d| d.tokens.clone()).collect();
        let predictions = model.predict_all(&tokens);
        classifier::write_predictions_csv(&model, &predictions, &self.artifact(PREDICTIONS))?;
        let matrix = evaluate::confusion(&predictions, &test, model.classes())?;
        let accuracy = evaluate::accuracy(&matrix)?;
        info!("evaluate: accuracy {accuracy:.4} on {} documents\n{matrix}", test.len());
        matrix.write_csv(&self.artifact(CONFUSION))?;
        matrix.write_fractions_csv(&self.artifact(CONFUSION_FRACTIONS))?;
        let summary = serde_json::json!({
            "accuracy": accuracy,
            "test_documents": test.len(),
            "classes": model.classes(),
            "confusion": matrix,
        });
        write_json(&summary, &self.artifact(EVALUATION))
    }

    fn report(&self) -> Result<()> {
        let corpus = self.load_corpus()?;
        let scores = lexicon::read_scores_csv(&self.artifact(SCORES))?;
        let docs: std::collections::HashMap<&str, &corpus::Document> =
            corpus.documents().iter().map(|d| (d.id.as_str(), d)).collect();
        let lookup = |id: &str| {
            docs.get(id)
                .copied()
                .ok_or_else(|| Error::data(format!("score for unknown document {id:?}")))
        };
        for s in &scores {
            lookup(&s.doc_id)?;
        }

        let by_brand = evaluate::distribution(&scores, |id| {
            let doc = docs.get(id)?;
            Some(doc.brand.clone().unwrap_or_else(|| UNLABELED_GROUP.to_owned()))
        })?;
        by_brand.write_csv(&self.artifact(DISTRIBUTION), "brand")?;

        let with_product: Vec<_> = scores
            .iter()
            .filter(|s| docs.get(s.doc_id.as_str()).is_some_and(|d| d.product.is_some()))
            .cloned()
            .collect();
        let by_product = evaluate::distribution(&with_product, |id| docs.get(id)?.product.clone())?;
        by_product.write_csv(&self.artifact(DISTRIBUTION_PRODUCTS), "product")?;

        let mut ratios = evaluate::ratio_summary(&by_brand);
        ratios.extend(evaluate::ratio_summary(&by_product));
        evaluate::write_ratios_csv(&ratios, &self.artifact(RATIOS))?;

        write_json(
            &serde_json::json!({"brands": by_brand.to_json(), "products": by_product.to_json()}),
            &self.artifact(DISTRIBUTION_JSON),
        )?;

        let hist = evaluate::histogram(&scores);
        hist.write_json(&self.artifact(HISTOGRAM))?;
        hist.write_csv(&self.artifact(HISTOGRAM_CSV))
    }

    fn predict(&self) -> Result<()> {
        let model = NBModel::load(&self.artifact(MODEL))?;
        let corpus = self.load_corpus()?;
        let options = self.config.preprocess_options()?;
        let predictions = model.predict_all(&self.tokenized(&corpus, &options));
        classifier::write_predictions_csv(&model, &predictions, &self.artifact(CORPUS_PREDICTIONS))
    }

    /// Lexicon labels against a three-class Naive Bayes model trained on the
    /// lexicon labels of the whole corpus.
    fn compare(&self) -> Result<()> {
        let corpus = self.load_corpus()?;
        let scores = lexicon::read_scores_csv(&self.artifact(SCORES))?;
        let options = self.config.preprocess_options()?;
        let tokens = self.tokenized(&corpus, &options);
        if scores.len() != tokens.len() {
            return Err(Error::data("scores.csv does not match corpus.jsonl"));
        }
        let examples: Vec<LabeledDoc> = scores
            .iter()
            .zip(&tokens)
            .map(|(s, t)| LabeledDoc::new(t.clone(), s.label.as_str()))
            .collect();
        let classes = Label::ALL.map(Label::as_str);
        let model = classifier::train(&examples, &classes)?;
        let predictions = model.predict_all(&tokens);
        let table = evaluate::compare_methods(&scores, &predictions)?;
        table.write_csv(&self.artifact(COMPARISON), "method")
    }
}

pub fn run_pipeline(config: &PipelineConfig, stages: &[Stage]) -> Result<()> {
    Pipeline::new(config.clone())?.run(stages)
}

/// Writes the `top_k` most frequent terms of a matrix artifact as an
/// annotation-ready candidate lexicon file.
pub fn export_candidate_terms(matrix_path: &Path, top_k: usize, out: &Path) -> Result<Vec<(String, u64)>> {
    if top_k == 0 {
        return Err(Error::config("top_k must be at least 1"));
    }
    if !matrix_path.exists() {
        return Err(Error::MissingArtifact(matrix_path.to_owned()));
    }
    let totals = preprocess::read_term_totals(matrix_path)?;
    if totals.is_empty() {
        return Err(Error::data(format!("{} has no terms", matrix_path.display())));
    }
    let terms = preprocess::rank_terms(&totals, top_k);
    lexicon::write_candidate_terms(&terms, out)?;
    Ok(terms)
}

fn write_json(value: &serde_json::Value, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Internal(e.to_string()))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

fn write_jsonl<T: serde::Serialize>(items: &[T], path: &Path) -> Result<()> {
    let mut text = String::new();
    for item in items {
        text.push_str(&serde_json::to_string(item).map_err(|e| Error::Internal(e.to_string()))?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
