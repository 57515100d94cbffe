use std::fs;
use std::path::{Path, PathBuf};

use sentilens::classifier;
use sentilens::collector::{ingest_file, FileFormat};
use sentilens::corpus::Corpus;
use sentilens::lexicon::{load_annotated_terms, read_scores_csv, Label, LexiconSource};
use sentilens::pipeline::{self, export_candidate_terms, PipelineConfig, Stage};
use sentilens::Error;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn config(out: &Path) -> PipelineConfig {
    let mut c = PipelineConfig::load(&fixture("pipeline.toml")).unwrap();
    c.output_dir = out.to_path_buf();
    c
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn ingest_jsonl_and_array_files() {
    let three = ingest_file(&fixture("collector/three.jsonl"), FileFormat::Jsonl, true).unwrap();
    assert_eq!((three.records.len(), three.skipped), (3, 0));

    let lenient = ingest_file(&fixture("collector/five_with_bad.jsonl"), FileFormat::Jsonl, false).unwrap();
    assert_eq!((lenient.records.len(), lenient.skipped), (4, 1));
    let strict = ingest_file(&fixture("collector/five_with_bad.jsonl"), FileFormat::Jsonl, true).unwrap_err();
    assert!(matches!(strict, Error::BadLine { line: 3, .. }), "{strict:?}");

    let empty = ingest_file(&fixture("collector/empty.jsonl"), FileFormat::Jsonl, true).unwrap();
    assert!(empty.records.is_empty());

    let array = ingest_file(&fixture("collector/array.json"), FileFormat::JsonArray, true).unwrap();
    assert_eq!(array.records.len(), 2);
    assert!(array.records[0].payload.contains("c1"));

    let missing = ingest_file(&fixture("collector/nope.jsonl"), FileFormat::Jsonl, false).unwrap_err();
    assert_eq!(missing.exit_code(), 3);
}

#[test]
fn default_run_writes_consistent_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    pipeline::run_pipeline(&config(dir.path()), &Stage::DEFAULT_RUN).unwrap();

    let corpus = Corpus::read_jsonl(&dir.path().join(pipeline::CORPUS)).unwrap();
    assert_eq!(corpus.len(), 200);
    let docs = corpus.documents();
    assert_eq!(docs.iter().filter(|d| d.id == "by-001").count(), 1, "duplicate id removed");
    assert!(docs.iter().all(|d| d.id != "by-900"), "empty document dropped");
    assert!(docs.iter().all(|d| !d.text.contains("http") && !d.text.contains('@')));

    let scores = read_scores_csv(&dir.path().join(pipeline::SCORES)).unwrap();
    assert_eq!(scores.len(), 200);
    let labeled = classifier::read_labeled_jsonl(&dir.path().join(pipeline::LABELED)).unwrap();
    let non_neutral = scores.iter().filter(|s| s.label != Label::Neutral).count();
    assert_eq!(labeled.len(), non_neutral);
    for doc in &labeled {
        let s = scores.iter().find(|s| s.doc_id == doc.doc_id()).unwrap();
        assert_eq!(doc.label, if s.score > 0 { "positive" } else { "negative" });
    }

    let test_set = classifier::read_labeled_jsonl(&dir.path().join(pipeline::TEST_SET)).unwrap();
    let expected_test = labeled.len() - config(dir.path()).split_spec().train_size(labeled.len());
    assert_eq!(test_set.len(), expected_test);

    let distribution = read(dir.path(), pipeline::DISTRIBUTION);
    assert!(distribution.starts_with("brand,negative,neutral,positive,row_total\n"));
    assert!(distribution.ends_with(&format!(
        "column_total,{},{},{},200\n",
        scores.iter().filter(|s| s.label == Label::Negative).count(),
        scores.iter().filter(|s| s.label == Label::Neutral).count(),
        scores.iter().filter(|s| s.label == Label::Positive).count()
    )));

    let evaluation: serde_json::Value = serde_json::from_str(&read(dir.path(), pipeline::EVALUATION)).unwrap();
    assert_eq!(evaluation["test_documents"], expected_test);
    let acc = evaluation["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));

    let ratios = read(dir.path(), pipeline::RATIOS);
    assert!(ratios.lines().next() == Some("group,negative:neutral:positive"));
    assert!(ratios.lines().any(|l| l.starts_with("Brand X,1:")));
}

#[test]
fn stage_needs_its_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let err = pipeline::run_pipeline(&config(dir.path()), &[Stage::Score]).unwrap_err();
    assert_eq!(err.exit_code(), 3);
    let text = err.to_string();
    assert!(text.contains("score"), "{text}");
    assert!(text.contains("corpus.jsonl not found") || text.contains("tokens.jsonl not found"), "{text}");

    let err = pipeline::run_pipeline(&config(dir.path()), &[Stage::Train]).unwrap_err();
    assert!(err.to_string().contains("not found"), "{err}");
}

#[test]
fn stages_can_run_one_at_a_time() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline::run_pipeline(&config(a.path()), &Stage::DEFAULT_RUN).unwrap();
    for stage in Stage::DEFAULT_RUN {
        pipeline::run_pipeline(&config(b.path()), &[stage]).unwrap();
    }
    for name in [pipeline::MODEL, pipeline::PREDICTIONS, pipeline::RATIOS, pipeline::MATRIX] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn seed_changes_the_split() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline::run_pipeline(&config(a.path()), &Stage::DEFAULT_RUN).unwrap();
    let mut other = config(b.path());
    other.seed += 1;
    pipeline::run_pipeline(&other, &Stage::DEFAULT_RUN).unwrap();
    assert_eq!(read(a.path(), pipeline::SCORES), read(b.path(), pipeline::SCORES));
    assert_ne!(read(a.path(), pipeline::TEST_SET), read(b.path(), pipeline::TEST_SET));
}

#[test]
fn predict_and_compare_stages() {
    let dir = tempfile::tempdir().unwrap();
    let mut stages = Stage::DEFAULT_RUN.to_vec();
    stages.extend([Stage::Predict, Stage::Compare]);
    pipeline::run_pipeline(&config(dir.path()), &stages).unwrap();
    let predictions = read(dir.path(), pipeline::CORPUS_PREDICTIONS);
    assert_eq!(predictions.lines().count(), 201);
    let comparison = read(dir.path(), pipeline::COMPARISON);
    assert!(comparison.contains("\nLexicon,") && comparison.contains("\nNaive Bayes,"), "{comparison}");
}

#[test]
fn export_terms_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    pipeline::run_pipeline(&config(dir.path()), &[Stage::Collect, Stage::Preprocess]).unwrap();
    let out = dir.path().join(pipeline::CANDIDATE_TERMS);
    let terms = export_candidate_terms(&dir.path().join(pipeline::MATRIX), 10, &out).unwrap();
    assert_eq!(terms.len(), 10);
    assert!(terms.windows(2).all(|w| w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0)));

    // Annotate: first term positive, second negative, the rest left blank.
    let annotated: String = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| match l.split('\t').next() {
            Some(t) if t == terms[0].0 => format!("{l}+\n"),
            Some(t) if t == terms[1].0 => format!("{l}-\n"),
            _ => format!("{l}\n"),
        })
        .collect();
    let path = dir.path().join("annotated.tsv");
    fs::write(&path, annotated).unwrap();
    let lexicon = load_annotated_terms(&path, LexiconSource::Domain).unwrap();
    assert_eq!(lexicon.len(), 2);
    assert_eq!(lexicon.polarity(&terms[0].0).map(|p| p.value()), Some(1));
    assert_eq!(lexicon.polarity(&terms[1].0).map(|p| p.value()), Some(-1));

    assert_eq!(export_candidate_terms(&dir.path().join(pipeline::MATRIX), 0, &out).unwrap_err().exit_code(), 2);
    let missing = export_candidate_terms(&dir.path().join("absent.csv"), 5, &out).unwrap_err();
    assert!(matches!(missing, Error::MissingArtifact(_)));
}

#[test]
fn annotated_terms_join_the_lexicon() {
    let dir = tempfile::tempdir().unwrap();
    let annotated = dir.path().join("domain_terms.tsv");
    fs::write(&annotated, "store\t12\t+\n").unwrap();
    let mut with = config(dir.path());
    with.lexicon.domain_annotated = Some(annotated);
    pipeline::run_pipeline(&with, &[Stage::Collect, Stage::Preprocess, Stage::Score]).unwrap();
    let lexicon = read(dir.path(), pipeline::LEXICON);
    assert!(lexicon.lines().any(|l| l.starts_with("store\t")), "annotated term missing");
}

#[test]
fn config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "sparsity = 0.5\n").unwrap();
    assert_eq!(PipelineConfig::load(&bad).unwrap_err().exit_code(), 2);

    fs::write(&bad, "unknown_key = 1\n[lexicon]\ngeneric = { positive = \"p\", negative = \"n\" }\n[[sources]]\nfile = \"x\"\n").unwrap();
    assert_eq!(PipelineConfig::load(&bad).unwrap_err().exit_code(), 2);

    let mut c = config(dir.path());
    c.sparsity = 1.0;
    assert_eq!(pipeline::Pipeline::new(c).err().unwrap().exit_code(), 2);
    let mut c = config(dir.path());
    c.split.train_fraction = 1.5;
    assert_eq!(pipeline::Pipeline::new(c).err().unwrap().exit_code(), 2);
    assert_eq!(PipelineConfig::load(&dir.path().join("absent.toml")).unwrap_err().exit_code(), 2);
}

#[test]
fn json_config_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let root = fixture("");
    let json = serde_json::json!({
        "output_dir": dir.path(),
        "seed": 7,
        "sources": [{"file": root.join("corpus/brand_x.jsonl"), "brand": "Brand X"}],
        "fields": {"id": "id", "text": "message"},
        "lexicon": {"generic": {
            "positive": root.join("lexicon/generic_positive.txt"),
            "negative": root.join("lexicon/generic_negative.txt")
        }}
    });
    let path = dir.path().join("config.json");
    fs::write(&path, json.to_string()).unwrap();
    let c = PipelineConfig::load(&path).unwrap();
    pipeline::run_pipeline(&c, &[Stage::Collect, Stage::Preprocess, Stage::Score]).unwrap();
    assert_eq!(read_scores_csv(&dir.path().join(pipeline::SCORES)).unwrap().len(), 60);
}
