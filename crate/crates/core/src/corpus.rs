//! Cleaned documents and the deduplicated corpus.

use std::collections::HashSet;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::LazyLock;

use chrono::{DateTime, Utc};
use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::collector::{RawRecord, SourceKind};
use crate::error::{Error, Result};
use crate::json_path;

static URL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\b(?:https?://|www\.)\S*").unwrap());
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\B@\w+:?").unwrap());
static RETWEET: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?:^|\s)RT:?(?:\s|$)").unwrap());

/// Removes URLs, @-mentions, the retweet marker `RT` and control
/// characters, decodes HTML entities and collapses whitespace.
///
/// The rules are applied until the text stops changing, so the function is
/// idempotent even when decoding or a removal exposes a new match.
pub fn clean_text(raw_text: &str) -> String {
    let mut current = clean_pass(raw_text);
    loop {
        let next = clean_pass(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

fn clean_pass(text: &str) -> String {
    let decoded = html_escape::decode_html_entities(text);
    let no_urls = URL.replace_all(&decoded, " ");
    let no_mentions = MENTION.replace_all(&no_urls, " ");
    let no_rt = RETWEET.replace_all(&no_mentions, " ");
    no_rt
        .split(|c: char| c.is_whitespace() || c.is_control())
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Whether `text` still contains anything [`clean_text`] would remove.
pub fn has_url_or_mention(text: &str) -> bool {
    URL.is_match(text) || MENTION.is_match(text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub source: SourceKind,
    #[serde(default)]
    pub brand: Option<String>,
    #[serde(default)]
    pub product: Option<String>,
    #[serde(default)]
    pub created_at: Option<DateTime<Utc>>,
}

impl Document {
    pub fn new(id: impl Into<String>, text: &str, source: SourceKind) -> Self {
        Document {
            id: id.into(),
            text: clean_text(text),
            source,
            brand: None,
            product: None,
            created_at: None,
        }
    }
}

/// JSON paths locating each semantic field in a raw payload.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldMap {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub brand: Option<String>,
    #[serde(default)]
    pub product: Option<String>,
    #[serde(default)]
    pub created_at: Option<String>,
}

impl Default for FieldMap {
    fn default() -> Self {
        FieldMap {
            id: "id".into(),
            text: "text".into(),
            brand: None,
            product: None,
            created_at: None,
        }
    }
}

pub fn parse_record(record: &RawRecord, field_map: &FieldMap) -> Result<Document> {
    let payload: serde_json::Value = serde_json::from_str(&record.payload)
        .map_err(|e| Error::data(format!("record payload is not JSON: {e}")))?;
    let id = json_path::lookup_scalar(&payload, &field_map.id)
        .filter(|s| !s.is_empty())
        .ok_or_else(|| Error::data(format!("id path not found: {}", field_map.id)))?;
    let text = json_path::lookup(&payload, &field_map.text)
        .and_then(|v| v.as_str())
        .ok_or_else(|| Error::data(format!("text path not found: {}", field_map.text)))?;

    let optional = |path: &Option<String>| {
        path.as_deref()
            .and_then(|p| json_path::lookup_scalar(&payload, p))
    };
    let created_at = optional(&field_map.created_at).and_then(|s| parse_timestamp(&s));

    Ok(Document {
        id,
        text: clean_text(text),
        source: record.source,
        brand: optional(&field_map.brand),
        product: optional(&field_map.product),
        created_at,
    })
}

/// RFC 3339, the Twitter `created_at` layout, or Graph API's `+0000` offset form.
fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    ["%a %b %d %H:%M:%S %z %Y", "%Y-%m-%dT%H:%M:%S%z"]
        .iter()
        .find_map(|fmt| DateTime::parse_from_str(s, fmt).ok())
        .map(|t| t.with_timezone(&Utc))
}

/// Sets `product` on documents that have none, to the first keyword found
/// in the text (case-insensitive substring match).
pub fn tag_products(documents: &mut [Document], keywords: &[String]) {
    let lowered: Vec<(String, &String)> = keywords.iter().map(|k| (k.to_lowercase(), k)).collect();
    for doc in documents.iter_mut().filter(|d| d.product.is_none()) {
        let text = doc.text.to_lowercase();
        doc.product = lowered
            .iter()
            .find(|(k, _)| !k.is_empty() && text.contains(k.as_str()))
            .map(|(_, k)| (*k).clone());
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
}

impl Corpus {
    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    /// Document count `N`.
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn into_documents(self) -> Vec<Document> {
        self.documents
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        for doc in &self.documents {
            let line = serde_json::to_string(doc).map_err(|e| Error::Internal(e.to_string()))?;
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads a corpus file. Documents are revalidated through
    /// [`build_corpus`].
    pub fn read_jsonl(path: &Path) -> Result<Corpus> {
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
            let doc = serde_json::from_str(&line).map_err(|e| Error::BadLine {
                path: path.to_owned(),
                line: i + 1,
                message: e.to_string(),
            })?;
            docs.push(doc);
        }
        Ok(build_corpus(docs))
    }
}

/// Drops repeated ids (first occurrence wins) and documents with empty text.
pub fn build_corpus(documents: Vec<Document>) -> Corpus {
    let mut seen = HashSet::new();
    let documents = documents
        .into_iter()
        .filter(|d| !d.text.is_empty())
        .filter(|d| seen.insert(d.id.clone()))
        .collect();
    Corpus { documents }
}
