//! Train/test splitting, confusion matrices, distribution tables and
//! score histograms.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{LabeledDoc, Prediction};
use crate::error::{Error, Result};
use crate::lexicon::{Label, SentimentScore};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.75,
            seed: 0,
            shuffle: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config(format!(
                "train_fraction must be in (0, 1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }

    /// `floor(train_fraction * n + 0.5)`.
    pub fn train_size(&self, n: usize) -> usize {
        (self.train_fraction * n as f64 + 0.5).floor() as usize
    }
}

/// Partitions `examples` into train and test sides. With `shuffle` the
/// order comes from a ChaCha8 permutation seeded by `spec.seed`; otherwise
/// the leading block is the training side.
pub fn split<T: Clone>(examples: &[T], spec: &SplitSpec) -> Result<(Vec<T>, Vec<T>)> {
    spec.validate()?;
    let n = examples.len();
    if n < 2 {
        return Err(Error::data(format!("need at least 2 examples to split, got {n}")));
    }
    let n_train = spec.train_size(n);
    if n_train == 0 || n_train == n {
        return Err(Error::data(format!(
            "split of {n} examples at {} leaves one side empty",
            spec.train_fraction
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if spec.shuffle {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    }
    let pick = |idx: &[usize]| idx.iter().map(|&i| examples[i].clone()).collect();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

/// Counts indexed `[predicted][actual]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new<S: AsRef<str>>(classes: &[S]) -> Self {
        let k = classes.len();
        ConfusionMatrix {
            classes: classes.iter().map(|c| c.as_ref().to_owned()).collect(),
            counts: vec![vec![0; k]; k],
        }
    }

    /// `counts[predicted][actual]`, square in the number of classes.
    pub fn from_counts<S: AsRef<str>>(classes: &[S], counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = classes.len();
        if counts.len() != k || counts.iter().any(|r| r.len() != k) {
            return Err(Error::data(format!("confusion counts must be {k}x{k}")));
        }
        let mut m = Self::new(classes);
        m.counts = counts;
        Ok(m)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn count(&self, predicted: usize, actual: usize) -> u64 {
        self.counts[predicted][actual]
    }

    pub fn row_total(&self, predicted: usize) -> u64 {
        self.counts[predicted].iter().sum()
    }

    pub fn column_total(&self, actual: usize) -> u64 {
        self.counts.iter().map(|r| r[actual]).sum()
    }

    pub fn grand_total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    /// `count(p, a) / column_total(a)`; `None` for an empty column.
    pub fn column_fraction(&self, predicted: usize, actual: usize) -> Option<f64> {
        let total = self.column_total(actual);
        (total > 0).then(|| self.counts[predicted][actual] as f64 / total as f64)
    }

    /// Share of all documents whose actual class is `actual`.
    pub fn column_share(&self, actual: usize) -> Option<f64> {
        let total = self.grand_total();
        (total > 0).then(|| self.column_total(actual) as f64 / total as f64)
    }

    fn position(&self, class: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == class)
    }

    /// Predicted rows, actual columns, with a totals column and row.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let k = self.classes.len();
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["predicted\\actual".to_owned()];
        header.extend(self.classes.iter().cloned());
        header.push("row_total".into());
        w.write_record(&header)?;
        for p in 0..k {
            let mut row = vec![self.classes[p].clone()];
            row.extend(self.counts[p].iter().map(u64::to_string));
            row.push(self.row_total(p).to_string());
            w.write_record(&row)?;
        }
        let mut totals = vec!["column_total".to_owned()];
        totals.extend((0..k).map(|a| self.column_total(a).to_string()));
        totals.push(self.grand_total().to_string());
        w.write_record(&totals)?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Column fractions, rounded to three decimals, plus each column's share
    /// of the grand total.
    pub fn write_fractions_csv(&self, path: &Path) -> Result<()> {
        let k = self.classes.len();
        let fmt = |v: Option<f64>| v.map_or_else(|| "n/a".to_owned(), |v| format!("{v:.3}"));
        let mut w = csv::Writer::from_path(path)?;
        let mut header = vec!["predicted\\actual".to_owned()];
        header.extend(self.classes.iter().cloned());
        w.write_record(&header)?;
        for p in 0..k {
            let mut row = vec![self.classes[p].clone()];
            row.extend((0..k).map(|a| fmt(self.column_fraction(p, a))));
            w.write_record(&row)?;
        }
        let mut shares = vec!["column_share".to_owned()];
        shares.extend((0..k).map(|a| fmt(self.column_share(a))));
        w.write_record(&shares)?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = self.classes.len();
        write!(f, "{:<14}", "pred \\ actual")?;
        for c in &self.classes {
            write!(f, "{c:>16}")?;
        }
        writeln!(f, "{:>12}", "total")?;
        for p in 0..k {
            write!(f, "{:<14}", self.classes[p])?;
            for a in 0..k {
                let frac = self.column_fraction(p, a).unwrap_or(0.0);
                write!(f, "{:>16}", format!("{} {:.3}", self.counts[p][a], frac))?;
            }
            writeln!(f, "{:>12}", self.row_total(p))?;
        }
        write!(f, "{:<14}", "total")?;
        for a in 0..k {
            let share = self.column_share(a).unwrap_or(0.0);
            write!(f, "{:>16}", format!("{} {:.3}", self.column_total(a), share))?;
        }
        write!(f, "{:>12}", self.grand_total())
    }
}

/// Tallies predictions against the labels of the same documents, matched
/// position by position.
pub fn confusion<S: AsRef<str>>(
    predictions: &[Prediction],
    truths: &[LabeledDoc],
    classes: &[S],
) -> Result<ConfusionMatrix> {
    if predictions.is_empty() {
        return Err(Error::data("no predictions to evaluate"));
    }
    if predictions.len() != truths.len() {
        return Err(Error::data(format!(
            "{} predictions but {} labeled documents",
            predictions.len(),
            truths.len()
        )));
    }
    let mut m = ConfusionMatrix::new(classes);
    for (p, t) in predictions.iter().zip(truths) {
        if p.doc_id != t.doc_id() {
            return Err(Error::data(format!(
                "doc_id mismatch: prediction {:?} vs label {:?}",
                p.doc_id,
                t.doc_id()
            )));
        }
        let unknown = |c: &str| Error::data(format!("unknown class {c:?}"));
        let pi = m.position(&p.predicted).ok_or_else(|| unknown(&p.predicted))?;
        let ai = m.position(&t.label).ok_or_else(|| unknown(&t.label))?;
        m.counts[pi][ai] += 1;
    }
    Ok(m)
}

/// Trace over grand total.
pub fn accuracy(matrix: &ConfusionMatrix) -> Result<f64> {
    let total = matrix.grand_total();
    if total == 0 {
        return Err(Error::data("accuracy of an empty confusion matrix"));
    }
    Ok(matrix.trace() as f64 / total as f64)
}

/// Label counts per group (negative, neutral, positive).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DistributionTable {
    groups: Vec<String>,
    counts: Vec<[u64; 3]>,
}

impl DistributionTable {
    pub fn from_counts(rows: &[(&str, [u64; 3])]) -> Self {
        DistributionTable {
            groups: rows.iter().map(|(g, _)| g.to_string()).collect(),
            counts: rows.iter().map(|(_, c)| *c).collect(),
        }
    }

    pub fn groups(&self) -> &[String] {
        &self.groups
    }

    pub fn count(&self, group: usize, label: Label) -> u64 {
        self.counts[group][label.index()]
    }

    pub fn row(&self, group: &str) -> Option<[u64; 3]> {
        self.groups.iter().position(|g| g == group).map(|i| self.counts[i])
    }

    pub fn row_total(&self, group: usize) -> u64 {
        self.counts[group].iter().sum()
    }

    pub fn column_total(&self, label: Label) -> u64 {
        self.counts.iter().map(|r| r[label.index()]).sum()
    }

    pub fn grand_total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    fn row_mut(&mut self, group: &str) -> &mut [u64; 3] {
        let i = match self.groups.iter().position(|g| g == group) {
            Some(i) => i,
            None => {
                self.groups.push(group.to_owned());
                self.counts.push([0; 3]);
                self.groups.len() - 1
            }
        };
        &mut self.counts[i]
    }

    /// Cell-wise sum; groups of `other` missing here are appended.
    pub fn merged(&self, other: &DistributionTable) -> DistributionTable {
        let mut out = self.clone();
        for (g, row) in other.groups.iter().zip(&other.counts) {
            let cells = out.row_mut(g);
            for (cell, n) in cells.iter_mut().zip(row) {
                *cell += n;
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path, group_header: &str) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([group_header, "negative", "neutral", "positive", "row_total"])?;
        for (i, g) in self.groups.iter().enumerate() {
            let c = self.counts[i];
            w.write_record([
                g.clone(),
                c[0].to_string(),
                c[1].to_string(),
                c[2].to_string(),
                self.row_total(i).to_string(),
            ])?;
        }
        w.write_record([
            "column_total".to_owned(),
            self.column_total(Label::Negative).to_string(),
            self.column_total(Label::Neutral).to_string(),
            self.column_total(Label::Positive).to_string(),
            self.grand_total().to_string(),
        ])?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<_> = self
            .groups
            .iter()
            .enumerate()
            .map(|(i, g)| {
                serde_json::json!({
                    "group": g,
                    "negative": self.counts[i][0],
                    "neutral": self.counts[i][1],
                    "positive": self.counts[i][2],
                    "total": self.row_total(i),
                })
            })
            .collect();
        serde_json::json!({
            "rows": rows,
            "column_totals": {
                "negative": self.column_total(Label::Negative),
                "neutral": self.column_total(Label::Neutral),
                "positive": self.column_total(Label::Positive),
            },
            "grand_total": self.grand_total(),
        })
    }
}

/// Counts labels per group; groups come out in lexicographic order.
pub fn distribution<F>(scores: &[SentimentScore], group_of: F) -> Result<DistributionTable>
where
    F: Fn(&str) -> Option<String>,
{
    let mut cells: BTreeMap<String, [u64; 3]> = BTreeMap::new();
    for s in scores {
        let group = group_of(&s.doc_id)
            .ok_or_else(|| Error::data(format!("document {:?} has no group", s.doc_id)))?;
        cells.entry(group).or_insert([0; 3])[s.label.index()] += 1;
    }
    Ok(DistributionTable {
        groups: cells.keys().cloned().collect(),
        counts: cells.into_values().collect(),
    })
}

/// `1 : neutral/negative : positive/negative`, each rounded half-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ratio {
    pub neutral: u64,
    pub positive: u64,
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1:{}:{}", self.neutral, self.positive)
    }
}

fn round_div(numerator: u64, denominator: u64) -> u64 {
    (2 * numerator + denominator) / (2 * denominator)
}

/// One entry per group; `None` where the group has no negative documents.
pub fn ratio_summary(table: &DistributionTable) -> Vec<(String, Option<Ratio>)> {
    table
        .groups
        .iter()
        .zip(&table.counts)
        .map(|(g, &[neg, neu, pos])| {
            let ratio = (neg > 0).then(|| Ratio {
                neutral: round_div(neu, neg),
                positive: round_div(pos, neg),
            });
            (g.clone(), ratio)
        })
        .collect()
}

pub fn write_ratios_csv(ratios: &[(String, Option<Ratio>)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["group", "negative:neutral:positive"])?;
    for (g, r) in ratios {
        let text = r.map_or_else(|| "n/a".to_owned(), |r| r.to_string());
        w.write_record([g.as_str(), &text])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub const LEXICON_METHOD: &str = "Lexicon";
pub const NAIVE_BAYES_METHOD: &str = "Naive Bayes";

/// Label counts of the two methods over the same documents, one row each.
pub fn compare_methods(
    lexicon_scores: &[SentimentScore],
    ml_predictions: &[Prediction],
) -> Result<DistributionTable> {
    let lex_ids: BTreeSet<&str> = lexicon_scores.iter().map(|s| s.doc_id.as_str()).collect();
    let ml_ids: BTreeSet<&str> = ml_predictions.iter().map(|p| p.doc_id.as_str()).collect();
    if lex_ids != ml_ids
        || lex_ids.len() != lexicon_scores.len()
        || ml_ids.len() != ml_predictions.len()
    {
        return Err(Error::data(
            "lexicon scores and classifier predictions cover different documents",
        ));
    }
    let mut table = DistributionTable {
        groups: vec![LEXICON_METHOD.into(), NAIVE_BAYES_METHOD.into()],
        counts: vec![[0; 3]; 2],
    };
    for s in lexicon_scores {
        table.counts[0][s.label.index()] += 1;
    }
    for p in ml_predictions {
        let label: Label = p.predicted.parse()?;
        table.counts[1][label.index()] += 1;
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `(score, count)` ascending by score.
    pub bins: Vec<(i64, u64)>,
    pub summary: Option<FiveNumberSummary>,
}

fn median_of_sorted(v: &[i64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] as f64 + v[n / 2] as f64) / 2.0
    }
}

/// One bin per distinct score. Quartiles are the medians of the lower and
/// upper halves, excluding the overall median when the count is odd.
pub fn histogram(scores: &[SentimentScore]) -> Histogram {
    let mut tally: BTreeMap<i64, u64> = BTreeMap::new();
    for s in scores {
        *tally.entry(s.score).or_insert(0) += 1;
    }
    let mut values: Vec<i64> = scores.iter().map(|s| s.score).collect();
    values.sort_unstable();
    let summary = match values.len() {
        0 => None,
        1 => {
            let v = values[0] as f64;
            Some(FiveNumberSummary { min: v, q1: v, median: v, q3: v, max: v })
        }
        n => {
            let half = n / 2;
            Some(FiveNumberSummary {
                min: values[0] as f64,
                q1: median_of_sorted(&values[..half]),
                median: median_of_sorted(&values),
                q3: median_of_sorted(&values[n - half..]),
                max: values[n - 1] as f64,
            })
        }
    };
    Histogram {
        bins: tally.into_iter().collect(),
        summary,
    }
}

impl Histogram {
    pub fn write_json(&self, path: &Path) -> Result<()> {
        let bins: Vec<_> = self
            .bins
            .iter()
            .map(|(score, count)| serde_json::json!({"score": score, "count": count}))
            .collect();
        let doc = serde_json::json!({"bins": bins, "summary": self.summary});
        let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Internal(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["score", "count"])?;
        for (score, count) in &self.bins {
            w.write_record([score.to_string(), count.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Group lookup by document id, for [`distribution`].
pub fn group_index<'a, I>(pairs: I) -> HashMap<String, String>
where
    I: IntoIterator<Item = (&'a str, &'a str)>,
{
    pairs
        .into_iter()
        .map(|(id, g)| (id.to_owned(), g.to_owned()))
        .collect()
}
