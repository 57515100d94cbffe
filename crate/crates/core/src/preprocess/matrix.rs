use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use super::TokenList;
use crate::error::{Error, Result};

/// Terms in lexicographic order with their document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    df: Vec<usize>,
    n_docs: usize,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn new(terms: Vec<String>, df: Vec<usize>, n_docs: usize) -> Self {
        let index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocabulary {
            terms,
            df,
            n_docs,
            index,
        }
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Corpus size `N`.
    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn df(&self, term: &str) -> Option<usize> {
        self.index.get(term).map(|&i| self.df[i])
    }

    pub fn position(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    /// `log2(N / df(t))`.
    pub fn idf(&self, term: &str) -> Option<f64> {
        self.position(term).map(|i| self.idf_at(i))
    }

    fn idf_at(&self, i: usize) -> f64 {
        (self.n_docs as f64 / self.df[i] as f64).log2()
    }
}

/// Sparse documents x terms matrix of raw counts and tf-idf weights.
///
/// Raw counts are kept for every occurrence; weight cells are stored only
/// when non-zero, so terms present in every document have no weight cells.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    rows: Vec<String>,
    vocabulary: Vocabulary,
    /// Per row, `(term index, count)` sorted by term index.
    tf: Vec<Vec<(usize, u32)>>,
    /// Per row, `(term index, weight)` sorted by term index, weight > 0.
    weights: Vec<Vec<(usize, f64)>>,
}

impl DocTermMatrix {
    pub fn rows(&self) -> &[String] {
        &self.rows
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn n_docs(&self) -> usize {
        self.vocabulary.n_docs
    }

    pub fn tf(&self, row: usize, term: &str) -> u32 {
        let Some(col) = self.vocabulary.position(term) else {
            return 0;
        };
        lookup(&self.tf[row], col).copied().unwrap_or(0)
    }

    /// Stored weight, or `None` when the cell is absent (weight zero).
    pub fn weight(&self, row: usize, term: &str) -> Option<f64> {
        let col = self.vocabulary.position(term)?;
        lookup(&self.weights[row], col).copied()
    }

    /// Stored `(term, weight)` cells of one row.
    pub fn row_weights(&self, row: usize) -> impl Iterator<Item = (&str, f64)> {
        self.weights[row]
            .iter()
            .map(|&(c, w)| (self.vocabulary.terms[c].as_str(), w))
    }

    /// `(term, count)` cells of one row.
    pub fn row_counts(&self, row: usize) -> impl Iterator<Item = (&str, u32)> {
        self.tf[row]
            .iter()
            .map(|&(c, n)| (self.vocabulary.terms[c].as_str(), n))
    }

    pub fn stored_cells(&self) -> usize {
        self.weights.iter().map(Vec::len).sum()
    }

    /// Sum of raw counts per term, over all documents.
    pub fn term_totals(&self) -> BTreeMap<String, u64> {
        let mut totals = vec![0u64; self.vocabulary.len()];
        for row in &self.tf {
            for &(c, n) in row {
                totals[c] += u64::from(n);
            }
        }
        self.vocabulary
            .terms
            .iter()
            .cloned()
            .zip(totals)
            .collect()
    }

    /// Writes the sparse triplets `doc_id,term,tf,weight` (one line per
    /// non-zero count; weight 0 for terms present in every document) and the
    /// vocabulary `term,df`.
    pub fn write_csv(&self, matrix_path: &Path, vocabulary_path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(matrix_path)?;
        w.write_record(["doc_id", "term", "tf", "weight"])?;
        for (row, doc) in self.rows.iter().enumerate() {
            for &(c, n) in &self.tf[row] {
                let weight = lookup(&self.weights[row], c).copied().unwrap_or(0.0);
                w.write_record([
                    doc.as_str(),
                    self.vocabulary.terms[c].as_str(),
                    &n.to_string(),
                    &weight.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(matrix_path, e))?;

        let mut w = csv::Writer::from_path(vocabulary_path)?;
        w.write_record(["term", "df"])?;
        for (term, df) in self.vocabulary.terms.iter().zip(&self.vocabulary.df) {
            w.write_record([term.as_str(), &df.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(vocabulary_path, e))?;
        Ok(())
    }
}

fn lookup<T>(row: &[(usize, T)], col: usize) -> Option<&T> {
    row.binary_search_by_key(&col, |&(c, _)| c)
        .ok()
        .map(|i| &row[i].1)
}

/// Builds raw counts and `tf x log2(N / df)` weights. `N` counts every
/// token list, including empty ones.
pub fn build_matrix(corpus_tokens: &[TokenList]) -> Result<DocTermMatrix> {
    let per_doc: Vec<BTreeMap<&str, u32>> = corpus_tokens
        .iter()
        .map(|doc| {
            let mut counts = BTreeMap::new();
            for t in &doc.tokens {
                *counts.entry(t.as_str()).or_insert(0) += 1;
            }
            counts
        })
        .collect();

    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for counts in &per_doc {
        for term in counts.keys() {
            *df.entry(term).or_insert(0) += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::data("empty vocabulary"));
    }

    let (terms, dfs): (Vec<String>, Vec<usize>) =
        df.into_iter().map(|(t, n)| (t.to_owned(), n)).unzip();
    let vocabulary = Vocabulary::new(terms, dfs, corpus_tokens.len());

    let mut tf = Vec::with_capacity(per_doc.len());
    let mut weights = Vec::with_capacity(per_doc.len());
    for counts in &per_doc {
        let row_tf: Vec<(usize, u32)> = counts
            .iter()
            .map(|(t, &n)| (vocabulary.index[*t], n))
            .collect();
        let row_w = row_tf
            .iter()
            .map(|&(c, n)| (c, f64::from(n) * vocabulary.idf_at(c)))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        tf.push(row_tf);
        weights.push(row_w);
    }

    Ok(DocTermMatrix {
        rows: corpus_tokens.iter().map(|d| d.doc_id.clone()).collect(),
        vocabulary,
        tf,
        weights,
    })
}

/// Keeps the terms whose document fraction `df / N` exceeds
/// `1 - max_sparsity`. Counts, weights, `df` and `N` are unchanged.
pub fn prune_sparse(matrix: &DocTermMatrix, max_sparsity: f64) -> Result<DocTermMatrix> {
    if !(0.0..1.0).contains(&max_sparsity) {
        return Err(Error::config(format!(
            "max_sparsity must be in [0, 1), got {max_sparsity}"
        )));
    }
    let vocab = &matrix.vocabulary;
    let min_df = (1.0 - max_sparsity) * vocab.n_docs as f64;
    let mut remap = vec![None; vocab.len()];
    let mut terms = Vec::new();
    let mut dfs = Vec::new();
    for (i, (term, &df)) in vocab.terms.iter().zip(&vocab.df).enumerate() {
        if df as f64 > min_df {
            remap[i] = Some(terms.len());
            terms.push(term.clone());
            dfs.push(df);
        }
    }
    if terms.is_empty() {
        return Err(Error::data("empty vocabulary after pruning"));
    }

    fn keep<T: Copy>(row: &[(usize, T)], remap: &[Option<usize>]) -> Vec<(usize, T)> {
        row.iter()
            .filter_map(|&(c, v)| remap[c].map(|nc| (nc, v)))
            .collect()
    }

    Ok(DocTermMatrix {
        rows: matrix.rows.clone(),
        vocabulary: Vocabulary::new(terms, dfs, vocab.n_docs),
        tf: matrix.tf.iter().map(|r| keep(r, &remap)).collect(),
        weights: matrix.weights.iter().map(|r| keep(r, &remap)).collect(),
    })
}

/// Terms by total count, descending, ties broken by term ascending.
pub fn rank_terms(totals: &BTreeMap<String, u64>, top_k: usize) -> Vec<(String, u64)> {
    let mut ranked: Vec<(String, u64)> = totals.iter().map(|(t, &n)| (t.clone(), n)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(top_k);
    ranked
}

pub fn frequent_terms(matrix: &DocTermMatrix, top_k: usize) -> Vec<(String, u64)> {
    rank_terms(&matrix.term_totals(), top_k)
}

/// Per-term count totals recovered from a triplet CSV written by
/// [`DocTermMatrix::write_csv`].
pub fn read_term_totals(matrix_path: &Path) -> Result<BTreeMap<String, u64>> {
    let mut reader = csv::Reader::from_path(matrix_path)?;
    let mut totals = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let (Some(term), Some(tf)) = (record.get(1), record.get(2)) else {
            return Err(Error::data(format!(
                "{}: short row {:?}",
                matrix_path.display(),
                record
            )));
        };
        let tf: u64 = tf
            .parse()
            .map_err(|_| Error::data(format!("{}: bad tf {tf:?}", matrix_path.display())))?;
        *totals.entry(term.to_owned()).or_insert(0) += tf;
    }
    Ok(totals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn docs(spec: &[&[&str]]) -> Vec<TokenList> {
        spec.iter()
            .enumerate()
            .map(|(i, toks)| {
                TokenList::new(
                    format!("d{i}"),
                    toks.iter().map(|s| s.to_string()).collect(),
                )
            })
            .collect()
    }

    #[test]
    fn single_document_term() {
        let m = build_matrix(&docs(&[&["x", "x", "x", "a"], &["a"], &["a"], &["a", "b"]])).unwrap();
        assert_eq!(m.n_docs(), 4);
        assert_eq!(m.weight(0, "x"), Some(6.0));
        assert_eq!(m.tf(0, "x"), 3);
        assert_eq!(m.vocabulary().idf("b"), Some(2.0));
    }

    #[test]
    fn ubiquitous_term_has_no_cells() {
        let m = build_matrix(&docs(&[&["a", "b"], &["a"], &["a", "a"]])).unwrap();
        assert_eq!(m.vocabulary().idf("a"), Some(0.0));
        for row in 0..3 {
            assert_eq!(m.weight(row, "a"), None);
        }
        assert_eq!(m.tf(2, "a"), 2);
        assert_eq!(m.stored_cells(), 1);
    }

    #[test]
    fn empty_row_and_empty_vocabulary() {
        let m = build_matrix(&docs(&[&["a"], &[], &["b"]])).unwrap();
        assert_eq!(m.n_docs(), 3);
        assert_eq!(m.row_weights(1).count(), 0);
        let err = build_matrix(&docs(&[&[], &[]])).unwrap_err();
        assert_eq!(err.to_string(), "data error: empty vocabulary");
    }

    fn synthetic_df(n_docs: usize, dfs: &[(&str, usize)]) -> DocTermMatrix {
        let mut lists: Vec<Vec<&str>> = vec![Vec::new(); n_docs];
        for &(term, df) in dfs {
            for list in lists.iter_mut().take(df) {
                list.push(term);
            }
        }
        let lists: Vec<TokenList> = lists
            .into_iter()
            .enumerate()
            .map(|(i, l)| TokenList::new(format!("d{i}"), l.iter().map(|s| s.to_string()).collect()))
            .collect();
        build_matrix(&lists).unwrap()
    }

    #[test]
    fn prune_threshold_arithmetic() {
        let m = synthetic_df(1000, &[("rare", 5), ("edge", 10), ("kept", 11), ("common", 700)]);
        let p = prune_sparse(&m, 0.99).unwrap();
        assert_eq!(p.vocabulary().terms(), ["common", "kept"]);
        assert_eq!(p.n_docs(), 1000);
        assert_eq!(p.vocabulary().df("kept"), Some(11));
        assert_eq!(p.weight(0, "kept"), m.weight(0, "kept"));
    }

    #[test]
    fn prune_boundaries() {
        // With max_sparsity 0 the retention test df/N > 1 cannot hold.
        let m = build_matrix(&docs(&[&["a", "b"], &["a", "c"]])).unwrap();
        assert_eq!(
            prune_sparse(&m, 0.0).unwrap_err().to_string(),
            "data error: empty vocabulary after pruning"
        );
        let p = prune_sparse(&m, 1e-9).unwrap();
        assert_eq!(p.vocabulary().terms(), ["a"]);
        assert!(prune_sparse(&m, 1.0).is_err());
        assert!(prune_sparse(&m, -0.1).is_err());
    }

    #[test]
    fn frequent_terms_tie_break() {
        let m = build_matrix(&docs(&[&["a", "a", "b", "c"], &["b", "b", "a", "a", "a", "c"]])).unwrap();
        assert_eq!(
            frequent_terms(&m, 2),
            [("a".to_string(), 5), ("b".to_string(), 3)]
        );
        let totals: BTreeMap<String, u64> =
            [("c", 2), ("b", 5), ("a", 5)].iter().map(|&(t, n)| (t.to_string(), n)).collect();
        assert_eq!(rank_terms(&totals, 2), [("a".to_string(), 5), ("b".to_string(), 5)]);
        assert_eq!(rank_terms(&totals, 10).len(), 3);
    }

    #[test]
    fn csv_totals_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = build_matrix(&docs(&[&["a", "a", "b"], &["a", "c"]])).unwrap();
        let (mp, vp) = (dir.path().join("m.csv"), dir.path().join("v.csv"));
        m.write_csv(&mp, &vp).unwrap();
        assert_eq!(read_term_totals(&mp).unwrap(), m.term_totals());
        let vocab = std::fs::read_to_string(&vp).unwrap();
        assert_eq!(vocab, "term,df\na,2\nb,1\nc,1\n");
    }

    fn corpus_strategy() -> impl Strategy<Value = Vec<Vec<u8>>> {
        prop::collection::vec(prop::collection::vec(0u8..12, 0..8), 1..10)
    }

    proptest! {
        #[test]
        fn permuting_documents_keeps_weights(corpus in corpus_strategy(), seed in any::<u64>()) {
            prop_assume!(corpus.iter().any(|d| !d.is_empty()));
            let lists: Vec<TokenList> = corpus.iter().enumerate()
                .map(|(i, d)| TokenList::new(format!("d{i}"), d.iter().map(|t| format!("t{t}")).collect()))
                .collect();
            let mut shuffled = lists.clone();
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = build_matrix(&lists).unwrap();
            let b = build_matrix(&shuffled).unwrap();
            prop_assert_eq!(a.vocabulary().terms(), b.vocabulary().terms());
            for (i, doc) in a.rows().iter().enumerate() {
                let j = b.rows().iter().position(|r| r == doc).unwrap();
                let wa: Vec<_> = a.row_weights(i).collect();
                let wb: Vec<_> = b.row_weights(j).collect();
                prop_assert_eq!(wa, wb);
            }
        }

        #[test]
        fn prune_is_monotone(corpus in corpus_strategy(), lo in 0.0f64..0.99, delta in 0.0f64..0.5) {
            prop_assume!(corpus.iter().any(|d| !d.is_empty()));
            let hi = (lo + delta).min(0.999);
            let lists: Vec<TokenList> = corpus.iter().enumerate()
                .map(|(i, d)| TokenList::new(format!("d{i}"), d.iter().map(|t| format!("t{t}")).collect()))
                .collect();
            let m = build_matrix(&lists).unwrap();
            if let Ok(low) = prune_sparse(&m, lo) {
                let high = prune_sparse(&m, hi).unwrap();
                for t in low.vocabulary().terms() {
                    prop_assert!(high.vocabulary().position(t).is_some());
                }
            }
        }

        #[test]
        fn weights_positive_and_match_counts(corpus in corpus_strategy()) {
            prop_assume!(corpus.iter().any(|d| !d.is_empty()));
            let lists: Vec<TokenList> = corpus.iter().enumerate()
                .map(|(i, d)| TokenList::new(format!("d{i}"), d.iter().map(|t| format!("t{t}")).collect()))
                .collect();
            let m = build_matrix(&lists).unwrap();
            for row in 0..m.rows().len() {
                for (term, n) in m.row_counts(row) {
                    let df = m.vocabulary().df(term).unwrap();
                    prop_assert!(df >= 1 && df <= m.n_docs());
                    match m.weight(row, term) {
                        Some(w) => prop_assert!(w > 0.0),
                        None => prop_assert_eq!(df, m.n_docs()),
                    }
                    prop_assert!(n > 0);
                }
            }
        }
    }
}
