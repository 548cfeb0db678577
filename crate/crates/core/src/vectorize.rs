//! Vocabulary fitting and sparse count / tf-idf document-term matrices.
//!
//! Matrices are stored row-compressed. Terms outside the fitted vocabulary
//! get no column, but every document remembers how many terms it had before
//! that filtering (`doc_token_totals`), so the number of out-of-vocabulary
//! terms of a row is `total - row_sum` of its count row.

use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::represent::Document;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Weighting {
    Count,
    TfIdf,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    term_to_col: FxHashMap<String, u32>,
    terms: Vec<String>,
    train_doc_count: usize,
    doc_freq: Vec<u64>,
    term_total: Vec<u64>,
    corpus_total: u64,
}

impl Vocabulary {
    /// A vocabulary without terms; every term is out of vocabulary.
    pub fn empty() -> Self {
        Vocabulary::default()
    }

    /// Columns follow first appearance in `train_docs`.
    pub fn fit<D: Document>(train_docs: &[D]) -> Result<Self> {
        if train_docs.is_empty() {
            return Err(Error::EmptyVocabulary("no training documents"));
        }
        let mut v = Vocabulary {
            train_doc_count: train_docs.len(),
            ..Vocabulary::default()
        };
        // Last document index that touched each column, for document frequency.
        let mut seen_in: Vec<usize> = Vec::new();
        for (d, doc) in train_docs.iter().enumerate() {
            doc.for_each_term(&mut |t| {
                let col = match v.term_to_col.get(t) {
                    Some(&c) => c as usize,
                    None => {
                        let c = v.terms.len();
                        v.term_to_col.insert(t.to_owned(), c as u32);
                        v.terms.push(t.to_owned());
                        v.doc_freq.push(0);
                        v.term_total.push(0);
                        seen_in.push(usize::MAX);
                        c
                    }
                };
                v.term_total[col] += 1;
                if seen_in[col] != d {
                    seen_in[col] = d;
                    v.doc_freq[col] += 1;
                }
            });
        }
        v.corpus_total = v.term_total.iter().sum();
        if v.corpus_total == 0 {
            return Err(Error::EmptyVocabulary("every training document is empty"));
        }
        Ok(v)
    }

    pub fn n_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn col(&self, term: &str) -> Option<usize> {
        self.term_to_col.get(term).map(|&c| c as usize)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn train_doc_count(&self) -> usize {
        self.train_doc_count
    }

    pub fn doc_freq(&self) -> &[u64] {
        &self.doc_freq
    }

    pub fn term_total(&self) -> &[u64] {
        &self.term_total
    }

    pub fn corpus_total(&self) -> u64 {
        self.corpus_total
    }

    /// Smoothed idf: `ln((1 + n) / (1 + df)) + 1` over training documents.
    pub fn idf(&self) -> Vec<f64> {
        let n = self.train_doc_count as f64;
        self.doc_freq
            .iter()
            .map(|&df| ((1.0 + n) / (1.0 + df as f64)).ln() + 1.0)
            .collect()
    }
}

/// Row-compressed sparse matrix with strictly increasing columns per row and
/// strictly positive stored values.
#[derive(Debug, Clone, PartialEq)]
pub struct DocTermMatrix {
    n_terms: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    values: Vec<f64>,
    weighting: Weighting,
    doc_token_totals: Vec<u64>,
    doc_in_vocab_totals: Vec<u64>,
}

impl DocTermMatrix {
    pub fn n_docs(&self) -> usize {
        self.doc_token_totals.len()
    }

    pub fn n_terms(&self) -> usize {
        self.n_terms
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, d: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.indptr[d], self.indptr[d + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = (&[u32], &[f64])> + '_ {
        (0..self.n_docs()).map(move |d| self.row(d))
    }

    /// Value at `(d, col)`, zero when not stored.
    pub fn get(&self, d: usize, col: usize) -> f64 {
        let (idx, val) = self.row(d);
        match idx.binary_search(&(col as u32)) {
            Ok(i) => val[i],
            Err(_) => 0.0,
        }
    }

    pub fn doc_token_totals(&self) -> &[u64] {
        &self.doc_token_totals
    }

    /// In-vocabulary term occurrences per document.
    pub fn doc_in_vocab_totals(&self) -> &[u64] {
        &self.doc_in_vocab_totals
    }

    pub fn row_sum(&self, d: usize) -> f64 {
        self.row(d).1.iter().sum()
    }

    /// Builds a matrix from dense rows; zeros are dropped, negative or
    /// non-finite values are rejected. Token totals are the nonzero counts.
    pub fn from_dense(rows: &[Vec<f64>], n_terms: usize, weighting: Weighting) -> Result<Self> {
        let mut m = DocTermMatrix::empty(n_terms, weighting);
        for row in rows {
            if row.len() != n_terms {
                return Err(Error::DimensionMismatch {
                    expected: n_terms,
                    actual: row.len(),
                });
            }
            let mut nnz = 0;
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidMatrix(format!("value {v} is not a finite non-negative number")));
                }
                if v > 0.0 {
                    m.indices.push(c as u32);
                    m.values.push(v);
                    nnz += 1;
                }
            }
            m.indptr.push(m.indices.len());
            m.doc_token_totals.push(nnz);
            m.doc_in_vocab_totals.push(nnz);
        }
        Ok(m)
    }

    /// Same matrix with rows reordered: row `i` of the result is row
    /// `order[i]` of `self`.
    pub fn select_rows(&self, order: &[usize]) -> Self {
        let mut m = DocTermMatrix::empty(self.n_terms, self.weighting);
        for &d in order {
            let (idx, val) = self.row(d);
            m.indices.extend_from_slice(idx);
            m.values.extend_from_slice(val);
            m.indptr.push(m.indices.len());
            m.doc_token_totals.push(self.doc_token_totals[d]);
            m.doc_in_vocab_totals.push(self.doc_in_vocab_totals[d]);
        }
        m
    }

    pub fn to_dense_row(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.n_terms];
        let (idx, val) = self.row(d);
        for (&c, &v) in idx.iter().zip(val) {
            out[c as usize] = v;
        }
        out
    }

    fn empty(n_terms: usize, weighting: Weighting) -> Self {
        DocTermMatrix {
            n_terms,
            indptr: vec![0],
            indices: Vec::new(),
            values: Vec::new(),
            weighting,
            doc_token_totals: Vec::new(),
            doc_in_vocab_totals: Vec::new(),
        }
    }

    fn append(&mut self, mut other: DocTermMatrix) {
        let offset = self.indices.len();
        self.indices.append(&mut other.indices);
        self.values.append(&mut other.values);
        self.indptr
            .extend(other.indptr.iter().skip(1).map(|p| p + offset));
        self.doc_token_totals.append(&mut other.doc_token_totals);
        self.doc_in_vocab_totals.append(&mut other.doc_in_vocab_totals);
    }

    pub fn check_columns(&self, expected: usize) -> Result<()> {
        if self.n_terms != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: self.n_terms,
            });
        }
        Ok(())
    }

    pub fn require(&self, weighting: Weighting) -> Result<()> {
        if self.weighting != weighting {
            return Err(Error::WrongWeighting {
                expected: weighting,
                actual: self.weighting,
            });
        }
        Ok(())
    }
}

const CHUNK: usize = 4096;

fn transform<D: Document>(
    v: &Vocabulary,
    docs: &[D],
    weighting: Weighting,
    weigh: impl Fn(&mut [(u32, f64)]) + Sync,
) -> DocTermMatrix {
    let parts: Vec<DocTermMatrix> = docs
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut m = DocTermMatrix::empty(v.n_terms(), weighting);
            let mut cols: Vec<u32> = Vec::new();
            let mut row: Vec<(u32, f64)> = Vec::new();
            for doc in chunk {
                cols.clear();
                row.clear();
                let mut total = 0u64;
                doc.for_each_term(&mut |t| {
                    total += 1;
                    if let Some(&c) = v.term_to_col.get(t) {
                        cols.push(c);
                    }
                });
                cols.sort_unstable();
                for &c in &cols {
                    match row.last_mut() {
                        Some((last, n)) if *last == c => *n += 1.0,
                        _ => row.push((c, 1.0)),
                    }
                }
                weigh(&mut row);
                for &(c, x) in &row {
                    m.indices.push(c);
                    m.values.push(x);
                }
                m.indptr.push(m.indices.len());
                m.doc_token_totals.push(total);
                m.doc_in_vocab_totals.push(cols.len() as u64);
            }
            m
        })
        .collect();
    let mut out = DocTermMatrix::empty(v.n_terms(), weighting);
    for p in parts {
        out.append(p);
    }
    out
}

/// In-vocabulary term counts per document.
pub fn count_transform<D: Document>(v: &Vocabulary, docs: &[D]) -> DocTermMatrix {
    transform(v, docs, Weighting::Count, |_| {})
}

/// Raw in-vocabulary counts times training idf, each row scaled to unit L2
/// norm (all-zero rows stay empty).
pub fn tfidf_transform<D: Document>(v: &Vocabulary, docs: &[D]) -> DocTermMatrix {
    let idf = v.idf();
    transform(v, docs, Weighting::TfIdf, |row| {
        let mut norm = 0.0;
        for (c, x) in row.iter_mut() {
            *x *= idf[*c as usize];
            norm += *x * *x;
        }
        if norm > 0.0 {
            let norm = norm.sqrt();
            for (_, x) in row.iter_mut() {
                *x /= norm;
            }
        }
    })
}
