//! Out-of-vocabulary detector: the score of a document is the number of its
//! terms that never occurred in training. Only meaningful when the training
//! data holds no anomalies.

use crate::error::Result;
use crate::vectorize::{DocTermMatrix, Vocabulary, Weighting};

use super::{ScoreVector, Scorer};

#[derive(Debug, Clone, PartialEq)]
pub struct Oovd {
    n_terms: usize,
}

impl Oovd {
    pub fn fit(v: &Vocabulary) -> Self {
        Oovd {
            n_terms: v.n_terms(),
        }
    }
}

impl Scorer for Oovd {
    fn weighting(&self) -> Weighting {
        Weighting::Count
    }

    fn score(&self, docs: &DocTermMatrix) -> Result<ScoreVector> {
        docs.check_columns(self.n_terms)?;
        oovd_score(docs)
    }
}

/// `total terms - in-vocabulary terms` per row of a count matrix.
pub fn oovd_score(docs: &DocTermMatrix) -> Result<ScoreVector> {
    docs.require(Weighting::Count)?;
    Ok(ScoreVector::new(
        (0..docs.n_docs())
            .map(|d| docs.doc_token_totals()[d] as f64 - docs.row_sum(d))
            .collect(),
    ))
}
