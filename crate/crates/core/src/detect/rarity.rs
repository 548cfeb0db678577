//! Rarity model. Each training term gets `r(t) = -ln(share of t among all
//! training term occurrences)`; a document scores the dot product of its
//! tf-idf row with `r`, divided by its term count. Unseen terms have no column
//! and contribute nothing to the numerator.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::{DocTermMatrix, Vocabulary, Weighting};

use super::{sparse_dot, ScoreVector, Scorer};

/// What the dot product is divided by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RarityDenominator {
    /// Every term of the document, out-of-vocabulary ones included.
    #[default]
    AllTerms,
    /// In-vocabulary terms only.
    InVocabulary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RarityModel {
    rarity: Vec<f64>,
    denominator: RarityDenominator,
}

impl RarityModel {
    pub fn fit(v: &Vocabulary) -> Result<Self> {
        if v.corpus_total() == 0 {
            return Err(Error::EmptyVocabulary("rarity needs a non-empty training corpus"));
        }
        let total = v.corpus_total() as f64;
        let rarity = v
            .term_total()
            .iter()
            .map(|&n| (total / n as f64).ln())
            .collect();
        Ok(RarityModel {
            rarity,
            denominator: RarityDenominator::AllTerms,
        })
    }

    pub fn with_denominator(mut self, denominator: RarityDenominator) -> Self {
        self.denominator = denominator;
        self
    }

    pub fn rarity(&self) -> &[f64] {
        &self.rarity
    }

    /// Multiplies every rarity value by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        RarityModel {
            rarity: self.rarity.iter().map(|r| r * factor).collect(),
            denominator: self.denominator,
        }
    }
}

impl Scorer for RarityModel {
    fn weighting(&self) -> Weighting {
        Weighting::TfIdf
    }

    fn score(&self, docs: &DocTermMatrix) -> Result<ScoreVector> {
        docs.require(Weighting::TfIdf)?;
        docs.check_columns(self.rarity.len())?;
        let scores = (0..docs.n_docs())
            .into_par_iter()
            .map(|d| {
                let (idx, val) = docs.row(d);
                let terms = match self.denominator {
                    RarityDenominator::AllTerms => docs.doc_token_totals()[d],
                    RarityDenominator::InVocabulary => docs.doc_in_vocab_totals()[d],
                };
                if terms == 0 {
                    0.0
                } else {
                    sparse_dot(idx, val, &self.rarity) / terms as f64
                }
            })
            .collect();
        Ok(ScoreVector::new(scores))
    }
}
