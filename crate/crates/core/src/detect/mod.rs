//! Anomaly scorers. Every scorer returns one finite score per document, with
//! larger meaning more anomalous.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::{DocTermMatrix, Weighting};

pub mod iforest;
pub mod kmeans;
pub mod oovd;
pub mod rarity;

pub use iforest::{IForestModel, IForestParams};
pub use kmeans::{KMeansModel, KMeansParams};
pub use oovd::{oovd_score, Oovd};
pub use rarity::{RarityDenominator, RarityModel};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(Vec<f64>);

impl ScoreVector {
    pub fn new(scores: Vec<f64>) -> Self {
        debug_assert!(scores.iter().all(|s| s.is_finite()));
        ScoreVector(scores)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl std::ops::Deref for ScoreVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A fitted scorer.
pub trait Scorer {
    /// Weighting the scorer expects its input matrix to use.
    fn weighting(&self) -> Weighting;

    fn score(&self, docs: &DocTermMatrix) -> Result<ScoreVector>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Oovd,
    Rm,
    KMeans,
    IForest,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [
        ModelKind::Oovd,
        ModelKind::Rm,
        ModelKind::KMeans,
        ModelKind::IForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Oovd => "oovd",
            ModelKind::Rm => "rm",
            ModelKind::KMeans => "kmeans",
            ModelKind::IForest => "iforest",
        }
    }

    pub fn weighting(self) -> Weighting {
        match self {
            ModelKind::Oovd => Weighting::Count,
            _ => Weighting::TfIdf,
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "oovd" | "oov" => Ok(ModelKind::Oovd),
            "rm" | "rarity" => Ok(ModelKind::Rm),
            "kmeans" => Ok(ModelKind::KMeans),
            "iforest" | "if" | "isolationforest" => Ok(ModelKind::IForest),
            _ => Err(Error::Config(format!("unknown model `{s}`"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub(crate) fn sparse_dot(idx: &[u32], val: &[f64], dense: &[f64]) -> f64 {
    idx.iter().zip(val).map(|(&c, &v)| v * dense[c as usize]).sum()
}
