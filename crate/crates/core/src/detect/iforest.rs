//! Isolation forest over sparse rows.
//!
//! Each tree is grown on a subsample of `psi` rows by picking a random
//! feature among those that vary within the node and splitting uniformly
//! between its minimum and maximum, until a row is isolated or the depth
//! ceiling `ceil(log2 psi)` is hit. A document's score is
//! `2^(-E[h] / c(psi))` where `h` is its path length (plus `c(size)` at
//! leaves holding several rows) and `c(n)` the average unsuccessful-search
//! path length of a binary search tree on `n` items.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::{DocTermMatrix, Weighting};

use super::{ScoreVector, Scorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IForestParams {
    pub n_trees: usize,
    pub subsample: usize,
    pub seed: u64,
}

impl Default for IForestParams {
    fn default() -> Self {
        IForestParams {
            n_trees: 100,
            subsample: 256,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        size: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationTree {
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IForestModel {
    trees: Vec<IsolationTree>,
    psi: usize,
    n_terms: usize,
    /// `c(n)` for `n` in `0..=psi`.
    c_table: Vec<f64>,
}

/// `c(n) = 2 H(n-1) - 2 (n-1) / n`, with `c(1) = 0` and `c(2) = 1`.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let m = (n - 1) as f64;
            let harmonic: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
            2.0 * harmonic - 2.0 * m / n as f64
        }
    }
}

struct Builder<'a> {
    data: &'a DocTermMatrix,
    max_depth: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn grow(&mut self, rows: &mut [usize], depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node::Leaf {
            size: rows.len() as u32,
        });
        if rows.len() <= 1 || depth >= self.max_depth {
            return id;
        }

        // (rows holding the feature, min, max) over the node's rows.
        let mut stats: FxHashMap<u32, (usize, f64, f64)> = FxHashMap::default();
        for &r in rows.iter() {
            let (idx, val) = self.data.row(r);
            for (&c, &v) in idx.iter().zip(val) {
                let e = stats.entry(c).or_insert((0, v, v));
                e.0 += 1;
                e.1 = e.1.min(v);
                e.2 = e.2.max(v);
            }
        }
        let n = rows.len();
        let mut candidates: Vec<(u32, f64, f64)> = stats
            .into_iter()
            .filter_map(|(c, (count, lo, hi))| {
                // Rows without the feature hold an implicit zero.
                let lo = if count < n { 0.0 } else { lo };
                (lo < hi).then_some((c, lo, hi))
            })
            .collect();
        if candidates.is_empty() {
            return id;
        }
        candidates.sort_unstable_by_key(|&(c, _, _)| c);
        let (feature, lo, hi) = candidates[self.rng.gen_range(0..candidates.len())];
        let threshold = self.rng.gen_range(lo..hi);

        // Partition in place: values <= threshold go left.
        let mut split = 0;
        for i in 0..n {
            if self.data.get(rows[i], feature as usize) <= threshold {
                rows.swap(i, split);
                split += 1;
            }
        }
        let (l, r) = rows.split_at_mut(split);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id as usize] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

impl IsolationTree {
    fn path_length(&self, idx: &[u32], val: &[f64], c_table: &[f64]) -> f64 {
        let mut node = 0usize;
        let mut depth = 0usize;
        loop {
            match self.nodes[node] {
                Node::Leaf { size } => return depth as f64 + c_table[size as usize],
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let x = match idx.binary_search(&feature) {
                        Ok(i) => val[i],
                        Err(_) => 0.0,
                    };
                    node = if x <= threshold { left } else { right } as usize;
                    depth += 1;
                }
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_single_leaf(&self) -> bool {
        matches!(self.nodes.as_slice(), [Node::Leaf { .. }])
    }
}

impl IForestModel {
    pub fn fit(train: &DocTermMatrix, params: IForestParams) -> Result<Self> {
        let n = train.n_docs();
        if n < 2 {
            return Err(Error::TooFewDocuments { needed: 2, got: n });
        }
        if params.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
        }
        if params.subsample < 2 {
            return Err(Error::InvalidParameter("subsample size must be at least 2".into()));
        }
        let psi = params.subsample.min(n);
        let max_depth = (psi as f64).log2().ceil() as usize;
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
                rng.set_stream(t as u64);
                let mut rows = rand::seq::index::sample(&mut rng, n, psi).into_vec();
                let mut b = Builder {
                    data: train,
                    max_depth,
                    rng,
                    nodes: Vec::new(),
                };
                b.grow(&mut rows, 0);
                IsolationTree { nodes: b.nodes }
            })
            .collect();
        Ok(IForestModel {
            trees,
            psi,
            n_terms: train.n_terms(),
            c_table: (0..=psi).map(average_path_length).collect(),
        })
    }

    pub fn trees(&self) -> &[IsolationTree] {
        &self.trees
    }

    pub fn subsample_size(&self) -> usize {
        self.psi
    }

    /// Mean path length of every document over all trees.
    pub fn mean_path_lengths(&self, docs: &DocTermMatrix) -> Result<Vec<f64>> {
        docs.check_columns(self.n_terms)?;
        let t = self.trees.len() as f64;
        Ok((0..docs.n_docs())
            .into_par_iter()
            .map(|d| {
                let (idx, val) = docs.row(d);
                self.trees
                    .iter()
                    .map(|tree| tree.path_length(idx, val, &self.c_table))
                    .sum::<f64>()
                    / t
            })
            .collect())
    }
}

impl Scorer for IForestModel {
    fn weighting(&self) -> Weighting {
        Weighting::TfIdf
    }

    fn score(&self, docs: &DocTermMatrix) -> Result<ScoreVector> {
        let c = self.c_table[self.psi];
        let scores = self
            .mean_path_lengths(docs)?
            .into_iter()
            .map(|h| 2f64.powf(-h / c))
            .collect();
        Ok(ScoreVector::new(scores))
    }
}
