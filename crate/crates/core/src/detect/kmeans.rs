//! Lloyd's k-means over sparse rows with dense centroids. The anomaly score of
//! a document is its Euclidean distance to the nearest centroid.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vectorize::{DocTermMatrix, Weighting};

use super::{sparse_dot, ScoreVector, Scorer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub k: usize,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        KMeansParams {
            k: 8,
            max_iter: 100,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansModel {
    centroids: Vec<Vec<f64>>,
    centroid_sq_norms: Vec<f64>,
    n_iter: usize,
    seed: u64,
}

/// Squared distance through `|x|^2 + |c|^2 - 2 x.c`, clamped at zero.
fn sq_dist(x_sq: f64, idx: &[u32], val: &[f64], c: &[f64], c_sq: f64) -> f64 {
    (x_sq + c_sq - 2.0 * sparse_dot(idx, val, c)).max(0.0)
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn nearest(x_sq: f64, idx: &[u32], val: &[f64], centroids: &[Vec<f64>], c_sq: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(x_sq, idx, val, c, c_sq[j]);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Documents per partial sum in the centroid update; fixed so the reduction
/// order does not depend on the thread count.
const UPDATE_CHUNK: usize = 8192;

impl KMeansModel {
    pub fn fit(train: &DocTermMatrix, params: KMeansParams) -> Result<Self> {
        let n = train.n_docs();
        let k = params.k;
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if k > n {
            return Err(Error::TooFewDocuments { needed: k, got: n });
        }
        let dim = train.n_terms();
        let row_sq: Vec<f64> = train.rows().map(|(_, v)| sq_norm(v)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

        let mut centroids = plus_plus_init(train, &row_sq, k, &mut rng);
        let mut c_sq: Vec<f64> = centroids.iter().map(|c| sq_norm(c)).collect();
        let mut assign = vec![usize::MAX; n];
        let mut n_iter = 0;

        for _ in 0..params.max_iter {
            n_iter += 1;
            let step: Vec<(usize, f64)> = (0..n)
                .into_par_iter()
                .map(|d| {
                    let (idx, val) = train.row(d);
                    nearest(row_sq[d], idx, val, &centroids, &c_sq)
                })
                .collect();
            let changed = step.iter().zip(&assign).any(|((j, _), &a)| *j != a);
            for (a, (j, _)) in assign.iter_mut().zip(&step) {
                *a = *j;
            }

            let partials: Vec<(Vec<f64>, Vec<usize>)> = (0..n)
                .collect::<Vec<_>>()
                .par_chunks(UPDATE_CHUNK)
                .map(|chunk| {
                    let mut sums = vec![0.0; k * dim];
                    let mut counts = vec![0usize; k];
                    for &d in chunk {
                        let j = assign[d];
                        counts[j] += 1;
                        let (idx, val) = train.row(d);
                        let base = j * dim;
                        for (&c, &v) in idx.iter().zip(val) {
                            sums[base + c as usize] += v;
                        }
                    }
                    (sums, counts)
                })
                .collect();
            let mut sums = vec![0.0; k * dim];
            let mut counts = vec![0usize; k];
            for (s, c) in partials {
                for (a, b) in sums.iter_mut().zip(&s) {
                    *a += b;
                }
                for (a, b) in counts.iter_mut().zip(&c) {
                    *a += b;
                }
            }

            // Empty clusters are reseeded at the points farthest from their
            // current centroid.
            let mut repaired = false;
            let mut taken = vec![false; n];
            for j in 0..k {
                if counts[j] > 0 {
                    let inv = 1.0 / counts[j] as f64;
                    centroids[j] = sums[j * dim..(j + 1) * dim].iter().map(|s| s * inv).collect();
                } else {
                    let far = (0..n)
                        .filter(|&d| !taken[d])
                        .max_by(|&a, &b| step[a].1.total_cmp(&step[b].1).then(b.cmp(&a)))
                        .expect("k <= n leaves a free point");
                    taken[far] = true;
                    centroids[j] = train.to_dense_row(far);
                    repaired = true;
                }
                c_sq[j] = sq_norm(&centroids[j]);
            }
            if !changed && !repaired {
                break;
            }
        }

        Ok(KMeansModel {
            centroids,
            centroid_sq_norms: c_sq,
            n_iter,
            seed: params.seed,
        })
    }

    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn centroids(&self) -> &[Vec<f64>] {
        &self.centroids
    }

    pub fn n_iter(&self) -> usize {
        self.n_iter
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// k-means++ seeding: each further centroid is a training row drawn with
/// probability proportional to its squared distance to the chosen ones.
fn plus_plus_init(train: &DocTermMatrix, row_sq: &[f64], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = train.n_docs();
    let mut chosen = vec![false; n];
    let first = rng.gen_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![train.to_dense_row(first)];
    let mut d2: Vec<f64> = vec![f64::INFINITY; n];
    while centroids.len() < k {
        let c = centroids.last().expect("at least one centroid");
        let c_sq = sq_norm(c);
        d2.par_iter_mut().enumerate().for_each(|(d, slot)| {
            let (idx, val) = train.row(d);
            *slot = slot.min(sq_dist(row_sq[d], idx, val, c, c_sq));
        });
        let total: f64 = d2.iter().enumerate().filter(|(d, _)| !chosen[*d]).map(|(_, x)| x).sum();
        let pick = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = None;
            for (d, &x) in d2.iter().enumerate() {
                if chosen[d] || x <= 0.0 {
                    continue;
                }
                pick = Some(d);
                if target < x {
                    break;
                }
                target -= x;
            }
            pick.expect("positive total has a positive entry")
        } else {
            // Every remaining row duplicates a centroid.
            let free: Vec<usize> = (0..n).filter(|&d| !chosen[d]).collect();
            free[rng.gen_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.push(train.to_dense_row(pick));
    }
    centroids
}

impl Scorer for KMeansModel {
    fn weighting(&self) -> Weighting {
        Weighting::TfIdf
    }

    fn score(&self, docs: &DocTermMatrix) -> Result<ScoreVector> {
        docs.check_columns(self.centroids.first().map_or(0, Vec::len))?;
        let scores = (0..docs.n_docs())
            .into_par_iter()
            .map(|d| {
                let (idx, val) = docs.row(d);
                let x_sq = sq_norm(val);
                nearest(x_sq, idx, val, &self.centroids, &self.centroid_sq_norms).1.sqrt()
            })
            .collect();
        Ok(ScoreVector::new(scores))
    }
}
