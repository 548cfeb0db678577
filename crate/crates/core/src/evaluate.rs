//! AUC-ROC, best-F1 threshold search, score histograms, stage timings and the
//! per-run report.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::represent::Representation;

fn check_lengths(scores: &[f64], labels: &[bool]) -> Result<()> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    Ok(())
}

/// Probability that a random positive outranks a random negative, ties
/// counting one half. Computed from midranks in `O(n log n)`.
///
/// ```
/// let auc = fastlad::evaluate::auc_roc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
/// assert_eq!(auc, 0.75);
/// ```
pub fn auc_roc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores, labels)?;
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass("AUC-ROC"));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.par_sort_unstable_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1..=j+1 share their mean.
        let midrank = (i + j + 2) as f64 / 2.0;
        let tied_pos = order[i..=j].iter().filter(|&&k| labels[k]).count();
        rank_sum += midrank * tied_pos as f64;
        i = j + 1;
    }
    let (p, n) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdSearch {
    /// Every distinct score plus one threshold above the maximum.
    #[default]
    Exact,
    /// At most this many thresholds, refined around the best one found.
    Budgeted(usize),
}

impl fmt::Display for ThresholdSearch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ThresholdSearch::Exact => f.write_str("exact"),
            ThresholdSearch::Budgeted(b) => write!(f, "budgeted({b})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct F1Result {
    pub threshold: f64,
    pub f1: f64,
    pub evaluations: usize,
}

/// F1 of every candidate threshold, where candidate `i < m` is the `i`-th
/// smallest distinct score and candidate `m` lies above the maximum.
struct F1Table {
    thresholds: Vec<f64>,
    f1: Vec<f64>,
}

impl F1Table {
    fn new(scores: &[f64], labels: &[bool], positives: usize) -> Self {
        let mut pairs: Vec<(f64, bool)> = scores.iter().copied().zip(labels.iter().copied()).collect();
        pairs.par_sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
        // Walk from the top: after a run of equal scores, `tp` and `predicted`
        // hold the counts for "score >= that value".
        let mut thresholds = Vec::new();
        let mut f1 = Vec::new();
        let (mut tp, mut predicted) = (0usize, 0usize);
        let mut i = 0;
        while i < pairs.len() {
            let value = pairs[i].0;
            while i < pairs.len() && pairs[i].0 == value {
                predicted += 1;
                tp += pairs[i].1 as usize;
                i += 1;
            }
            thresholds.push(value);
            f1.push(2.0 * tp as f64 / (predicted + positives) as f64);
        }
        thresholds.reverse();
        f1.reverse();
        let above = thresholds.last().map_or(0.0, |&m: &f64| m.next_up());
        thresholds.push(above);
        f1.push(0.0);
        F1Table { thresholds, f1 }
    }

    fn len(&self) -> usize {
        self.f1.len()
    }

    /// Best of the given candidates; ties go to the smallest threshold.
    fn best_of(&self, candidates: impl IntoIterator<Item = usize>) -> Option<usize> {
        candidates.into_iter().fold(None, |best, i| match best {
            Some(b) if self.f1[b] > self.f1[i] || (self.f1[b] == self.f1[i] && b < i) => Some(b),
            _ => Some(i),
        })
    }
}

/// Best F1 over thresholds with the rule "score >= threshold means anomaly".
/// Needs labels, so the result is label-assisted by construction.
///
/// ```
/// use fastlad::evaluate::{best_f1, ThresholdSearch};
/// let r = best_f1(&[0.9, 0.1], &[false, true], ThresholdSearch::Exact).unwrap();
/// assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
/// assert_eq!(r.threshold, 0.1);
/// ```
pub fn best_f1(scores: &[f64], labels: &[bool], search: ThresholdSearch) -> Result<F1Result> {
    check_lengths(scores, labels)?;
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 {
        return Err(Error::SingleClass("F1 without positive labels"));
    }
    let table = F1Table::new(scores, labels, positives);
    let n = table.len();
    let (best, evaluations) = match search {
        ThresholdSearch::Budgeted(0) => {
            return Err(Error::InvalidParameter("threshold budget must be positive".into()))
        }
        ThresholdSearch::Budgeted(b) if b < n => budgeted(&table, b),
        _ => (table.best_of(0..n).expect("at least one candidate"), n),
    };
    Ok(F1Result {
        threshold: table.thresholds[best],
        f1: table.f1[best],
        evaluations,
    })
}

/// Starts from evenly spaced quantiles of the distinct scores, then keeps
/// bisecting the unexplored interval next to the current best, falling back to
/// the widest unexplored interval anywhere.
fn budgeted(table: &F1Table, budget: usize) -> (usize, usize) {
    let n = table.len();
    let mut seen = vec![false; n];
    let mut evaluated: Vec<usize> = Vec::with_capacity(budget);
    let visit = |i: usize, seen: &mut [bool], evaluated: &mut Vec<usize>| {
        if !seen[i] {
            seen[i] = true;
            evaluated.push(i);
        }
    };
    let initial = budget.min(5);
    if initial == 1 {
        visit(n / 2, &mut seen, &mut evaluated);
    } else {
        for j in 0..initial {
            let i = (j * (n - 1) + (initial - 1) / 2) / (initial - 1);
            visit(i, &mut seen, &mut evaluated);
        }
    }
    while evaluated.len() < budget {
        let best = table.best_of(evaluated.iter().copied()).expect("non-empty");
        let mut sorted = evaluated.clone();
        sorted.sort_unstable();
        let pos = sorted.binary_search(&best).expect("best was evaluated");
        // Open intervals (lo, hi) with virtual bounds -1 and n.
        let lo = if pos == 0 { -1 } else { sorted[pos - 1] as i64 };
        let hi = sorted.get(pos + 1).map_or(n as i64, |&h| h as i64);
        let b = best as i64;
        let left = (b - lo - 1, lo, b);
        let right = (hi - b - 1, b, hi);
        let mut gap = if left.0 >= right.0 { left } else { right };
        if gap.0 <= 0 {
            let mut bounds = vec![-1i64];
            bounds.extend(sorted.iter().map(|&i| i as i64));
            bounds.push(n as i64);
            gap = bounds
                .windows(2)
                .map(|w| (w[1] - w[0] - 1, w[0], w[1]))
                .fold((0, 0, 0), |acc, g| if g.0 > acc.0 { g } else { acc });
            if gap.0 <= 0 {
                break;
            }
        }
        let mid = (gap.1 + gap.2).div_euclid(2) as usize;
        visit(mid, &mut seen, &mut evaluated);
    }
    let best = table.best_of(evaluated.iter().copied()).expect("non-empty");
    (best, evaluated.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub low: f64,
    pub high: f64,
    pub normal: u64,
    pub anomaly: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<Bin>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.bins.iter().map(|b| b.normal + b.anomaly).sum()
    }

    /// CSV with columns `bin_low,bin_high,normal_count,anomaly_count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["bin_low", "bin_high", "normal_count", "anomaly_count"])?;
        for b in &self.bins {
            w.write_record([
                b.low.to_string(),
                b.high.to_string(),
                b.normal.to_string(),
                b.anomaly.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<histogram>", e))?;
        Ok(())
    }
}

/// Equal-width bins over `[min, max]`, the last bin closed; a constant score
/// vector gets a single bin.
pub fn score_histogram(scores: &[f64], labels: &[bool], n_bins: usize) -> Result<Histogram> {
    check_lengths(scores, labels)?;
    if n_bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    if scores.is_empty() {
        return Ok(Histogram::default());
    }
    let lo = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let n_bins = if lo == hi { 1 } else { n_bins };
    let width = (hi - lo) / n_bins as f64;
    let mut bins: Vec<Bin> = (0..n_bins)
        .map(|i| Bin {
            low: lo + i as f64 * width,
            high: if i + 1 == n_bins { hi } else { lo + (i + 1) as f64 * width },
            normal: 0,
            anomaly: 0,
        })
        .collect();
    for (&s, &l) in scores.iter().zip(labels) {
        let i = if width > 0.0 {
            (((s - lo) / width) as usize).min(n_bins - 1)
        } else {
            0
        };
        if l {
            bins[i].anomaly += 1;
        } else {
            bins[i].normal += 1;
        }
    }
    Ok(Histogram { bins })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Load,
    Sample,
    Normalize,
    CreateWords,
    CreateTrigrams,
    ParseEventIds,
    Split,
    Vectorize,
    Fit,
    Score,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::Load => "Load",
            Stage::Sample => "Sample",
            Stage::Normalize => "Normalize",
            Stage::CreateWords => "Create words",
            Stage::CreateTrigrams => "Create trigrams",
            Stage::ParseEventIds => "Parse event IDs",
            Stage::Split => "Split",
            Stage::Vectorize => "Vectorize",
            Stage::Fit => "Fit",
            Stage::Score => "Score",
        }
    }

    pub fn for_representation(rep: Representation) -> Stage {
        match rep {
            Representation::Words => Stage::CreateWords,
            Representation::Trigrams => Stage::CreateTrigrams,
            Representation::Events => Stage::ParseEventIds,
        }
    }
}

/// Runs `f` and returns its result with the elapsed wall-clock seconds.
pub fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Seconds per stage in execution order; each stage at most once.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Timings {
    entries: Vec<(Stage, f64)>,
}

impl Timings {
    pub fn record(&mut self, stage: Stage, seconds: f64) -> Result<()> {
        if self.get(stage).is_some() {
            return Err(Error::DuplicateStage(stage.label()));
        }
        self.entries.push((stage, seconds));
        Ok(())
    }

    pub fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> T) -> Result<T> {
        let (out, secs) = timed(f);
        self.record(stage, secs)?;
        Ok(out)
    }

    pub fn get(&self, stage: Stage) -> Option<f64> {
        self.entries.iter().find(|(s, _)| *s == stage).map(|(_, t)| *t)
    }

    pub fn stages(&self) -> impl Iterator<Item = (Stage, f64)> + '_ {
        self.entries.iter().copied()
    }

    /// Fit plus score.
    pub fn model_time(&self) -> f64 {
        self.get(Stage::Fit).unwrap_or(0.0) + self.get(Stage::Score).unwrap_or(0.0)
    }

    /// Entries of `other` not yet present, appended in order.
    pub fn merge_missing(&mut self, other: &Timings) {
        for (s, t) in other.stages() {
            if self.get(s).is_none() {
                self.entries.push((s, t));
            }
        }
    }
}

impl Serialize for Timings {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(self.entries.len()))?;
        for (s, t) in &self.entries {
            map.serialize_entry(s.label(), t)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMeta {
    pub dataset: String,
    pub representation: String,
    pub model: String,
    pub scenario: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub meta: RunMeta,
    pub n_train: usize,
    pub n_test: usize,
    pub n_test_anomalies: usize,
    pub auc: f64,
    pub best_f1: f64,
    pub best_threshold: f64,
    /// How the F1 threshold was searched, e.g. `exact` or `budgeted(20)`.
    pub f1_search: String,
    /// F1 thresholds are picked with the test labels.
    pub f1_label_assisted: bool,
    pub timings: Timings,
    pub model_time: f64,
    pub histogram: Histogram,
    /// Parameter snapshot of the run.
    pub params: serde_json::Value,
}

const PREPROCESSING: [(&str, &[Stage]); 6] = [
    ("load_s", &[Stage::Load]),
    ("sample_s", &[Stage::Sample]),
    ("normalize_s", &[Stage::Normalize]),
    (
        "represent_s",
        &[Stage::CreateWords, Stage::CreateTrigrams, Stage::ParseEventIds],
    ),
    ("split_s", &[Stage::Split]),
    ("vectorize_s", &[Stage::Vectorize]),
];

impl EvalReport {
    pub fn csv_header() -> Vec<&'static str> {
        let mut h = vec![
            "dataset",
            "representation",
            "model",
            "scenario",
            "auc",
            "f1",
            "threshold",
            "fit_s",
            "score_s",
            "model_s",
        ];
        h.extend(PREPROCESSING.iter().map(|(name, _)| *name));
        h
    }

    /// One grid row; columns as in [`EvalReport::csv_header`].
    pub fn csv_record(&self) -> Vec<String> {
        let secs = |s: Option<f64>| s.map(|t| format!("{t:.6}")).unwrap_or_default();
        let mut row = vec![
            self.meta.dataset.clone(),
            self.meta.representation.clone(),
            self.meta.model.clone(),
            self.meta.scenario.clone(),
            self.auc.to_string(),
            self.best_f1.to_string(),
            self.best_threshold.to_string(),
            secs(self.timings.get(Stage::Fit)),
            secs(self.timings.get(Stage::Score)),
            secs(Some(self.model_time)),
        ];
        for (_, stages) in PREPROCESSING {
            let t = stages.iter().find_map(|&s| self.timings.get(s));
            row.push(secs(t));
        }
        row
    }

    /// Indices of the csv columns that hold wall-clock seconds.
    pub fn timing_columns() -> std::ops::Range<usize> {
        7..Self::csv_header().len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pairwise_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            if !li {
                continue;
            }
            for (j, &lj) in labels.iter().enumerate() {
                if lj {
                    continue;
                }
                pairs += 1.0;
                num += if scores[i] > scores[j] {
                    1.0
                } else if scores[i] == scores[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
        num / pairs
    }

    /// Every threshold regime, by brute force.
    fn brute_f1(scores: &[f64], labels: &[bool]) -> f64 {
        let mut cands: Vec<f64> = scores.to_vec();
        cands.push(f64::INFINITY);
        cands
            .iter()
            .map(|&t| {
                let tp = scores.iter().zip(labels).filter(|(&s, &l)| s >= t && l).count() as f64;
                let fp = scores.iter().zip(labels).filter(|(&s, &l)| s >= t && !l).count() as f64;
                let fneg = scores.iter().zip(labels).filter(|(&s, &l)| s < t && l).count() as f64;
                if tp == 0.0 {
                    0.0
                } else {
                    2.0 * tp / (2.0 * tp + fp + fneg)
                }
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn auc_examples() {
        let auc = auc_roc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap();
        assert_eq!(auc, 0.75);
        assert_eq!(auc_roc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auc_roc(&[3.0; 6], &[true, false, true, false, false, false]).unwrap(), 0.5);
        assert!(matches!(auc_roc(&[1.0, 2.0], &[true, true]), Err(Error::SingleClass(_))));
        assert!(matches!(auc_roc(&[1.0], &[true, false]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn f1_examples() {
        let r = best_f1(&[0.1, 0.9], &[false, true], ThresholdSearch::Exact).unwrap();
        assert_eq!(r.f1, 1.0);
        assert!(r.threshold > 0.1 && r.threshold <= 0.9);

        let r = best_f1(&[0.9, 0.1], &[false, true], ThresholdSearch::Exact).unwrap();
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!(r.threshold <= 0.1);

        let r = best_f1(&[0.4, 0.2, 0.7], &[true; 3], ThresholdSearch::Exact).unwrap();
        assert_eq!(r.f1, 1.0);
        assert_eq!(r.threshold, 0.2);

        assert!(best_f1(&[0.4], &[false], ThresholdSearch::Exact).is_err());
        assert!(best_f1(&[0.4], &[true], ThresholdSearch::Budgeted(0)).is_err());
    }

    #[test]
    fn budget_is_respected() {
        let scores: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let labels: Vec<bool> = scores.iter().map(|&s| s > 0.8).collect();
        let r = best_f1(&scores, &labels, ThresholdSearch::Budgeted(20)).unwrap();
        assert_eq!(r.evaluations, 20);
        let exact = best_f1(&scores, &labels, ThresholdSearch::Exact).unwrap();
        assert!(exact.f1 >= r.f1);
        assert_eq!(exact.f1, 1.0);
    }

    #[test]
    fn histogram_examples() {
        let h = score_histogram(&[0.0, 1.0], &[false, true], 2).unwrap();
        assert_eq!(
            h.bins,
            [
                Bin { low: 0.0, high: 0.5, normal: 1, anomaly: 0 },
                Bin { low: 0.5, high: 1.0, normal: 0, anomaly: 1 },
            ]
        );
        let h = score_histogram(&[2.0; 5], &[false; 5], 10).unwrap();
        assert_eq!(h.bins.len(), 1);
        assert_eq!(h.bins[0].normal, 5);
        let h = score_histogram(&[7.0], &[true], 3).unwrap();
        assert_eq!(h.bins.len(), 1);
        assert!(score_histogram(&[1.0], &[true], 0).is_err());

        let mut out = Vec::new();
        score_histogram(&[0.0, 1.0], &[false, true], 2).unwrap().write_csv(&mut out).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "bin_low,bin_high,normal_count,anomaly_count\n0,0.5,1,0\n0.5,1,0,1\n"
        );
    }

    #[test]
    fn timings() {
        let mut t = Timings::default();
        let v = t.time(Stage::Fit, || 3).unwrap();
        assert_eq!(v, 3);
        assert!(t.get(Stage::Fit).unwrap() >= 0.0);
        t.record(Stage::Score, 0.25).unwrap();
        assert_eq!(t.model_time(), t.get(Stage::Fit).unwrap() + 0.25);
        assert!(matches!(t.record(Stage::Fit, 1.0), Err(Error::DuplicateStage("Fit"))));
        let labels: Vec<_> = [
            Stage::Load,
            Stage::Normalize,
            Stage::CreateTrigrams,
            Stage::CreateWords,
            Stage::ParseEventIds,
        ]
        .iter()
        .map(|s| s.label())
        .collect();
        assert_eq!(labels, ["Load", "Normalize", "Create trigrams", "Create words", "Parse event IDs"]);
        assert_eq!(serde_json::to_string(&t).unwrap().matches(':').count(), 2);
    }

    fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        (2usize..200).prop_flat_map(|n| {
            (
                proptest::collection::vec((0u8..20).prop_map(|x| x as f64 / 4.0), n),
                proptest::collection::vec(any::<bool>(), n),
            )
        })
    }

    proptest! {
        #[test]
        fn auc_matches_pairwise((scores, labels) in instance()) {
            let p = labels.iter().filter(|&&l| l).count();
            prop_assume!(p > 0 && p < labels.len());
            let fast = auc_roc(&scores, &labels).unwrap();
            prop_assert!((fast - pairwise_auc(&scores, &labels)).abs() < 1e-12);
            let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert!((auc_roc(&warped, &labels).unwrap() - fast).abs() < 1e-12);
        }

        #[test]
        fn f1_exact_is_global((scores, labels) in instance(), budget in 1usize..30) {
            prop_assume!(labels.iter().any(|&l| l));
            let exact = best_f1(&scores, &labels, ThresholdSearch::Exact).unwrap();
            prop_assert!((exact.f1 - brute_f1(&scores, &labels)).abs() < 1e-12);
            let b = best_f1(&scores, &labels, ThresholdSearch::Budgeted(budget)).unwrap();
            prop_assert!(b.evaluations <= budget.max(1));
            prop_assert!(exact.f1 >= b.f1);
            let all = best_f1(&scores, &labels, ThresholdSearch::Budgeted(usize::MAX)).unwrap();
            prop_assert_eq!(all, exact);
        }

        #[test]
        fn histogram_conserves((scores, labels) in instance(), bins in 1usize..60) {
            let h = score_histogram(&scores, &labels, bins).unwrap();
            prop_assert_eq!(h.total(), scores.len() as u64);
            let anomalies = labels.iter().filter(|&&l| l).count() as u64;
            prop_assert_eq!(h.bins.iter().map(|b| b.anomaly).sum::<u64>(), anomalies);
        }
    }
}
