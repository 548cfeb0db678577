//! End-to-end runs: load, normalize, split, represent, vectorize, fit, score
//! and evaluate, over one configuration cell or a whole grid.
//!
//! The split happens before any representation is learnt, so template
//! miners and vocabularies are fitted on training units only. Within one run,
//! work shared by several cells (loading, normalization, the split, the
//! representation of a scenario, the vocabulary) is done once.

use std::borrow::Cow;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{
    IForestModel, IForestParams, KMeansModel, KMeansParams, ModelKind, Oovd, RarityDenominator,
    RarityModel, ScoreVector, Scorer,
};
use crate::error::{Error, Result};
use crate::evaluate::{
    auc_roc, best_f1, score_histogram, timed, EvalReport, RunMeta, Stage, ThresholdSearch, Timings,
};
use crate::ingest::{
    filter_normal, load_with, sample, split, Adapter, Granularity, Label, LoadOptions, RecordSet,
    SplitMode, SplitSpec,
};
use crate::normalize::normalize_records;
use crate::represent::drain::{Drain, DrainParams};
use crate::represent::{flatten_sequences, Representation, TextDoc, TextRep, TokenSeq};
use crate::vectorize::{count_transform, tfidf_transform, DocTermMatrix, Vocabulary, Weighting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Train on every training unit.
    Unfiltered,
    /// Train on the normal training units only.
    NormalOnly,
}

impl Scenario {
    pub const ALL: [Scenario; 2] = [Scenario::NormalOnly, Scenario::Unfiltered];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Unfiltered => "unfiltered",
            Scenario::NormalOnly => "normal_only",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "unfiltered" => Ok(Scenario::Unfiltered),
            "normal_only" | "normal" => Ok(Scenario::NormalOnly),
            _ => Err(Error::Config(format!("unknown scenario `{s}`"))),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Model and template-miner knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kmeans_k: usize,
    pub kmeans_max_iter: usize,
    pub iforest_trees: usize,
    pub iforest_subsample: usize,
    pub rm_denominator: RarityDenominator,
    pub drain_depth: usize,
    pub drain_sim_threshold: f64,
    pub drain_max_children: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let km = KMeansParams::default();
        let forest = IForestParams::default();
        let drain = DrainParams::default();
        ModelConfig {
            kmeans_k: km.k,
            kmeans_max_iter: km.max_iter,
            iforest_trees: forest.n_trees,
            iforest_subsample: forest.subsample,
            rm_denominator: RarityDenominator::default(),
            drain_depth: drain.depth,
            drain_sim_threshold: drain.sim_threshold,
            drain_max_children: drain.max_children,
        }
    }
}

impl ModelConfig {
    pub fn drain_params(&self) -> DrainParams {
        DrainParams {
            depth: self.drain_depth,
            sim_threshold: self.drain_sim_threshold,
            max_children: self.drain_max_children,
        }
    }

    fn snapshot(&self, rep: Representation, model: ModelKind) -> serde_json::Value {
        let mut v = serde_json::Map::new();
        match model {
            ModelKind::Oovd => {}
            ModelKind::Rm => {
                v.insert("rm_denominator".into(), serde_json::to_value(self.rm_denominator).unwrap_or_default());
            }
            ModelKind::KMeans => {
                v.insert("k".into(), self.kmeans_k.into());
                v.insert("max_iter".into(), self.kmeans_max_iter.into());
            }
            ModelKind::IForest => {
                v.insert("n_trees".into(), self.iforest_trees.into());
                v.insert("subsample".into(), self.iforest_subsample.into());
            }
        }
        if rep == Representation::Events {
            v.insert("drain_depth".into(), self.drain_depth.into());
            v.insert("drain_sim_threshold".into(), self.drain_sim_threshold.into());
            v.insert("drain_max_children".into(), self.drain_max_children.into());
        }
        serde_json::Value::Object(v)
    }
}

/// A full run description; also the schema of TOML config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub adapter: Adapter,
    pub label_file: Option<PathBuf>,
    /// Name used in reports; defaults to the input file stem.
    pub dataset: Option<String>,
    pub sample_fraction: Option<f64>,
    pub train_fraction: f64,
    pub split_mode: SplitMode,
    pub seed: u64,
    pub representations: Vec<Representation>,
    pub models: Vec<ModelKind>,
    pub scenarios: Vec<Scenario>,
    /// Grid runs skip invalid cells instead of rejecting them.
    pub grid: bool,
    pub repeats: usize,
    pub model: ModelConfig,
    pub f1_search: ThresholdSearch,
    pub hist_bins: usize,
    pub out_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            adapter: Adapter::Bgl,
            label_file: None,
            dataset: None,
            sample_fraction: None,
            train_fraction: 0.05,
            split_mode: SplitMode::Random,
            seed: 0,
            representations: vec![Representation::Words],
            models: vec![ModelKind::Rm],
            scenarios: vec![Scenario::NormalOnly],
            grid: false,
            repeats: 1,
            model: ModelConfig::default(),
            f1_search: ThresholdSearch::Exact,
            hist_bins: 20,
            out_dir: None,
        }
    }
}

/// One point of the configuration grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Cell {
    pub representation: Representation,
    pub model: ModelKind,
    pub scenario: Scenario,
}

impl Cell {
    /// OOVD counts terms outside a vocabulary that, without filtering, may
    /// contain anomalous terms itself.
    pub fn is_valid(&self) -> bool {
        !(self.model == ModelKind::Oovd && self.scenario == Scenario::Unfiltered)
    }
}

impl RunConfig {
    /// The full grid over every representation, model and scenario.
    pub fn full_grid() -> Self {
        RunConfig {
            representations: Representation::ALL.to_vec(),
            models: ModelKind::ALL.to_vec(),
            scenarios: Scenario::ALL.to_vec(),
            grid: true,
            ..RunConfig::default()
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        SplitSpec::new(self.train_fraction, self.seed, self.split_mode)?;
        if let Some(f) = self.sample_fraction {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::FractionOutOfRange(f));
            }
        }
        if self.repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        if self.hist_bins == 0 {
            return Err(Error::Config("hist_bins must be at least 1".into()));
        }
        if let ThresholdSearch::Budgeted(0) = self.f1_search {
            return Err(Error::Config("the F1 threshold budget must be at least 1".into()));
        }
        self.model.drain_params().validate()?;
        self.cells()?;
        Ok(())
    }

    /// Cells to evaluate, in scenario, representation, model order.
    pub fn cells(&self) -> Result<Vec<Cell>> {
        if self.representations.is_empty() || self.models.is_empty() || self.scenarios.is_empty() {
            return Err(Error::Config(
                "at least one representation, model and scenario is required".into(),
            ));
        }
        let mut cells = Vec::new();
        for &scenario in &dedup(&self.scenarios) {
            for &representation in &dedup(&self.representations) {
                for &model in &dedup(&self.models) {
                    let cell = Cell {
                        representation,
                        model,
                        scenario,
                    };
                    if cell.is_valid() {
                        cells.push(cell);
                    } else if !self.grid {
                        return Err(Error::Config(
                            "oovd needs the normal_only scenario: unfiltered training data may put anomalous terms in the vocabulary".into(),
                        ));
                    }
                }
            }
        }
        Ok(cells)
    }

    fn dataset_name(&self) -> String {
        let name = self.dataset.clone().unwrap_or_else(|| {
            self.input
                .as_deref()
                .and_then(Path::file_stem)
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| self.adapter.name().to_owned())
        });
        name.chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
            .collect()
    }

    /// Seed of the `i`th repeat.
    pub fn repeat_seed(&self, i: usize) -> u64 {
        self.seed.wrapping_add(i as u64)
    }
}

fn dedup<T: PartialEq + Copy>(xs: &[T]) -> Vec<T> {
    let mut out: Vec<T> = Vec::with_capacity(xs.len());
    for &x in xs {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Documents of one side of the split.
#[derive(Debug, Clone)]
pub enum Docs<'a> {
    Text(Vec<TextDoc<'a>>),
    Tokens(Vec<TokenSeq>),
}

impl Docs<'_> {
    pub fn len(&self) -> usize {
        match self {
            Docs::Text(d) => d.len(),
            Docs::Tokens(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn vocabulary(&self) -> Result<Vocabulary> {
        match self {
            Docs::Text(d) => Vocabulary::fit(d),
            Docs::Tokens(d) => Vocabulary::fit(d),
        }
    }

    fn transform(&self, v: &Vocabulary, weighting: Weighting) -> DocTermMatrix {
        match (self, weighting) {
            (Docs::Text(d), Weighting::Count) => count_transform(v, d),
            (Docs::Text(d), Weighting::TfIdf) => tfidf_transform(v, d),
            (Docs::Tokens(d), Weighting::Count) => count_transform(v, d),
            (Docs::Tokens(d), Weighting::TfIdf) => tfidf_transform(v, d),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Represented<'a> {
    /// Template miner trained on the training side, for event ids.
    pub drain: Option<Drain>,
    pub train: Docs<'a>,
    pub test: Docs<'a>,
}

/// One document per unit. Word and trigram documents borrow the normalized
/// text and are tokenized during vectorization; event documents are built
/// by training Drain on `train` and looking `test` up read-only.
pub fn represent<'a>(
    train: &'a RecordSet,
    test: &'a RecordSet,
    rep: Representation,
    drain: DrainParams,
) -> Result<Represented<'a>> {
    let text = |rs: &'a RecordSet, tr: TextRep| -> Docs<'a> {
        let recs = rs.records();
        Docs::Text(
            rs.units()
                .into_iter()
                .map(|u| match u.members.as_slice() {
                    [one] if rs.granularity() == Granularity::Line => TextDoc::line(tr, recs[*one].text()),
                    members => TextDoc::sequence(tr, members.iter().map(|&i| recs[i].text()).collect()),
                })
                .collect(),
        )
    };
    match rep {
        Representation::Words => Ok(Represented {
            drain: None,
            train: text(train, TextRep::Words),
            test: text(test, TextRep::Words),
        }),
        Representation::Trigrams => Ok(Represented {
            drain: None,
            train: text(train, TextRep::Trigrams),
            test: text(test, TextRep::Trigrams),
        }),
        Representation::Events => {
            let mut miner = Drain::new(drain)?;
            let train_ids: Vec<TokenSeq> = train
                .records()
                .iter()
                .map(|r| TokenSeq::new(vec![miner.parse(r.text()).to_string()]))
                .collect();
            let test_ids: Vec<TokenSeq> = test
                .records()
                .par_iter()
                .map(|r| TokenSeq::new(vec![miner.lookup(r.text()).to_string()]))
                .collect();
            let docs = |rs: &RecordSet, ids: Vec<TokenSeq>| -> Result<Docs<'a>> {
                Ok(Docs::Tokens(match rs.granularity() {
                    Granularity::Line => ids,
                    Granularity::Sequence => flatten_sequences(rs, &ids)?
                        .into_iter()
                        .map(|s| s.tokens)
                        .collect(),
                }))
            };
            Ok(Represented {
                train: docs(train, train_ids)?,
                test: docs(test, test_ids)?,
                drain: Some(miner),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Oovd(Oovd),
    Rm(RarityModel),
    KMeans(KMeansModel),
    IForest(IForestModel),
}

impl Scorer for FittedModel {
    fn weighting(&self) -> Weighting {
        match self {
            FittedModel::Oovd(m) => m.weighting(),
            FittedModel::Rm(m) => m.weighting(),
            FittedModel::KMeans(m) => m.weighting(),
            FittedModel::IForest(m) => m.weighting(),
        }
    }

    fn score(&self, docs: &DocTermMatrix) -> Result<ScoreVector> {
        match self {
            FittedModel::Oovd(m) => m.score(docs),
            FittedModel::Rm(m) => m.score(docs),
            FittedModel::KMeans(m) => m.score(docs),
            FittedModel::IForest(m) => m.score(docs),
        }
    }
}

/// Fits `kind` on the training matrix (weighted as `kind` expects).
pub fn fit_model(
    kind: ModelKind,
    vocab: &Vocabulary,
    train: &DocTermMatrix,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<FittedModel> {
    train.require(kind.weighting())?;
    Ok(match kind {
        ModelKind::Oovd => FittedModel::Oovd(Oovd::fit(vocab)),
        ModelKind::Rm => FittedModel::Rm(RarityModel::fit(vocab)?.with_denominator(cfg.rm_denominator)),
        ModelKind::KMeans => FittedModel::KMeans(KMeansModel::fit(
            train,
            KMeansParams {
                k: cfg.kmeans_k,
                max_iter: cfg.kmeans_max_iter,
                seed,
            },
        )?),
        ModelKind::IForest => FittedModel::IForest(IForestModel::fit(
            train,
            IForestParams {
                n_trees: cfg.iforest_trees,
                subsample: cfg.iforest_subsample,
                seed,
            },
        )?),
    })
}

/// Everything learnt from the training side of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub drain: Option<Drain>,
    pub vocabulary: Vocabulary,
    pub model: FittedModel,
}

/// Fits one cell through the same steps a run takes. `test` is represented
/// alongside `train`, as in a run, but must not influence the result.
pub fn fit_artifacts(
    train: &RecordSet,
    test: &RecordSet,
    rep: Representation,
    kind: ModelKind,
    cfg: &ModelConfig,
    seed: u64,
) -> Result<Artifacts> {
    let r = represent(train, test, rep, cfg.drain_params())?;
    let vocabulary = r.train.vocabulary()?;
    let matrix = r.train.transform(&vocabulary, kind.weighting());
    let model = fit_model(kind, &vocabulary, &matrix, cfg, seed)?;
    Ok(Artifacts {
        drain: r.drain,
        vocabulary,
        model,
    })
}

/// Per-unit anomaly flags; every unit must be labelled.
pub fn unit_labels(rs: &RecordSet) -> Result<Vec<bool>> {
    rs.units()
        .iter()
        .map(|u| match rs.unit_label(u) {
            Label::Anomaly => Ok(true),
            Label::Normal => Ok(false),
            Label::Unknown => Err(Error::UnknownLabel(u.members[0])),
        })
        .collect()
}

/// Aggregate of one cell over repeats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub representation: String,
    pub model: String,
    pub scenario: String,
    pub runs: usize,
    pub auc: Spread,
    pub f1: Spread,
    pub model_s: Spread,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Spread {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

impl Spread {
    fn of(xs: &[f64]) -> Spread {
        Spread {
            mean: xs.iter().sum::<f64>() / xs.len() as f64,
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub runs: Vec<EvalReport>,
    /// Present when the run was repeated.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub summary: Vec<Summary>,
}

impl RunOutput {
    fn summarize(runs: Vec<EvalReport>, repeats: usize) -> RunOutput {
        let mut summary = Vec::new();
        if repeats > 1 {
            let mut keys: Vec<(&str, &str, &str)> = Vec::new();
            for r in &runs {
                let k = (r.meta.representation.as_str(), r.meta.model.as_str(), r.meta.scenario.as_str());
                if !keys.contains(&k) {
                    keys.push(k);
                }
            }
            for (rep, model, scenario) in keys {
                let group: Vec<&EvalReport> = runs
                    .iter()
                    .filter(|r| r.meta.representation == rep && r.meta.model == model && r.meta.scenario == scenario)
                    .collect();
                let pick = |f: fn(&EvalReport) -> f64| Spread::of(&group.iter().map(|r| f(r)).collect::<Vec<_>>());
                summary.push(Summary {
                    representation: rep.to_owned(),
                    model: model.to_owned(),
                    scenario: scenario.to_owned(),
                    runs: group.len(),
                    auc: pick(|r| r.auc),
                    f1: pick(|r| r.best_f1),
                    model_s: pick(|r| r.model_time),
                });
            }
        }
        RunOutput { runs, summary }
    }

    /// Writes `report.json`, `grid.csv`, one `hist_<run>.csv` per report
    /// and, for repeated runs, `summary.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("report.json");
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;

        let mut grid = csv::Writer::from_path(dir.join("grid.csv"))?;
        grid.write_record(EvalReport::csv_header())?;
        for r in &self.runs {
            grid.write_record(r.csv_record())?;
        }
        grid.flush().map_err(|e| Error::io(dir.join("grid.csv"), e))?;

        let repeated = !self.summary.is_empty();
        for (i, r) in self.runs.iter().enumerate() {
            let mut name = format!(
                "hist_{}_{}_{}_{}",
                r.meta.dataset, r.meta.representation, r.meta.model, r.meta.scenario
            );
            if repeated {
                name.push_str(&format!("_r{}", i / self.cells_per_repeat()));
            }
            let path = dir.join(format!("{name}.csv"));
            let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
            r.histogram.write_csv(BufWriter::new(f))?;
        }

        if repeated {
            let mut s = csv::Writer::from_path(dir.join("summary.csv"))?;
            s.write_record([
                "representation", "model", "scenario", "runs", "auc_mean", "auc_min", "auc_max",
                "f1_mean", "f1_min", "f1_max", "model_s_mean", "model_s_min", "model_s_max",
            ])?;
            for row in &self.summary {
                let mut rec = vec![
                    row.representation.clone(),
                    row.model.clone(),
                    row.scenario.clone(),
                    row.runs.to_string(),
                ];
                for sp in [row.auc, row.f1, row.model_s] {
                    rec.extend([sp.mean.to_string(), sp.min.to_string(), sp.max.to_string()]);
                }
                s.write_record(rec)?;
            }
            s.flush().map_err(|e| Error::io(dir.join("summary.csv"), e))?;
        }
        Ok(())
    }

    fn cells_per_repeat(&self) -> usize {
        self.summary.len().max(1)
    }
}

/// Runs a configuration against its input file, writing outputs when
/// `out_dir` is set.
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| Error::Config("no input file given".into()))?;
    let mut runs = Vec::new();
    for i in 0..cfg.repeats {
        let seed = cfg.repeat_seed(i);
        let opts = LoadOptions {
            label_file: cfg.label_file.clone(),
            sample: cfg.sample_fraction.filter(|&f| f < 1.0).map(|f| (f, seed)),
        };
        let mut timings = Timings::default();
        let rs = timings.time(Stage::Load, || load_with(input, cfg.adapter, &opts))??;
        runs.extend(run_once(rs, timings, cfg, seed)?);
    }
    finish(runs, cfg)
}

/// Runs a configuration on records already in memory; `input` is ignored.
pub fn run_records(records: &RecordSet, cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let mut runs = Vec::new();
    for i in 0..cfg.repeats {
        let seed = cfg.repeat_seed(i);
        let mut timings = Timings::default();
        let rs = match cfg.sample_fraction.filter(|&f| f < 1.0) {
            Some(f) => timings.time(Stage::Sample, || sample(records, f, seed))??,
            None => records.clone(),
        };
        runs.extend(run_once(rs, timings, cfg, seed)?);
    }
    finish(runs, cfg)
}

fn finish(runs: Vec<EvalReport>, cfg: &RunConfig) -> Result<RunOutput> {
    let out = RunOutput::summarize(runs, cfg.repeats);
    if let Some(dir) = &cfg.out_dir {
        out.write(dir)?;
    }
    Ok(out)
}

fn run_once(mut rs: RecordSet, mut shared: Timings, cfg: &RunConfig, seed: u64) -> Result<Vec<EvalReport>> {
    let cells = cfg.cells()?;
    shared.time(Stage::Normalize, || normalize_records(&mut rs))?;
    let spec = SplitSpec::new(cfg.train_fraction, seed, cfg.split_mode)?;
    let (parts, split_secs) = timed(|| split(&rs, &spec));
    let (train, test) = parts?;
    drop(rs);
    let labels = unit_labels(&test)?;
    let n_anomalies = labels.iter().filter(|&&l| l).count();
    let dataset = cfg.dataset_name();

    let mut reports = Vec::with_capacity(cells.len());
    for scenario in dedup(&cells.iter().map(|c| c.scenario).collect::<Vec<_>>()) {
        let (train_s, filter_secs) = match scenario {
            Scenario::Unfiltered => (Cow::Borrowed(&train), 0.0),
            Scenario::NormalOnly => {
                let (t, secs) = timed(|| filter_normal(&train));
                (Cow::Owned(t?), secs)
            }
        };
        let n_train = train_s.units().len();
        let scen_cells: Vec<Cell> = cells.iter().copied().filter(|c| c.scenario == scenario).collect();
        for rep in dedup(&scen_cells.iter().map(|c| c.representation).collect::<Vec<_>>()) {
            let (r, rep_secs) = timed(|| represent(&train_s, &test, rep, cfg.model.drain_params()));
            let r = r?;
            let (vocab, vocab_secs) = timed(|| r.train.vocabulary());
            let vocab = vocab?;
            let mut matrices: Vec<(Weighting, DocTermMatrix, DocTermMatrix, f64)> = Vec::new();

            for cell in scen_cells.iter().filter(|c| c.representation == rep) {
                let w = cell.model.weighting();
                if !matrices.iter().any(|m| m.0 == w) {
                    let ((tr, te), secs) = timed(|| (r.train.transform(&vocab, w), r.test.transform(&vocab, w)));
                    matrices.push((w, tr, te, secs));
                }
                let (_, train_m, test_m, transform_secs) =
                    matrices.iter().find(|m| m.0 == w).expect("inserted above");

                let mut timings = shared.clone();
                timings.record(Stage::Split, split_secs + filter_secs)?;
                timings.record(Stage::for_representation(rep), rep_secs)?;
                timings.record(Stage::Vectorize, vocab_secs + transform_secs)?;
                let model = timings.time(Stage::Fit, || fit_model(cell.model, &vocab, train_m, &cfg.model, seed))??;
                let scores = timings.time(Stage::Score, || model.score(test_m))??;

                let auc = auc_roc(&scores, &labels)?;
                let f1 = best_f1(&scores, &labels, cfg.f1_search)?;
                let histogram = score_histogram(&scores, &labels, cfg.hist_bins)?;
                let mut params = cfg.model.snapshot(rep, cell.model);
                if let serde_json::Value::Object(m) = &mut params {
                    m.insert("train_fraction".into(), cfg.train_fraction.into());
                    m.insert("split_mode".into(), serde_json::to_value(cfg.split_mode)?);
                    m.insert("sample_fraction".into(), serde_json::to_value(cfg.sample_fraction)?);
                    m.insert("n_terms".into(), vocab.n_terms().into());
                }
                reports.push(EvalReport {
                    meta: RunMeta {
                        dataset: dataset.clone(),
                        representation: rep.name().to_owned(),
                        model: cell.model.name().to_owned(),
                        scenario: scenario.name().to_owned(),
                        seed,
                    },
                    n_train,
                    n_test: labels.len(),
                    n_test_anomalies: n_anomalies,
                    auc,
                    best_f1: f1.f1,
                    best_threshold: f1.threshold,
                    f1_search: cfg.f1_search.to_string(),
                    f1_label_assisted: true,
                    model_time: timings.model_time(),
                    timings,
                    histogram,
                    params,
                });
            }
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{records_from_lines, LogRecord};
    use crate::synthetic::{gen_synthetic, AnomalyKind, SyntheticSpec};

    fn corpus(kind: AnomalyKind, seed: u64) -> RecordSet {
        let c = gen_synthetic(&SyntheticSpec {
            n_normal: 3000,
            n_anomalies: 60,
            n_templates: 15,
            anomaly_kind: kind,
            seed,
        })
        .unwrap();
        records_from_lines(Adapter::Bgl, &c.lines).unwrap()
    }

    #[test]
    fn oovd_unfiltered_is_rejected() {
        let cfg = RunConfig {
            models: vec![ModelKind::Oovd],
            scenarios: vec![Scenario::Unfiltered],
            ..RunConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert!(matches!(run_records(&corpus(AnomalyKind::UnseenToken, 1), &cfg), Err(Error::Config(_))));
    }

    #[test]
    fn full_grid_has_21_cells() {
        let cells = RunConfig::full_grid().cells().unwrap();
        assert_eq!(cells.len(), 21);
        assert_eq!(cells.iter().filter(|c| c.scenario == Scenario::NormalOnly).count(), 12);
        assert!(cells.iter().all(Cell::is_valid));
    }

    #[test]
    fn grid_run_reports_every_cell_with_all_stages() {
        let cfg = RunConfig {
            model: ModelConfig {
                iforest_trees: 20,
                ..ModelConfig::default()
            },
            ..RunConfig::full_grid()
        };
        let out = run_records(&corpus(AnomalyKind::UnseenToken, 2), &cfg).unwrap();
        assert_eq!(out.runs.len(), 21);
        assert!(out.summary.is_empty());
        for r in &out.runs {
            let stages: Vec<Stage> = r.timings.stages().map(|(s, _)| s).collect();
            assert_eq!(stages.len(), 6, "{stages:?}");
            assert!((0.0..=1.0).contains(&r.auc));
            assert_eq!(r.histogram.total() as usize, r.n_test);
            assert_eq!(r.model_time, r.timings.get(Stage::Fit).unwrap() + r.timings.get(Stage::Score).unwrap());
        }
    }

    #[test]
    fn repeats_are_summarized() {
        let cfg = RunConfig {
            repeats: 3,
            models: vec![ModelKind::Rm, ModelKind::Oovd],
            ..RunConfig::default()
        };
        let out = run_records(&corpus(AnomalyKind::UnseenToken, 3), &cfg).unwrap();
        assert_eq!(out.runs.len(), 6);
        assert_eq!(out.summary.len(), 2);
        let seeds: Vec<u64> = out.runs.iter().map(|r| r.meta.seed).collect();
        assert_eq!(seeds, [0, 0, 1, 1, 2, 2]);
        assert!(out.summary.iter().all(|s| s.auc.min <= s.auc.mean && s.auc.mean <= s.auc.max));
    }

    #[test]
    fn unknown_test_labels_are_rejected() {
        let lines: Vec<String> = (0..50).map(|i| format!("message {}", i % 3)).collect();
        let rs = records_from_lines(Adapter::Plain, &lines).unwrap();
        assert!(matches!(run_records(&rs, &RunConfig::default()), Err(Error::UnknownLabel(_))));
    }

    #[test]
    fn artifacts_ignore_test_contents() {
        let rs = corpus(AnomalyKind::RareToken, 4);
        let (train, test) = split(&rs, &SplitSpec::new(0.1, 4, SplitMode::Random).unwrap()).unwrap();
        let mut other: Vec<LogRecord> = test.records().to_vec();
        for r in &mut other {
            r.normalized = Some(format!("zzq {} qqx", r.text()));
        }
        let other = RecordSet::lines(other);
        for rep in Representation::ALL {
            let a = fit_artifacts(&train, &test, rep, ModelKind::KMeans, &ModelConfig::default(), 1).unwrap();
            let b = fit_artifacts(&train, &other, rep, ModelKind::KMeans, &ModelConfig::default(), 1).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn toml_config_round_trip() {
        let cfg = RunConfig::from_toml_str(
            r#"
            input = "logs/bgl.log"
            adapter = "bgl"
            seed = 7
            representations = ["trigrams", "events"]
            models = ["kmeans"]
            scenarios = ["unfiltered"]
            f1_search = { budgeted = 30 }
            [model]
            kmeans_k = 4
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.model.kmeans_k, 4);
        assert_eq!(cfg.model.iforest_trees, 100);
        assert_eq!(cfg.f1_search, ThresholdSearch::Budgeted(30));
        assert_eq!(cfg.cells().unwrap().len(), 2);
        assert!(RunConfig::from_toml_str("bogus = 1").is_err());
    }
}
