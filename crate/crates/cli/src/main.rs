use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fastlad::detect::{ModelKind, RarityDenominator};
use fastlad::evaluate::ThresholdSearch;
use fastlad::ingest::{load_with, Adapter, LoadOptions, SplitMode};
use fastlad::normalize::normalize_records;
use fastlad::pipeline::{run, RunConfig, RunOutput, Scenario};
use fastlad::represent::drain::Drain;
use fastlad::represent::Representation;
use fastlad::synthetic::{gen_synthetic, AnomalyKind, SyntheticSpec};

#[derive(Parser)]
#[command(name = "fastlad", version, about = "Fast unsupervised log anomaly detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate one configuration, or a grid of them, on a labelled corpus.
    Run(Box<RunArgs>),
    /// Write a labelled synthetic corpus in BGL format.
    Gen(GenArgs),
    /// Mine Drain templates from a corpus and print them as CSV.
    Templates(TemplateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// bgl, thunderbird (tb), hdfs, hadoop or plain.
    #[arg(long)]
    adapter: Option<Adapter>,
    /// `key,label` CSV for hdfs and hadoop.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Name used in reports and file names.
    #[arg(long)]
    dataset: Option<String>,
    /// words, trigrams or events; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    rep: Vec<Representation>,
    /// oovd, rm, kmeans or iforest; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    model: Vec<ModelKind>,
    /// unfiltered or normal_only; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    scenario: Vec<Scenario>,
    #[arg(long)]
    train_frac: Option<f64>,
    #[arg(long)]
    sample_frac: Option<f64>,
    /// Train on the earliest units instead of a random sample.
    #[arg(long)]
    chronological: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for report.json, grid.csv and histograms.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Every representation, model and scenario not fixed by other flags;
    /// oovd is skipped for unfiltered training.
    #[arg(long)]
    grid: bool,
    /// Rerun with seeds seed, seed+1, ... and summarize.
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    /// Isolation forest subsample size.
    #[arg(long)]
    subsample: Option<usize>,
    /// Drain similarity threshold.
    #[arg(long)]
    sim: Option<f64>,
    /// Drain tree depth.
    #[arg(long)]
    depth: Option<usize>,
    /// Divide RM scores by in-vocabulary terms only.
    #[arg(long)]
    rm_in_vocab: bool,
    /// Search at most this many F1 thresholds instead of all of them.
    #[arg(long)]
    f1_budget: Option<usize>,
    /// Histogram bins.
    #[arg(long)]
    bins: Option<usize>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 10_000)]
    normal: usize,
    #[arg(long, default_value_t = 200)]
    anomalies: usize,
    #[arg(long, default_value_t = 20)]
    templates: usize,
    /// unseen_token or rare_token.
    #[arg(long, default_value = "unseen_token")]
    kind: AnomalyKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TemplateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "bgl")]
    adapter: Adapter,
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 4)]
    depth: usize,
    #[arg(long, default_value_t = 0.4)]
    sim: f64,
    /// Output file; standard output if absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => cmd_run(*args),
        Command::Gen(args) => cmd_gen(args),
        Command::Templates(args) => cmd_templates(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

type CliResult = Result<(), Box<dyn std::error::Error>>;

fn build_config(args: RunArgs) -> Result<RunConfig, fastlad::Error> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| fastlad::Error::io(path, e))?;
            RunConfig::from_toml_str(&text)?
        }
        None => RunConfig::default(),
    };
    if args.grid {
        let grid = RunConfig::full_grid();
        cfg.grid = true;
        cfg.representations = grid.representations;
        cfg.models = grid.models;
        cfg.scenarios = grid.scenarios;
    }
    if args.input.is_some() {
        cfg.input = args.input;
    }
    if let Some(a) = args.adapter {
        cfg.adapter = a;
    }
    if args.labels.is_some() {
        cfg.label_file = args.labels;
    }
    if args.dataset.is_some() {
        cfg.dataset = args.dataset;
    }
    if !args.rep.is_empty() {
        cfg.representations = args.rep;
    }
    if !args.model.is_empty() {
        cfg.models = args.model;
    }
    if !args.scenario.is_empty() {
        cfg.scenarios = args.scenario;
    }
    if let Some(f) = args.train_frac {
        cfg.train_fraction = f;
    }
    if args.sample_frac.is_some() {
        cfg.sample_fraction = args.sample_frac;
    }
    if args.chronological {
        cfg.split_mode = SplitMode::Chronological;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if args.out.is_some() {
        cfg.out_dir = args.out;
    }
    if let Some(n) = args.repeats {
        cfg.repeats = n;
    }
    if let Some(k) = args.k {
        cfg.model.kmeans_k = k;
    }
    if let Some(t) = args.trees {
        cfg.model.iforest_trees = t;
    }
    if let Some(s) = args.subsample {
        cfg.model.iforest_subsample = s;
    }
    if let Some(s) = args.sim {
        cfg.model.drain_sim_threshold = s;
    }
    if let Some(d) = args.depth {
        cfg.model.drain_depth = d;
    }
    if args.rm_in_vocab {
        cfg.model.rm_denominator = RarityDenominator::InVocabulary;
    }
    if let Some(b) = args.f1_budget {
        cfg.f1_search = ThresholdSearch::Budgeted(b);
    }
    if let Some(b) = args.bins {
        cfg.hist_bins = b;
    }
    Ok(cfg)
}

fn print_table(out: &RunOutput) -> io::Result<()> {
    let mut w = io::stdout().lock();
    writeln!(
        w,
        "{:<10} {:<9} {:<8} {:<12} {:>6} {:>8} {:>8} {:>10}",
        "dataset", "rep", "model", "scenario", "seed", "auc", "f1", "model_s"
    )?;
    for r in &out.runs {
        writeln!(
            w,
            "{:<10} {:<9} {:<8} {:<12} {:>6} {:>8.4} {:>8.4} {:>10.4}",
            r.meta.dataset, r.meta.representation, r.meta.model, r.meta.scenario, r.meta.seed, r.auc, r.best_f1, r.model_time
        )?;
    }
    if !out.summary.is_empty() {
        writeln!(w)?;
        writeln!(
            w,
            "{:<9} {:<8} {:<12} {:>5} {:>8} {:>8} {:>8} {:>8}",
            "rep", "model", "scenario", "runs", "auc", "auc_min", "auc_max", "f1"
        )?;
        for s in &out.summary {
            writeln!(
                w,
                "{:<9} {:<8} {:<12} {:>5} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                s.representation, s.model, s.scenario, s.runs, s.auc.mean, s.auc.min, s.auc.max, s.f1.mean
            )?;
        }
    }
    Ok(())
}

fn cmd_run(args: RunArgs) -> CliResult {
    let cfg = build_config(args)?;
    let out = run(&cfg)?;
    print_table(&out)?;
    Ok(())
}

fn cmd_gen(args: GenArgs) -> CliResult {
    let corpus = gen_synthetic(&SyntheticSpec {
        n_normal: args.normal,
        n_anomalies: args.anomalies,
        n_templates: args.templates,
        anomaly_kind: args.kind,
        seed: args.seed,
    })?;
    match args.out {
        Some(path) => corpus.write_to(path)?,
        None => {
            let mut w = io::BufWriter::new(io::stdout().lock());
            for line in &corpus.lines {
                writeln!(w, "{line}")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn cmd_templates(args: TemplateArgs) -> CliResult {
    let opts = LoadOptions {
        label_file: args.labels,
        sample: None,
    };
    let mut rs = load_with(&args.input, args.adapter, &opts)?;
    normalize_records(&mut rs);
    let mut drain = Drain::new(fastlad::represent::drain::DrainParams {
        depth: args.depth,
        sim_threshold: args.sim,
        ..Default::default()
    })?;
    for r in rs.records() {
        drain.parse(r.text());
    }
    match args.out {
        Some(path) => {
            let f = fs::File::create(&path).map_err(|e| fastlad::Error::io(&path, e))?;
            drain.write_templates(io::BufWriter::new(f))?;
        }
        None => drain.write_templates(io::stdout().lock())?,
    }
    Ok(())
}
