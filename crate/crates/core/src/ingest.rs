//! Loading labelled log corpora, sampling and train/test splitting.
//!
//! Each dataset adapter turns one physical file (or, for Hadoop, a directory
//! of application logs) into a [`RecordSet`]. Line-labelled corpora (BGL,
//! Thunderbird) carry their label in the first field of every line: `-` is
//! normal, any other alert tag is an anomaly. Sequence-labelled corpora (HDFS,
//! Hadoop) group lines under a sequence key and take labels from a separate
//! `key,label` CSV file.
//!
//! All units of work here (sampling, splitting, filtering) act on *units*: a
//! single record for line-level sets and a whole sequence for sequence-level
//! sets, so a sequence never straddles two sides of a split.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Normal,
    Anomaly,
    Unknown,
}

impl Label {
    pub fn is_anomaly(self) -> bool {
        self == Label::Anomaly
    }

    fn parse(s: &str) -> Option<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" => Some(Label::Normal),
            "anomaly" => Some(Label::Anomaly),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    /// Message text as extracted by the adapter (header fields stripped).
    pub raw: String,
    pub normalized: Option<String>,
    pub label: Label,
    /// Block, application or other grouping id for sequence-labelled data.
    pub seq_key: Option<String>,
    /// 1-based line number in the source file.
    pub line_no: u64,
}

impl LogRecord {
    pub fn new(raw: impl Into<String>, label: Label, line_no: u64) -> Self {
        LogRecord {
            raw: raw.into(),
            normalized: None,
            label,
            seq_key: None,
            line_no,
        }
    }

    pub fn with_seq_key(mut self, key: impl Into<String>) -> Self {
        self.seq_key = Some(key.into());
        self
    }

    /// Normalized text when present, raw text otherwise.
    pub fn text(&self) -> &str {
        self.normalized.as_deref().unwrap_or(&self.raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Line,
    Sequence,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecordSet {
    records: Vec<LogRecord>,
    granularity: Granularity,
}

/// One sampling/splitting unit: a record, or every record of one sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub key: Option<String>,
    /// Indices into the record set, in record order.
    pub members: Vec<usize>,
}

impl RecordSet {
    pub fn new(records: Vec<LogRecord>, granularity: Granularity) -> Result<Self> {
        if granularity == Granularity::Sequence {
            if let Some(i) = records.iter().position(|r| r.seq_key.is_none()) {
                return Err(Error::MissingSeqKey(i));
            }
        }
        Ok(RecordSet {
            records,
            granularity,
        })
    }

    pub fn lines(records: Vec<LogRecord>) -> Self {
        RecordSet {
            records,
            granularity: Granularity::Line,
        }
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn records_mut(&mut self) -> &mut [LogRecord] {
        &mut self.records
    }

    pub fn into_records(self) -> Vec<LogRecord> {
        self.records
    }

    pub fn granularity(&self) -> Granularity {
        self.granularity
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Units in order of first appearance.
    pub fn units(&self) -> Vec<Unit> {
        match self.granularity {
            Granularity::Line => (0..self.records.len())
                .map(|i| Unit {
                    key: self.records[i].seq_key.clone(),
                    members: vec![i],
                })
                .collect(),
            Granularity::Sequence => {
                let mut index: FxHashMap<&str, usize> = FxHashMap::default();
                let mut units: Vec<Unit> = Vec::new();
                for (i, r) in self.records.iter().enumerate() {
                    let key = r.seq_key.as_deref().expect("sequence records carry keys");
                    let slot = *index.entry(key).or_insert_with(|| {
                        units.push(Unit {
                            key: Some(key.to_owned()),
                            members: Vec::new(),
                        });
                        units.len() - 1
                    });
                    units[slot].members.push(i);
                }
                units
            }
        }
    }

    /// Label of a unit: anomalous if any member is, unknown if any member is
    /// unknown and none is anomalous, normal otherwise.
    pub fn unit_label(&self, unit: &Unit) -> Label {
        let mut label = Label::Normal;
        for &i in &unit.members {
            match self.records[i].label {
                Label::Anomaly => return Label::Anomaly,
                Label::Unknown => label = Label::Unknown,
                Label::Normal => {}
            }
        }
        label
    }

    fn keep_units(&self, units: &[Unit], keep: &[bool]) -> RecordSet {
        let mut mask = vec![false; self.records.len()];
        for (unit, &k) in units.iter().zip(keep) {
            if k {
                for &i in &unit.members {
                    mask[i] = true;
                }
            }
        }
        let records = self
            .records
            .iter()
            .zip(&mask)
            .filter(|(_, &m)| m)
            .map(|(r, _)| r.clone())
            .collect();
        RecordSet {
            records,
            granularity: self.granularity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Adapter {
    Bgl,
    Thunderbird,
    Hdfs,
    Hadoop,
    Plain,
}

impl Adapter {
    pub fn name(self) -> &'static str {
        match self {
            Adapter::Bgl => "bgl",
            Adapter::Thunderbird => "thunderbird",
            Adapter::Hdfs => "hdfs",
            Adapter::Hadoop => "hadoop",
            Adapter::Plain => "plain",
        }
    }

    pub fn granularity(self) -> Granularity {
        match self {
            Adapter::Hdfs | Adapter::Hadoop => Granularity::Sequence,
            _ => Granularity::Line,
        }
    }

    /// Number of leading header fields stripped before the message body.
    fn header_fields(self) -> usize {
        match self {
            // label epoch date node time node-repeat type component level
            Adapter::Bgl => 9,
            // label epoch date admin month day time admin-addr
            Adapter::Thunderbird => 8,
            // date time pid level component
            Adapter::Hdfs => 5,
            // date time level [thread]
            Adapter::Hadoop => 4,
            Adapter::Plain => 0,
        }
    }
}

impl FromStr for Adapter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bgl" => Ok(Adapter::Bgl),
            "thunderbird" | "tb" => Ok(Adapter::Thunderbird),
            "hdfs" => Ok(Adapter::Hdfs),
            "hadoop" => Ok(Adapter::Hadoop),
            "plain" => Ok(Adapter::Plain),
            _ => Err(Error::UnknownAdapter(s.to_owned())),
        }
    }
}

impl fmt::Display for Adapter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Default)]
pub struct LoadOptions {
    /// `key,label` CSV for sequence-labelled adapters.
    pub label_file: Option<PathBuf>,
    /// Sample `(fraction, seed)` applied while loading.
    pub sample: Option<(f64, u64)>,
}

pub fn load(path: impl AsRef<Path>, adapter: Adapter) -> Result<RecordSet> {
    load_with(path, adapter, &LoadOptions::default())
}

/// Loads a corpus. For line-level adapters a requested sample is drawn while
/// streaming (one counting pass, one selecting pass), so only the kept lines
/// are ever resident; the selection is identical to `sample(load(..))`.
pub fn load_with(path: impl AsRef<Path>, adapter: Adapter, opts: &LoadOptions) -> Result<RecordSet> {
    let path = path.as_ref();
    if let Some((fraction, _)) = opts.sample {
        check_sample_fraction(fraction)?;
    }
    match adapter {
        Adapter::Bgl | Adapter::Thunderbird | Adapter::Plain => {
            let keep = match opts.sample {
                Some((fraction, seed)) => {
                    let mut n = 0usize;
                    for_each_line(path, |_, line| {
                        if accepts_line(adapter, line) {
                            n += 1;
                        }
                        Ok(())
                    })?;
                    let mut mask = vec![false; n];
                    for i in sample_indices(n, fraction, seed) {
                        mask[i] = true;
                    }
                    Some(mask)
                }
                None => None,
            };
            let mut records = Vec::new();
            let mut ordinal = 0usize;
            for_each_line(path, |line_no, line| {
                if !accepts_line(adapter, line) {
                    return Ok(());
                }
                let kept = keep.as_ref().map_or(true, |m| m[ordinal]);
                ordinal += 1;
                if kept {
                    records.push(parse_line_labelled(adapter, line, line_no));
                }
                Ok(())
            })?;
            Ok(RecordSet::lines(records))
        }
        Adapter::Hdfs | Adapter::Hadoop => {
            let label_path = opts
                .label_file
                .as_deref()
                .ok_or(Error::MissingLabelFile(adapter.name()))?;
            let labels = read_label_file(label_path)?;
            let rs = if adapter == Adapter::Hdfs {
                load_hdfs(path, &labels)?
            } else {
                load_hadoop(path, &labels)?
            };
            match opts.sample {
                Some((fraction, seed)) => sample(&rs, fraction, seed),
                None => Ok(rs),
            }
        }
    }
}

/// Parses one line of a line-level corpus. Returns `None` for lines the
/// adapter skips and for sequence-level adapters.
pub fn parse_line(adapter: Adapter, line: &str, line_no: u64) -> Option<LogRecord> {
    (adapter.granularity() == Granularity::Line && accepts_line(adapter, line))
        .then(|| parse_line_labelled(adapter, line, line_no))
}

/// In-memory counterpart of [`load`] for line-level adapters.
pub fn records_from_lines<S: AsRef<str>>(adapter: Adapter, lines: &[S]) -> Result<RecordSet> {
    if adapter.granularity() != Granularity::Line {
        return Err(Error::InvalidParameter(format!(
            "`{}` corpora are loaded from files",
            adapter.name()
        )));
    }
    Ok(RecordSet::lines(
        lines
            .iter()
            .enumerate()
            .filter_map(|(i, l)| parse_line(adapter, l.as_ref(), i as u64 + 1))
            .collect(),
    ))
}

fn accepts_line(adapter: Adapter, line: &str) -> bool {
    match adapter {
        Adapter::Plain => true,
        // Lines without an alert tag carry no label.
        _ => !line.trim().is_empty(),
    }
}

fn parse_line_labelled(adapter: Adapter, line: &str, line_no: u64) -> LogRecord {
    match adapter {
        Adapter::Plain => LogRecord::new(line, Label::Unknown, line_no),
        _ => {
            let tag = line.split_whitespace().next().unwrap_or("");
            let label = if tag == "-" {
                Label::Normal
            } else {
                Label::Anomaly
            };
            LogRecord::new(strip_fields(line, adapter.header_fields()), label, line_no)
        }
    }
}

/// Drops the first `n` whitespace-separated fields, keeping the remainder
/// verbatim (internal spacing included).
fn strip_fields(line: &str, n: usize) -> &str {
    let mut rest = line.trim_start();
    for _ in 0..n {
        match rest.find(char::is_whitespace) {
            Some(end) => rest = rest[end..].trim_start(),
            None => return "",
        }
    }
    rest
}

/// Streams a file line by line, decoding invalid UTF-8 lossily.
fn for_each_line(path: &Path, mut f: impl FnMut(u64, &str) -> Result<()>) -> Result<()> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::with_capacity(1 << 16, file);
    let mut buf = Vec::new();
    let mut line_no = 0u64;
    loop {
        buf.clear();
        let n = reader
            .read_until(b'\n', &mut buf)
            .map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Ok(());
        }
        line_no += 1;
        if buf.last() == Some(&b'\n') {
            buf.pop();
        }
        if buf.last() == Some(&b'\r') {
            buf.pop();
        }
        let line = String::from_utf8_lossy(&buf);
        f(line_no, &line)?;
    }
}

fn read_label_file(path: &Path) -> Result<HashMap<String, Label>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut labels = HashMap::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let line = row.position().map_or(i as u64 + 1, |p| p.line());
        if row.len() < 2 {
            return Err(Error::LabelFile {
                path: path.to_owned(),
                line,
                reason: "expected two columns".into(),
            });
        }
        match Label::parse(&row[1]) {
            Some(label) => {
                labels.insert(row[0].to_owned(), label);
            }
            // Header row.
            None if i == 0 => {}
            None => {
                return Err(Error::LabelFile {
                    path: path.to_owned(),
                    line,
                    reason: format!("label `{}` is neither Normal nor Anomaly", &row[1]),
                })
            }
        }
    }
    Ok(labels)
}

fn block_id_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"blk_-?[0-9]+").expect("valid pattern"))
}

/// Block ids referenced by an HDFS message, deduplicated, in order of
/// appearance.
pub fn hdfs_block_ids(message: &str) -> Vec<&str> {
    let mut ids: Vec<&str> = Vec::new();
    for m in block_id_pattern().find_iter(message) {
        if !ids.contains(&m.as_str()) {
            ids.push(m.as_str());
        }
    }
    ids
}

/// A line referencing several blocks is attributed to each of them; lines
/// referencing none are dropped.
fn load_hdfs(path: &Path, labels: &HashMap<String, Label>) -> Result<RecordSet> {
    let mut records = Vec::new();
    for_each_line(path, |line_no, line| {
        let message = strip_fields(line, Adapter::Hdfs.header_fields());
        for key in hdfs_block_ids(message) {
            let label = *labels
                .get(key)
                .ok_or_else(|| Error::UnlabeledSequence(key.to_owned()))?;
            records.push(LogRecord::new(message, label, line_no).with_seq_key(key));
        }
        Ok(())
    })?;
    RecordSet::new(records, Granularity::Sequence)
}

/// Directory layout: one entry per application. An entry is either a plain
/// file (key = file stem) or a directory whose files are read in name order
/// (key = directory name).
fn load_hadoop(path: &Path, labels: &HashMap<String, Label>) -> Result<RecordSet> {
    let mut entries = sorted_entries(path)?;
    entries.retain(|p| !is_same_file(p, path));
    let mut records = Vec::new();
    for entry in entries {
        let (key, files) = if entry.is_dir() {
            let key = entry.file_name().map(|s| s.to_string_lossy().into_owned());
            let files = sorted_entries(&entry)?
                .into_iter()
                .filter(|p| p.is_file())
                .collect();
            (key, files)
        } else {
            let key = entry.file_stem().map(|s| s.to_string_lossy().into_owned());
            (key, vec![entry.clone()])
        };
        let Some(key) = key else { continue };
        if !labels.contains_key(&key) {
            // Stray files such as the label list itself.
            if files.len() == 1 && files[0].extension().is_some_and(|e| e == "csv") {
                continue;
            }
            return Err(Error::UnlabeledSequence(key));
        }
        let label = labels[&key];
        for file in files {
            for_each_line(&file, |line_no, line| {
                let message = strip_hadoop_header(line);
                records.push(LogRecord::new(message, label, line_no).with_seq_key(key.as_str()));
                Ok(())
            })?;
        }
    }
    RecordSet::new(records, Granularity::Sequence)
}

fn strip_hadoop_header(line: &str) -> &str {
    let first = line.split_whitespace().next().unwrap_or("");
    let dated = first.len() == 10
        && first
            .bytes()
            .enumerate()
            .all(|(i, b)| if i == 4 || i == 7 { b == b'-' } else { b.is_ascii_digit() });
    if dated {
        strip_fields(line, Adapter::Hadoop.header_fields())
    } else {
        line
    }
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        out.push(entry.map_err(|e| Error::io(dir, e))?.path());
    }
    out.sort();
    Ok(out)
}

fn is_same_file(a: &Path, b: &Path) -> bool {
    a.canonicalize().ok() == b.canonicalize().ok()
}

/// `⌊x⌉` with halves rounded up.
pub fn round_half_up(x: f64) -> usize {
    (x + 0.5).floor().max(0.0) as usize
}

fn check_sample_fraction(fraction: f64) -> Result<()> {
    if fraction > 0.0 && fraction <= 1.0 {
        Ok(())
    } else {
        Err(Error::FractionOutOfRange(fraction))
    }
}

/// Sorted indices of `⌊fraction·n⌉` items drawn uniformly without replacement.
pub fn sample_indices(n: usize, fraction: f64, seed: u64) -> Vec<usize> {
    let k = round_half_up(fraction * n as f64).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    picked
}

/// Keeps `⌊fraction·units⌉` units chosen uniformly without replacement.
pub fn sample(rs: &RecordSet, fraction: f64, seed: u64) -> Result<RecordSet> {
    check_sample_fraction(fraction)?;
    let units = rs.units();
    let mut keep = vec![false; units.len()];
    for i in sample_indices(units.len(), fraction, seed) {
        keep[i] = true;
    }
    Ok(rs.keep_units(&units, &keep))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMode {
    #[default]
    Random,
    Chronological,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    train_fraction: f64,
    seed: u64,
    mode: SplitMode,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, seed: u64, mode: SplitMode) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::FractionOutOfRange(train_fraction));
        }
        Ok(SplitSpec {
            train_fraction,
            seed,
            mode,
        })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> SplitMode {
        self.mode
    }
}

/// Splits by unit into `(train, test)`; both sides keep the input order.
pub fn split(rs: &RecordSet, spec: &SplitSpec) -> Result<(RecordSet, RecordSet)> {
    if rs.is_empty() {
        return Err(Error::EmptyRecordSet);
    }
    let units = rs.units();
    let n = units.len();
    let n_train = round_half_up(spec.train_fraction * n as f64).min(n);
    let degenerate = |side| Error::DegenerateSplit {
        fraction: spec.train_fraction,
        units: n,
        side,
    };
    if n_train == 0 {
        return Err(degenerate("train"));
    }
    if n_train == n {
        return Err(degenerate("test"));
    }
    let mut in_train = vec![false; n];
    match spec.mode {
        SplitMode::Chronological => in_train[..n_train].fill(true),
        SplitMode::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
            for &i in &order[..n_train] {
                in_train[i] = true;
            }
        }
    }
    let in_test: Vec<bool> = in_train.iter().map(|t| !t).collect();
    Ok((rs.keep_units(&units, &in_train), rs.keep_units(&units, &in_test)))
}

/// Keeps only normal units: the training data of the normal-only scenario.
pub fn filter_normal(train: &RecordSet) -> Result<RecordSet> {
    if let Some(i) = train.records.iter().position(|r| r.label == Label::Unknown) {
        return Err(Error::UnknownLabel(i));
    }
    let units = train.units();
    let keep: Vec<bool> = units
        .iter()
        .map(|u| train.unit_label(u) == Label::Normal)
        .collect();
    Ok(train.keep_units(&units, &keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    const BGL_NORMAL: &str = "- 1117838570 2005.06.03 R02-M1-N0-C:J12-U11 2005-06-03-15.42.50.363779 R02-M1-N0-C:J12-U11 RAS KERNEL INFO instruction cache parity error corrected";
    const BGL_ANOMALY: &str = "KERNDTLB 1117838978 2005.06.03 R23-M0-NE-C:J05-U01 2005-06-03-15.49.38.026704 R23-M0-NE-C:J05-U01 RAS KERNEL FATAL data TLB error interrupt";

    fn write(dir: &tempfile::TempDir, name: &str, body: &[u8]) -> PathBuf {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body).unwrap();
        p
    }

    fn lines(n: usize) -> RecordSet {
        RecordSet::lines(
            (0..n)
                .map(|i| LogRecord::new(format!("line {i}"), Label::Normal, i as u64 + 1))
                .collect(),
        )
    }

    fn seqs(spec: &[(&str, usize, Label)]) -> RecordSet {
        let mut records = Vec::new();
        let mut line = 0;
        for &(key, n, label) in spec {
            for _ in 0..n {
                line += 1;
                records.push(LogRecord::new(format!("{key} {line}"), label, line).with_seq_key(key));
            }
        }
        RecordSet::new(records, Granularity::Sequence).unwrap()
    }

    #[test]
    fn bgl_alert_tag_sets_label() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "bgl.log", format!("{BGL_NORMAL}\n{BGL_ANOMALY}\n").as_bytes());
        let rs = load(&p, Adapter::Bgl).unwrap();
        assert_eq!(rs.len(), 2);
        assert_eq!(rs.records()[0].label, Label::Normal);
        assert_eq!(rs.records()[0].raw, "instruction cache parity error corrected");
        assert_eq!(rs.records()[1].label, Label::Anomaly);
        assert_eq!(rs.records()[1].raw, "data TLB error interrupt");
        assert_eq!(rs.records()[1].line_no, 2);
    }

    #[test]
    fn thunderbird_invalid_utf8_is_lossy() {
        let dir = tempfile::tempdir().unwrap();
        let mut body = b"- 1131566461 2005.11.09 dn228 Nov 9 12:01:01 dn228/dn228 crond[2915]: caf\xe9 ok\r\n".to_vec();
        body.extend_from_slice(b"VAPI 1131566461 2005.11.09 tbird-admin1 Nov 9 12:01:01 local@tbird-admin1 kernel: boom\n");
        let p = write(&dir, "tb.log", &body);
        let rs = load(&p, Adapter::Thunderbird).unwrap();
        assert_eq!(rs.records()[0].raw, "crond[2915]: caf\u{fffd} ok");
        assert_eq!(rs.records()[0].label, Label::Normal);
        assert_eq!(rs.records()[1].raw, "kernel: boom");
        assert_eq!(rs.records()[1].label, Label::Anomaly);
    }

    #[test]
    fn plain_adapter_is_unlabelled() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "p.log", b"a\nb\nc\n");
        let rs = load(&p, Adapter::Plain).unwrap();
        assert_eq!(rs.len(), 3);
        assert!(rs.records().iter().all(|r| r.label == Label::Unknown));
    }

    #[test]
    fn unreadable_file_and_unknown_adapter() {
        assert!(matches!(
            load("/definitely/not/here.log", Adapter::Plain),
            Err(Error::Io { .. })
        ));
        assert!(matches!("spell".parse::<Adapter>(), Err(Error::UnknownAdapter(_))));
        assert_eq!("TB".parse::<Adapter>().unwrap(), Adapter::Thunderbird);
    }

    #[test]
    fn hdfs_requires_label_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "hdfs.log", b"081109 203615 148 INFO dfs.DataNode: got blk_1\n");
        assert!(matches!(load(&p, Adapter::Hdfs), Err(Error::MissingLabelFile("hdfs"))));
    }

    #[test]
    fn hdfs_attributes_lines_to_every_block() {
        let dir = tempfile::tempdir().unwrap();
        let log = write(
            &dir,
            "hdfs.log",
            b"081109 203615 148 INFO dfs.DataNode$PacketResponder: PacketResponder 1 for block blk_38865049064139660 terminating\n\
              081109 203807 222 INFO dfs.DataNode: no block here\n\
              081109 204005 35 INFO dfs.FSNamesystem: BLOCK* NameSystem.addStoredBlock: blk_-6952295868487656571 and blk_38865049064139660 and blk_-6952295868487656571\n",
        );
        let labels = write(
            &dir,
            "anomaly_label.csv",
            b"BlockId,Label\nblk_38865049064139660,Normal\nblk_-6952295868487656571,anomaly\n",
        );
        let opts = LoadOptions {
            label_file: Some(labels),
            sample: None,
        };
        let rs = load_with(&log, Adapter::Hdfs, &opts).unwrap();
        assert_eq!(rs.granularity(), Granularity::Sequence);
        let keys: Vec<_> = rs.records().iter().map(|r| r.seq_key.clone().unwrap()).collect();
        assert_eq!(
            keys,
            ["blk_38865049064139660", "blk_-6952295868487656571", "blk_38865049064139660"]
        );
        assert_eq!(rs.records()[1].label, Label::Anomaly);
        assert_eq!(rs.records()[1].line_no, 3);
        let units = rs.units();
        assert_eq!(units.len(), 2);
        assert_eq!(units[0].members, vec![0, 2]);
    }

    #[test]
    fn hdfs_unlabelled_block_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let log = write(&dir, "hdfs.log", b"081109 203615 148 INFO x: blk_7 done\n");
        let labels = write(&dir, "l.csv", b"blk_8,Normal\n");
        let opts = LoadOptions {
            label_file: Some(labels),
            sample: None,
        };
        assert!(matches!(
            load_with(&log, Adapter::Hdfs, &opts),
            Err(Error::UnlabeledSequence(k)) if k == "blk_7"
        ));
    }

    #[test]
    fn hadoop_directory_layout() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("apps");
        std::fs::create_dir_all(root.join("application_2")).unwrap();
        std::fs::write(
            root.join("application_1.log"),
            "2015-10-18 18:01:47,978 INFO [main] org.apache.Foo: started 1\n",
        )
        .unwrap();
        std::fs::write(root.join("application_2").join("a.log"), "2015-10-18 18:01:48,000 WARN [x] Bar: lost\n\tat trace\n").unwrap();
        let labels = write(&dir, "labels.csv", b"application_1,Normal\napplication_2,Anomaly\n");
        let opts = LoadOptions {
            label_file: Some(labels),
            sample: None,
        };
        let rs = load_with(&root, Adapter::Hadoop, &opts).unwrap();
        let raws: Vec<_> = rs.records().iter().map(|r| r.raw.as_str()).collect();
        assert_eq!(raws, ["org.apache.Foo: started 1", "Bar: lost", "\tat trace"]);
        assert_eq!(rs.units().len(), 2);
        assert_eq!(rs.records()[2].label, Label::Anomaly);
    }

    #[test]
    fn streaming_sample_matches_in_memory_sample() {
        let dir = tempfile::tempdir().unwrap();
        let body: String = (0..500).map(|i| format!("- {i} message {i}\n")).collect();
        let p = write(&dir, "bgl.log", body.as_bytes());
        let full = load(&p, Adapter::Bgl).unwrap();
        let opts = LoadOptions {
            label_file: None,
            sample: Some((0.1, 3)),
        };
        let streamed = load_with(&p, Adapter::Bgl, &opts).unwrap();
        assert_eq!(streamed.len(), 50);
        assert_eq!(streamed, sample(&full, 0.1, 3).unwrap());
    }

    #[test]
    fn sample_counts_and_determinism() {
        let rs = lines(1000);
        assert_eq!(sample(&rs, 1.0, 1).unwrap(), rs);
        let a = sample(&rs, 0.1, 7).unwrap();
        assert_eq!(a.len(), 100);
        assert_eq!(a, sample(&rs, 0.1, 7).unwrap());
        assert!(a.records().windows(2).all(|w| w[0].line_no < w[1].line_no));
        assert!(matches!(sample(&rs, 0.0, 1), Err(Error::FractionOutOfRange(_))));
        assert!(matches!(sample(&rs, 1.5, 1), Err(Error::FractionOutOfRange(_))));
    }

    #[test]
    fn split_line_counts() {
        let rs = lines(100);
        let spec = SplitSpec::new(0.05, 42, SplitMode::Random).unwrap();
        let (train, test) = split(&rs, &spec).unwrap();
        assert_eq!((train.len(), test.len()), (5, 95));
    }

    #[test]
    fn split_chronological_prefix() {
        let rs = lines(10);
        let spec = SplitSpec::new(0.5, 0, SplitMode::Chronological).unwrap();
        let (train, test) = split(&rs, &spec).unwrap();
        let nos: Vec<_> = train.records().iter().map(|r| r.line_no).collect();
        assert_eq!(nos, [1, 2, 3, 4, 5]);
        assert_eq!(test.records()[0].line_no, 6);
    }

    #[test]
    fn split_keeps_sequences_whole() {
        let rs = seqs(&[("S1", 10, Label::Normal), ("S2", 3, Label::Normal), ("S3", 4, Label::Anomaly), ("S4", 1, Label::Normal)]);
        for seed in 0..20 {
            let spec = SplitSpec::new(0.5, seed, SplitMode::Random).unwrap();
            let (train, test) = split(&rs, &spec).unwrap();
            let s1_train = train.records().iter().filter(|r| r.seq_key.as_deref() == Some("S1")).count();
            let s1_test = test.records().iter().filter(|r| r.seq_key.as_deref() == Some("S1")).count();
            assert!(s1_train == 10 && s1_test == 0 || s1_train == 0 && s1_test == 10);
            assert_eq!(train.units().len(), 2);
        }
    }

    #[test]
    fn split_errors() {
        assert!(SplitSpec::new(0.0, 0, SplitMode::Random).is_err());
        assert!(SplitSpec::new(1.0, 0, SplitMode::Random).is_err());
        let spec = SplitSpec::new(0.05, 0, SplitMode::Random).unwrap();
        assert!(matches!(split(&lines(5), &spec), Err(Error::DegenerateSplit { side: "train", .. })));
        let spec = SplitSpec::new(0.9, 0, SplitMode::Random).unwrap();
        assert!(matches!(split(&lines(2), &spec), Err(Error::DegenerateSplit { side: "test", .. })));
        assert!(matches!(split(&lines(0), &spec), Err(Error::EmptyRecordSet)));
    }

    #[test]
    fn filter_normal_lines_and_sequences() {
        let mut records: Vec<_> = (0..10)
            .map(|i| LogRecord::new("x", if i < 8 { Label::Normal } else { Label::Anomaly }, i))
            .collect();
        let rs = RecordSet::lines(records.clone());
        assert_eq!(filter_normal(&rs).unwrap().len(), 8);

        let all_normal = lines(6);
        assert_eq!(filter_normal(&all_normal).unwrap(), all_normal);

        let s = seqs(&[("S1", 3, Label::Normal), ("S2", 2, Label::Anomaly)]);
        let kept = filter_normal(&s).unwrap();
        assert!(kept.records().iter().all(|r| r.seq_key.as_deref() == Some("S1")));
        assert_eq!(kept.len(), 3);

        records[3].label = Label::Unknown;
        assert!(matches!(filter_normal(&RecordSet::lines(records)), Err(Error::UnknownLabel(3))));
    }

    #[test]
    fn sequence_set_requires_keys() {
        let r = vec![LogRecord::new("a", Label::Normal, 1)];
        assert!(matches!(RecordSet::new(r, Granularity::Sequence), Err(Error::MissingSeqKey(0))));
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_half_up(2.5), 3);
        assert_eq!(round_half_up(2.4999), 2);
        assert_eq!(round_half_up(0.05 * 100.0), 5);
    }
}
