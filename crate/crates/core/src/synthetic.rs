//! Labelled synthetic corpora in BGL line format, for tests and demos.
//!
//! Normal lines come from a fixed set of templates whose only variable parts
//! are decimal numbers, so after normalization each template yields a single
//! message. Normal words never contain the letters `q`, `x` or `z`.
//!
//! * `UnseenToken` anomalies are short messages carrying at least one token
//!   built with one of those three letters (hence outside the normal
//!   vocabulary, as a word and through its trigrams) next to a few words
//!   taken from the normal templates.
//! * `RareToken` anomalies only reuse normal words, but mix words of eight to
//!   ten templates in one line.

use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalize::normalize_message;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    UnseenToken,
    RareToken,
}

impl std::str::FromStr for AnomalyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "unseen_token" | "unseen" => Ok(AnomalyKind::UnseenToken),
            "rare_token" | "rare" => Ok(AnomalyKind::RareToken),
            _ => Err(Error::Config(format!("unknown anomaly kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_normal: usize,
    pub n_anomalies: usize,
    pub n_templates: usize,
    pub anomaly_kind: AnomalyKind,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticCorpus {
    pub lines: Vec<String>,
    /// Normalized words that occur in normal lines.
    pub normal_vocabulary: BTreeSet<String>,
}

impl SyntheticCorpus {
    pub fn write_to(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for line in &self.lines {
            writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

const NORMAL_CONSONANTS: &[u8] = b"bcdfghjklmnprstvw";
const VOWELS: &[u8] = b"aeiouy";
const UNSEEN_LETTERS: &[u8] = b"qxz";
const ANOMALY_TAGS: &[&str] = &["KERNDTLB", "APPSEV", "KERNSTOR", "MONILL", "KERNPAN"];

fn pseudo_word(rng: &mut ChaCha8Rng, syllables: usize) -> String {
    let mut w = String::new();
    for _ in 0..syllables {
        w.push(*NORMAL_CONSONANTS.choose(rng).expect("non-empty") as char);
        w.push(*VOWELS.choose(rng).expect("non-empty") as char);
    }
    if rng.gen_bool(0.5) {
        w.push(*NORMAL_CONSONANTS.choose(rng).expect("non-empty") as char);
    }
    w
}

fn unseen_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.gen_range(1..=3);
    let mut w = pseudo_word(rng, syllables).into_bytes();
    let at = rng.gen_range(0..=w.len());
    w.insert(at, *UNSEEN_LETTERS.choose(rng).expect("non-empty"));
    String::from_utf8(w).expect("ascii")
}

#[derive(Debug, Clone)]
enum Slot {
    Word(String),
    /// Decimal number, optionally glued to a prefix such as `core.`.
    Number(Option<String>),
}

fn render(slots: &[Slot], rng: &mut ChaCha8Rng) -> String {
    let mut parts = Vec::with_capacity(slots.len());
    for s in slots {
        parts.push(match s {
            Slot::Word(w) => w.clone(),
            Slot::Number(prefix) => {
                let n: u32 = rng.gen_range(0..100_000);
                match prefix {
                    Some(p) => format!("{p}{n}"),
                    None => n.to_string(),
                }
            }
        });
    }
    parts.join(" ")
}

fn distinct_words(rng: &mut ChaCha8Rng, n: usize, taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let syllables = rng.gen_range(1..=3);
        let w = pseudo_word(rng, syllables);
        if taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn bgl_line(rng: &mut ChaCha8Rng, epoch: u64, tag: &str, level: &str, msg: &str) -> String {
    let rack = rng.gen_range(0..64);
    let node = format!("R{rack:02}-M{}-N{}-C:J{:02}-U{:02}", rng.gen_range(0..2), rng.gen_range(0..16), rng.gen_range(2..18), rng.gen_range(1..12));
    let day = epoch / 86_400;
    let secs = epoch % 86_400;
    format!(
        "{tag} {epoch} 2005.06.{:02} {node} 2005-06-{:02}-{:02}.{:02}.{:02}.{:06} {node} RAS KERNEL {level} {msg}",
        day % 28 + 1,
        day % 28 + 1,
        secs / 3600,
        secs / 60 % 60,
        secs % 60,
        rng.gen_range(0..1_000_000)
    )
}

/// Generates a shuffled, labelled corpus; identical for identical specs.
pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    if spec.n_normal == 0 || spec.n_templates == 0 {
        return Err(Error::InvalidParameter(
            "synthetic corpus needs normal lines and templates".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut taken = BTreeSet::new();
    let shared = distinct_words(&mut rng, 8, &mut taken);

    let mut templates: Vec<Vec<Slot>> = Vec::with_capacity(spec.n_templates);
    let mut template_words: Vec<Vec<String>> = Vec::with_capacity(spec.n_templates);
    for _ in 0..spec.n_templates {
        let n_own = rng.gen_range(5..=9);
        let own = distinct_words(&mut rng, n_own, &mut taken);
        let mut slots: Vec<Slot> = own.iter().cloned().map(Slot::Word).collect();
        for _ in 0..rng.gen_range(1..=2) {
            let w = shared.choose(&mut rng).expect("non-empty").clone();
            slots.insert(rng.gen_range(0..=slots.len()), Slot::Word(w));
        }
        for _ in 0..rng.gen_range(1..=2) {
            let prefix = rng.gen_bool(0.4).then(|| format!("{}.", pseudo_word(&mut rng, 1)));
            if let Some(p) = &prefix {
                taken.insert(p.trim_end_matches('.').to_owned());
            }
            slots.insert(rng.gen_range(1..=slots.len()), Slot::Number(prefix));
        }
        templates.push(slots);
        template_words.push(own);
    }
    // Mildly skewed template frequencies.
    let weights: Vec<f64> = (0..spec.n_templates).map(|_| rng.gen_range(1.0..4.0)).collect();
    let total: f64 = weights.iter().sum();

    let mut messages: Vec<(bool, String)> = Vec::with_capacity(spec.n_normal + spec.n_anomalies);
    let mut normal_vocabulary = BTreeSet::new();
    for _ in 0..spec.n_normal {
        let mut target = rng.gen::<f64>() * total;
        let mut t = 0;
        while t + 1 < weights.len() && target >= weights[t] {
            target -= weights[t];
            t += 1;
        }
        let msg = render(&templates[t], &mut rng);
        normal_vocabulary.extend(normalize_message(&msg).split_whitespace().map(str::to_owned));
        messages.push((false, msg));
    }

    let all_words: Vec<&String> = template_words.iter().flatten().collect();
    for _ in 0..spec.n_anomalies {
        let msg = match spec.anomaly_kind {
            AnomalyKind::UnseenToken => {
                let mut tokens = vec![unseen_word(&mut rng)];
                for _ in 0..rng.gen_range(1..=2) {
                    tokens.push((*all_words.choose(&mut rng).expect("non-empty")).clone());
                }
                tokens.shuffle(&mut rng);
                tokens.join(" ")
            }
            AnomalyKind::RareToken => {
                let n_sources = rng.gen_range(8..=10);
                let mut tokens: Vec<String> = Vec::new();
                for _ in 0..n_sources {
                    let words = template_words.choose(&mut rng).expect("non-empty");
                    let take = rng.gen_range(2..=3).min(words.len());
                    tokens.extend(words.choose_multiple(&mut rng, take).cloned());
                }
                tokens.shuffle(&mut rng);
                tokens.insert(rng.gen_range(0..=tokens.len()), rng.gen_range(0..100_000).to_string());
                tokens.join(" ")
            }
        };
        messages.push((true, msg));
    }
    messages.shuffle(&mut rng);

    let mut epoch = 1_117_838_570u64;
    let lines = messages
        .iter()
        .map(|(anomalous, msg)| {
            epoch += rng.gen_range(0..5);
            if *anomalous {
                let tag = ANOMALY_TAGS.choose(&mut rng).expect("non-empty");
                bgl_line(&mut rng, epoch, tag, "FATAL", msg)
            } else {
                bgl_line(&mut rng, epoch, "-", "INFO", msg)
            }
        })
        .collect();
    Ok(SyntheticCorpus {
        lines,
        normal_vocabulary,
    })
}
