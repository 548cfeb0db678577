//! Log representations: whitespace words, character trigrams and Drain event
//! ids, plus flattening of sequence-labelled data into one document per
//! sequence.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Granularity, Label, RecordSet};

pub mod drain;

pub use drain::{Drain, DrainParams, EventId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Words,
    Trigrams,
    Events,
}

impl Representation {
    pub const ALL: [Representation; 3] = [
        Representation::Words,
        Representation::Trigrams,
        Representation::Events,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Representation::Words => "words",
            Representation::Trigrams => "trigrams",
            Representation::Events => "events",
        }
    }
}

impl FromStr for Representation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "words" | "word" => Ok(Representation::Words),
            "trigrams" | "trigram" => Ok(Representation::Trigrams),
            "events" | "event" | "eventid" => Ok(Representation::Events),
            _ => Err(Error::Config(format!("unknown representation `{s}`"))),
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Anything that can enumerate its terms in order. Vectorizers consume
/// documents through this so that word and trigram terms can be borrowed
/// straight from the message text.
pub trait Document: Sync {
    fn for_each_term(&self, f: &mut dyn FnMut(&str));
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSeq {
    pub terms: Vec<String>,
    /// Term count at creation; vectorization may later drop OOV terms.
    pub source_len: usize,
}

impl TokenSeq {
    pub fn new(terms: Vec<String>) -> Self {
        let source_len = terms.len();
        TokenSeq { terms, source_len }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for TokenSeq {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        TokenSeq::new(iter.into_iter().map(Into::into).collect())
    }
}

impl Document for TokenSeq {
    fn for_each_term(&self, f: &mut dyn FnMut(&str)) {
        for t in &self.terms {
            f(t);
        }
    }
}

/// Maximal non-whitespace runs.
pub fn words(msg: &str) -> std::str::SplitWhitespace<'_> {
    msg.split_whitespace()
}

/// Character windows of length three. A non-empty message shorter than three
/// characters yields itself once; an empty message yields nothing.
pub fn trigrams(msg: &str) -> Trigrams<'_> {
    Trigrams {
        rest: msg,
        whole: msg,
        started: false,
    }
}

#[derive(Debug, Clone)]
pub struct Trigrams<'a> {
    rest: &'a str,
    whole: &'a str,
    started: bool,
}

impl<'a> Iterator for Trigrams<'a> {
    type Item = &'a str;

    fn next(&mut self) -> Option<&'a str> {
        let mut it = self.rest.char_indices();
        let first_len = it.next().map(|(_, c)| c.len_utf8());
        match it.nth(1) {
            Some((i, c)) => {
                let window = &self.rest[..i + c.len_utf8()];
                self.rest = &self.rest[first_len.unwrap_or(0)..];
                self.started = true;
                Some(window)
            }
            None => {
                let short = !self.started && !self.whole.is_empty();
                self.started = true;
                self.rest = "";
                short.then_some(self.whole)
            }
        }
    }
}

pub fn tokenize_words(msg: &str) -> TokenSeq {
    words(msg).collect()
}

pub fn tokenize_trigrams(msg: &str) -> TokenSeq {
    trigrams(msg).collect()
}

/// A document borrowed from one or more message texts, tokenized on the fly.
#[derive(Debug, Clone)]
pub struct TextDoc<'a> {
    rep: TextRep,
    parts: Parts<'a>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TextRep {
    Words,
    Trigrams,
}

#[derive(Debug, Clone)]
enum Parts<'a> {
    One(&'a str),
    Many(Vec<&'a str>),
}

impl<'a> TextDoc<'a> {
    pub fn line(rep: TextRep, msg: &'a str) -> Self {
        TextDoc {
            rep,
            parts: Parts::One(msg),
        }
    }

    /// Concatenation of several messages in order, as for a flattened
    /// sequence.
    pub fn sequence(rep: TextRep, msgs: Vec<&'a str>) -> Self {
        TextDoc {
            rep,
            parts: Parts::Many(msgs),
        }
    }

    fn visit(&self, msg: &str, f: &mut dyn FnMut(&str)) {
        match self.rep {
            TextRep::Words => words(msg).for_each(f),
            TextRep::Trigrams => trigrams(msg).for_each(f),
        }
    }

    pub fn to_token_seq(&self) -> TokenSeq {
        let mut terms = Vec::new();
        self.for_each_term(&mut |t| terms.push(t.to_owned()));
        TokenSeq::new(terms)
    }
}

impl Document for TextDoc<'_> {
    fn for_each_term(&self, f: &mut dyn FnMut(&str)) {
        match &self.parts {
            Parts::One(m) => self.visit(m, f),
            Parts::Many(ms) => {
                for m in ms {
                    self.visit(m, f);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceDoc {
    pub key: String,
    pub label: Label,
    pub tokens: TokenSeq,
}

/// One document per sequence: member token lists concatenated in record
/// order. `seqs[i]` holds the tokens of record `i`.
pub fn flatten_sequences(rs: &RecordSet, seqs: &[TokenSeq]) -> Result<Vec<SequenceDoc>> {
    if rs.granularity() != Granularity::Sequence {
        return Err(Error::InvalidParameter(
            "flattening needs a sequence-level record set".into(),
        ));
    }
    if seqs.len() != rs.len() {
        return Err(Error::InvalidParameter(format!(
            "{} token lists for {} records",
            seqs.len(),
            rs.len()
        )));
    }
    Ok(rs
        .units()
        .into_iter()
        .map(|unit| {
            let mut terms = Vec::new();
            for &i in &unit.members {
                terms.extend(seqs[i].terms.iter().cloned());
            }
            SequenceDoc {
                label: rs.unit_label(&unit),
                key: unit.key.unwrap_or_default(),
                tokens: TokenSeq::new(terms),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::LogRecord;
    use proptest::prelude::*;

    #[test]
    fn word_split() {
        assert_eq!(
            tokenize_words("0 ddr error(s) detected").terms,
            ["0", "ddr", "error(s)", "detected"]
        );
        assert!(tokenize_words("").is_empty());
        assert_eq!(tokenize_words("a  b").terms, ["a", "b"]);
        assert_eq!(tokenize_words(" \t a\nb ").terms, ["a", "b"]);
    }

    #[test]
    fn trigram_windows() {
        let t = tokenize_trigrams("Stopping...");
        assert_eq!(&t.terms[..3], ["Sto", "top", "opp"]);
        assert_eq!(t.len(), 9);
        assert_eq!(tokenize_trigrams("ab").terms, ["ab"]);
        assert_eq!(tokenize_trigrams("a").terms, ["a"]);
        assert_eq!(tokenize_trigrams("abc").terms, ["abc"]);
        assert_eq!(tokenize_trigrams("abcd").terms, ["abc", "bcd"]);
        assert!(tokenize_trigrams("").is_empty());
        assert_eq!(tokenize_trigrams("äöüß").terms, ["äöü", "öüß"]);
    }

    #[test]
    fn text_doc_matches_token_seq() {
        let doc = TextDoc::sequence(TextRep::Words, vec!["a b", "", "c"]);
        assert_eq!(doc.to_token_seq().terms, ["a", "b", "c"]);
        let doc = TextDoc::line(TextRep::Trigrams, "abcd");
        assert_eq!(doc.to_token_seq(), tokenize_trigrams("abcd"));
    }

    fn seq_set(keys: &[&str]) -> RecordSet {
        let records = keys
            .iter()
            .enumerate()
            .map(|(i, k)| {
                let label = if *k == "S2" { Label::Anomaly } else { Label::Normal };
                LogRecord::new("", label, i as u64).with_seq_key(*k)
            })
            .collect();
        RecordSet::new(records, Granularity::Sequence).unwrap()
    }

    #[test]
    fn flatten_concatenates_in_line_order() {
        let rs = seq_set(&["S1", "S2", "S1"]);
        let seqs: Vec<TokenSeq> = vec![
            ["a", "b"].into_iter().collect(),
            ["x"].into_iter().collect(),
            ["c"].into_iter().collect(),
        ];
        let flat = flatten_sequences(&rs, &seqs).unwrap();
        assert_eq!(flat[0].key, "S1");
        assert_eq!(flat[0].tokens.terms, ["a", "b", "c"]);
        assert_eq!(flat[1].label, Label::Anomaly);
    }

    #[test]
    fn flatten_event_ids_and_empty_sequence() {
        let rs = seq_set(&["S1", "S1", "S1", "S2"]);
        let seqs: Vec<TokenSeq> = vec![
            ["e1"].into_iter().collect(),
            ["e7"].into_iter().collect(),
            ["e1"].into_iter().collect(),
            TokenSeq::default(),
        ];
        let flat = flatten_sequences(&rs, &seqs).unwrap();
        assert_eq!(flat[0].tokens.terms, ["e1", "e7", "e1"]);
        assert!(flat[1].tokens.is_empty());
        assert_eq!(flat[1].label, Label::Anomaly);
    }

    #[test]
    fn flatten_rejects_line_sets() {
        let rs = RecordSet::lines(vec![LogRecord::new("a", Label::Normal, 1)]);
        assert!(flatten_sequences(&rs, &[TokenSeq::default()]).is_err());
    }

    proptest! {
        #[test]
        fn trigram_length_law(s in "\\PC{0,40}") {
            let n = s.chars().count();
            let t = tokenize_trigrams(&s);
            let expected = match n { 0 => 0, 1 | 2 => 1, _ => n - 2 };
            prop_assert_eq!(t.len(), expected);
            prop_assert_eq!(t.source_len, t.len());
            if n >= 3 {
                prop_assert!(t.terms.iter().all(|w| w.chars().count() == 3));
            }
        }

        #[test]
        fn flatten_conserves_tokens(
            docs in proptest::collection::vec((0usize..4, proptest::collection::vec("[a-c]{1,2}", 0..5)), 1..30)
        ) {
            let keys = ["S0", "S1", "S2", "S3"];
            let rs = seq_set(&docs.iter().map(|(k, _)| keys[*k]).collect::<Vec<_>>());
            let seqs: Vec<TokenSeq> = docs.iter().map(|(_, t)| t.iter().cloned().collect()).collect();
            let flat = flatten_sequences(&rs, &seqs).unwrap();
            let total: usize = seqs.iter().map(TokenSeq::len).sum();
            prop_assert_eq!(flat.iter().map(|d| d.tokens.len()).sum::<usize>(), total);
        }
    }
}
