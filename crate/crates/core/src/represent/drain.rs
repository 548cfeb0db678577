//! Fixed-depth prefix-tree template miner (Drain).
//!
//! Messages are routed first by token count, then by a bounded number of
//! leading tokens. Tokens containing digits route to a wildcard child. At the
//! leaf the message joins the most similar template group if the share of
//! positions with equal tokens reaches the similarity threshold; differing
//! positions of that template become `<*>`.
//!
//! ```text
//!            root
//!              |
//!         len = 2           token count layer
//!              |
//!           "send"          leading token layer(s)
//!              |
//!      [send <*>] (e1)      template groups
//! ```

use std::fmt;
use std::io::Write;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WILDCARD: &str = "<*>";
pub const UNSEEN_EVENT: &str = "e_unseen";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrainParams {
    /// Tree depth counting the root, the token-count layer and the leaf
    /// layer; the number of leading-token layers is `depth - 3`.
    pub depth: usize,
    pub sim_threshold: f64,
    pub max_children: usize,
}

impl Default for DrainParams {
    fn default() -> Self {
        DrainParams {
            depth: 4,
            sim_threshold: 0.4,
            max_children: 100,
        }
    }
}

impl DrainParams {
    pub fn validate(&self) -> Result<()> {
        if self.depth < 3 {
            return Err(Error::InvalidParameter(format!(
                "drain depth must be at least 3, got {}",
                self.depth
            )));
        }
        if !(self.sim_threshold > 0.0 && self.sim_threshold < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "drain similarity threshold must lie in (0, 1), got {}",
                self.sim_threshold
            )));
        }
        if self.max_children < 2 {
            return Err(Error::InvalidParameter(
                "drain max_children must be at least 2".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventId {
    /// 1-based group ordinal.
    Group(u32),
    /// Test-time message that matches no learned group.
    Unseen,
}

impl fmt::Display for EventId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventId::Group(n) => write!(f, "e{n}"),
            EventId::Unseen => f.write_str(UNSEEN_EVENT),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    pub id: EventId,
    pub template: Vec<String>,
    pub size: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Node {
    children: FxHashMap<String, Node>,
    groups: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Drain {
    params: DrainParams,
    by_len: FxHashMap<usize, Node>,
    groups: Vec<Group>,
}

fn has_digit(token: &str) -> bool {
    token.bytes().any(|b| b.is_ascii_digit())
}

/// Share of positions where template and message agree. Wildcard positions
/// count as agreement only when `wildcards_match` is set.
fn similarity(template: &[String], tokens: &[&str], wildcards_match: bool) -> (f64, usize) {
    if tokens.is_empty() {
        return (1.0, 0);
    }
    let mut equal = 0;
    let mut params = 0;
    for (t, m) in template.iter().zip(tokens) {
        if t == WILDCARD {
            params += 1;
            if wildcards_match {
                equal += 1;
            }
        } else if t == m {
            equal += 1;
        }
    }
    (equal as f64 / tokens.len() as f64, params)
}

impl Drain {
    pub fn new(params: DrainParams) -> Result<Self> {
        params.validate()?;
        Ok(Drain {
            params,
            by_len: FxHashMap::default(),
            groups: Vec::new(),
        })
    }

    pub fn params(&self) -> &DrainParams {
        &self.params
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn template(&self, id: EventId) -> Option<&[String]> {
        match id {
            EventId::Group(n) => self.groups.get(n as usize - 1).map(|g| g.template.as_slice()),
            EventId::Unseen => None,
        }
    }

    fn route_len(&self, n_tokens: usize) -> usize {
        (self.params.depth - 3).min(n_tokens.saturating_sub(1))
    }

    /// Training step: routes the message, refining or creating a group.
    pub fn parse(&mut self, msg: &str) -> EventId {
        let tokens: Vec<&str> = msg.split_whitespace().collect();
        let layers = self.route_len(tokens.len());
        let max_children = self.params.max_children;
        let mut node = self.by_len.entry(tokens.len()).or_default();
        for &token in &tokens[..layers] {
            let key = if node.children.contains_key(token) {
                token
            } else if has_digit(token) || node.children.len() + 1 >= max_children {
                WILDCARD
            } else {
                token
            };
            node = node.children.entry(key.to_owned()).or_default();
        }

        let mut best: Option<(usize, f64, usize)> = None;
        for &g in &node.groups {
            let (sim, params) = similarity(&self.groups[g].template, &tokens, false);
            let better = match best {
                None => true,
                Some((_, s, p)) => sim > s || (sim == s && params > p),
            };
            if better {
                best = Some((g, sim, params));
            }
        }
        match best {
            Some((g, sim, _)) if sim >= self.params.sim_threshold => {
                let group = &mut self.groups[g];
                for (t, m) in group.template.iter_mut().zip(&tokens) {
                    if t != m && t != WILDCARD {
                        *t = WILDCARD.to_owned();
                    }
                }
                group.size += 1;
                group.id
            }
            _ => {
                let id = EventId::Group(self.groups.len() as u32 + 1);
                node.groups.push(self.groups.len());
                self.groups.push(Group {
                    id,
                    template: tokens.iter().map(|t| (*t).to_owned()).collect(),
                    size: 1,
                });
                id
            }
        }
    }

    /// Read-only lookup for test data. Template wildcards match any token, so
    /// every training message maps back to a learned group.
    pub fn lookup(&self, msg: &str) -> EventId {
        let tokens: Vec<&str> = msg.split_whitespace().collect();
        let Some(mut node) = self.by_len.get(&tokens.len()) else {
            return EventId::Unseen;
        };
        for &token in &tokens[..self.route_len(tokens.len())] {
            match node
                .children
                .get(token)
                .or_else(|| node.children.get(WILDCARD))
            {
                Some(child) => node = child,
                None => return EventId::Unseen,
            }
        }
        let mut best: Option<(usize, f64, usize)> = None;
        for &g in &node.groups {
            let (sim, params) = similarity(&self.groups[g].template, &tokens, true);
            let better = match best {
                None => true,
                Some((_, s, p)) => sim > s || (sim == s && params < p),
            };
            if better {
                best = Some((g, sim, params));
            }
        }
        match best {
            Some((g, sim, _)) if sim >= self.params.sim_threshold => self.groups[g].id,
            _ => EventId::Unseen,
        }
    }

    /// Template dump as CSV: `id,template,count`.
    pub fn write_templates<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["id", "template", "count"])?;
        for g in &self.groups {
            w.write_record([g.id.to_string(), g.template.join(" "), g.size.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<templates>", e))?;
        Ok(())
    }
}
