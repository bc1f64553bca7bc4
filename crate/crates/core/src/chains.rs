//! Pair filtering, union-find clustering and the same-lemma baseline.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Mention};
use crate::error::{Error, Result};
use crate::mlnn::{CorefLabel, PairDecision};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterThresholds {
    /// A non-coreferent pair is rescued only if similarity is strictly above this.
    pub similarity_min: f64,
    /// ... and the classifier's confidence is strictly below this.
    pub confidence_max: f64,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            similarity_min: 0.5,
            confidence_max: 0.6,
        }
    }
}

impl FilterThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(-1.0..=1.0).contains(&self.similarity_min) {
            return Err(Error::Config(format!(
                "similarity_min {} outside [-1, 1]",
                self.similarity_min
            )));
        }
        if !(0.5..=1.0).contains(&self.confidence_max) {
            return Err(Error::Config(format!(
                "confidence_max {} outside [0.5, 1]",
                self.confidence_max
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FilterPolicy {
    /// Edge iff the classifier says coreferent.
    ClassifierOnly,
    /// Classifier label, plus rescue of uncertain but similar non-coreferent pairs.
    WithRescue(FilterThresholds),
}

/// Whether a decision becomes a coreference edge under the rescue rule.
pub fn filter_decision(d: &PairDecision, t: &FilterThresholds) -> bool {
    match d.label {
        CorefLabel::Coref => true,
        CorefLabel::NonCoref => d.similarity > t.similarity_min && d.confidence < t.confidence_max,
    }
}

impl FilterPolicy {
    pub fn is_edge(&self, d: &PairDecision) -> bool {
        match self {
            FilterPolicy::ClassifierOnly => d.label == CorefLabel::Coref,
            FilterPolicy::WithRescue(t) => filter_decision(d, t),
        }
    }
}

/// Disjoint-set forest with path compression and union by rank.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    /// Returns false if `a` and `b` were already connected.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }

    /// Components as slot lists, ordered by smallest member; members ascending.
    pub fn components(&mut self) -> Vec<Vec<usize>> {
        let mut by_root: HashMap<usize, usize> = HashMap::new();
        let mut out: Vec<Vec<usize>> = Vec::new();
        for x in 0..self.len() {
            let r = self.find(x);
            let k = *by_root.entry(r).or_insert_with(|| {
                out.push(Vec::new());
                out.len() - 1
            });
            out[k].push(x);
        }
        out
    }
}

/// A partition of one document's mentions into clusters.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainSet {
    pub doc_id: String,
    pub clusters: Vec<Vec<String>>,
}

impl ChainSet {
    /// Rejects empty clusters and mentions listed more than once.
    pub fn new(doc_id: impl Into<String>, clusters: Vec<Vec<String>>) -> Result<Self> {
        let set = Self {
            doc_id: doc_id.into(),
            clusters,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.clusters {
            if c.is_empty() {
                return Err(Error::invariant(&self.doc_id, "empty cluster"));
            }
            for m in c {
                if !seen.insert(m.as_str()) {
                    return Err(Error::invariant(
                        &self.doc_id,
                        format!("mention {m:?} appears in more than one cluster"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn num_mentions(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum()
    }

    /// Clusters of size two or more.
    pub fn non_singletons(&self) -> impl Iterator<Item = &Vec<String>> {
        self.clusters.iter().filter(|c| c.len() > 1)
    }
}

/// Clusters `mention_ids` by connecting every decision that passes `policy`.
/// Output clusters follow input order: each cluster lists its members in input
/// order, and clusters are ordered by their first member.
pub fn build_chains(
    doc_id: &str,
    mention_ids: &[String],
    decisions: &[PairDecision],
    policy: &FilterPolicy,
) -> Result<ChainSet> {
    let slot: HashMap<&str, usize> = mention_ids
        .iter()
        .enumerate()
        .map(|(i, m)| (m.as_str(), i))
        .collect();
    if slot.len() != mention_ids.len() {
        return Err(Error::invariant(doc_id, "duplicate mention id"));
    }
    let lookup = |id: &str| {
        slot.get(id).copied().ok_or_else(|| Error::UnknownMention {
            doc_id: doc_id.to_owned(),
            mention_id: id.to_owned(),
        })
    };
    let mut uf = UnionFind::new(mention_ids.len());
    for d in decisions {
        let (a, b) = (lookup(&d.a)?, lookup(&d.b)?);
        if policy.is_edge(d) {
            uf.union(a, b);
        }
    }
    let clusters = uf
        .components()
        .into_iter()
        .map(|c| c.into_iter().map(|i| mention_ids[i].clone()).collect())
        .collect();
    Ok(ChainSet {
        doc_id: doc_id.to_owned(),
        clusters,
    })
}

/// Groups mentions whose head tokens have the same lemma.
pub fn lemma_baseline(doc: &Document, mentions: &[Mention]) -> Result<ChainSet> {
    let mut by_lemma: HashMap<&str, usize> = HashMap::new();
    let mut clusters: Vec<Vec<String>> = Vec::new();
    for m in mentions {
        let tok = doc.head_token(m).ok_or_else(|| Error::PositionOutOfRange {
            doc_id: doc.doc_id.clone(),
            sentence: m.sentence,
            token: m.head,
        })?;
        let k = *by_lemma.entry(tok.lemma.as_str()).or_insert_with(|| {
            clusters.push(Vec::new());
            clusters.len() - 1
        });
        clusters[k].push(m.id.clone());
    }
    ChainSet::new(&doc.doc_id, clusters)
}
