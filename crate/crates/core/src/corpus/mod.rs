//! Pre-tagged documents with gold event mentions and within-document chains.

mod io;
mod synth;

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};

pub use io::{load_corpus, read_corpus, write_corpus, write_corpus_to};
pub use synth::{generate_synthetic_corpus, SyntheticSpec};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    /// Tag supplied by the upstream tagger; never interpreted beyond prefixes.
    pub pos: String,
    pub lemma: String,
    pub sentence_index: usize,
    pub token_index: usize,
}

/// A gold or predicted event mention. The head is always the first token
/// of the span; the span itself is carried for reporting.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Mention {
    pub id: String,
    pub sentence: usize,
    pub start: usize,
    pub end: usize,
    pub head: usize,
}

impl Mention {
    pub fn new(id: impl Into<String>, sentence: usize, start: usize, end: usize) -> Self {
        Self {
            id: id.into(),
            sentence,
            start,
            end,
            head: start,
        }
    }

    pub fn single(id: impl Into<String>, sentence: usize, token: usize) -> Self {
        Self::new(id, sentence, token, token)
    }

    /// Document-order key.
    pub fn position(&self) -> (usize, usize) {
        (self.sentence, self.head)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chain {
    pub chain_id: String,
    pub mention_ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub topic_id: u32,
    pub sentences: Vec<Vec<Token>>,
    pub gold_mentions: Vec<Mention>,
    pub gold_chains: Vec<Chain>,
}

impl Document {
    pub fn token(&self, sentence: usize, token: usize) -> Option<&Token> {
        self.sentences.get(sentence).and_then(|s| s.get(token))
    }

    pub fn mention(&self, id: &str) -> Option<&Mention> {
        self.gold_mentions.iter().find(|m| m.id == id)
    }

    pub fn num_tokens(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum()
    }

    /// Head token of a mention, if the mention's position is valid here.
    pub fn head_token(&self, mention: &Mention) -> Option<&Token> {
        self.token(mention.sentence, mention.head)
    }

    /// Checks every structural invariant of a document.
    pub fn validate(&self) -> Result<()> {
        let id = self.doc_id.as_str();
        if id.is_empty() {
            return Err(Error::invariant(id, "empty doc_id"));
        }
        if self.topic_id == 0 {
            return Err(Error::invariant(id, "topic must be a positive integer"));
        }
        for (s, sentence) in self.sentences.iter().enumerate() {
            if sentence.is_empty() {
                return Err(Error::invariant(id, format!("sentence {s} has no tokens")));
            }
            for (t, tok) in sentence.iter().enumerate() {
                if tok.surface.is_empty() || tok.pos.is_empty() || tok.lemma.is_empty() {
                    return Err(Error::invariant(
                        id,
                        format!("token ({s}, {t}) has an empty surface, pos or lemma"),
                    ));
                }
                if tok.sentence_index != s || tok.token_index != t {
                    return Err(Error::invariant(
                        id,
                        format!("token ({s}, {t}) carries inconsistent indices"),
                    ));
                }
            }
        }

        let mut ids = HashSet::new();
        for m in &self.gold_mentions {
            if !ids.insert(m.id.as_str()) {
                return Err(Error::invariant(
                    id,
                    format!("duplicate mention id {:?}", m.id),
                ));
            }
            if m.start > m.end {
                return Err(Error::invariant(
                    id,
                    format!("mention {:?}: span start > end", m.id),
                ));
            }
            if m.head != m.start {
                return Err(Error::invariant(
                    id,
                    format!("mention {:?}: head must be the span start", m.id),
                ));
            }
            let len = self
                .sentences
                .get(m.sentence)
                .map(Vec::len)
                .ok_or_else(|| {
                    Error::invariant(id, format!("mention {:?}: sentence out of range", m.id))
                })?;
            if m.end >= len {
                return Err(Error::invariant(
                    id,
                    format!("mention {:?}: span exceeds sentence bounds", m.id),
                ));
            }
        }

        let mut chained = HashSet::new();
        for chain in &self.gold_chains {
            if chain.mention_ids.is_empty() {
                return Err(Error::invariant(
                    id,
                    format!("chain {:?} is empty", chain.chain_id),
                ));
            }
            for mid in &chain.mention_ids {
                if !ids.contains(mid.as_str()) {
                    return Err(Error::invariant(
                        id,
                        format!(
                            "chain {:?} references unknown mention {mid:?}",
                            chain.chain_id
                        ),
                    ));
                }
                if !chained.insert(mid.as_str()) {
                    return Err(Error::invariant(
                        id,
                        format!("mention {mid:?} appears in more than one chain"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    /// Builds a corpus, validating every document and doc_id uniqueness.
    pub fn new(documents: Vec<Document>) -> Result<Self> {
        let mut seen = HashSet::new();
        for doc in &documents {
            doc.validate()?;
            if !seen.insert(doc.doc_id.as_str()) {
                return Err(Error::DuplicateDocument(doc.doc_id.clone()));
            }
        }
        Ok(Self { documents })
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn topics(&self) -> BTreeSet<u32> {
        self.documents.iter().map(|d| d.topic_id).collect()
    }

    pub fn document(&self, doc_id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.doc_id == doc_id)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TopicSplit {
    pub train: Corpus,
    pub dev: Corpus,
    pub test: Corpus,
    /// Documents whose topic was in none of the three sets.
    pub dropped: usize,
}

/// Partitions a corpus by topic. Documents in unlisted topics are dropped
/// and counted.
pub fn split_topics(
    corpus: &Corpus,
    train: &BTreeSet<u32>,
    dev: &BTreeSet<u32>,
    test: &BTreeSet<u32>,
) -> Result<TopicSplit> {
    if let Some(t) = train
        .intersection(dev)
        .chain(train.intersection(test))
        .chain(dev.intersection(test))
        .next()
    {
        return Err(Error::OverlappingTopics(*t));
    }
    let mut split = TopicSplit {
        train: Corpus::default(),
        dev: Corpus::default(),
        test: Corpus::default(),
        dropped: 0,
    };
    for doc in &corpus.documents {
        let target = if train.contains(&doc.topic_id) {
            &mut split.train
        } else if dev.contains(&doc.topic_id) {
            &mut split.dev
        } else if test.contains(&doc.topic_id) {
            &mut split.test
        } else {
            split.dropped += 1;
            continue;
        };
        target.documents.push(doc.clone());
    }
    Ok(split)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub documents: usize,
    pub sentences: usize,
    pub mentions: usize,
    pub chains: usize,
    /// Mentions in chains divided by the number of chains; 0.0 without chains.
    pub mean_chain_length: f64,
    pub non_singleton_chains: usize,
    /// Same ratio restricted to chains of two or more mentions.
    pub mean_non_singleton_chain_length: f64,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats {
        documents: corpus.documents.len(),
        sentences: 0,
        mentions: 0,
        chains: 0,
        mean_chain_length: 0.0,
        non_singleton_chains: 0,
        mean_non_singleton_chain_length: 0.0,
    };
    let mut chained = 0usize;
    let mut chained_multi = 0usize;
    for doc in &corpus.documents {
        stats.sentences += doc.sentences.len();
        stats.mentions += doc.gold_mentions.len();
        stats.chains += doc.gold_chains.len();
        for chain in &doc.gold_chains {
            chained += chain.mention_ids.len();
            if chain.mention_ids.len() > 1 {
                stats.non_singleton_chains += 1;
                chained_multi += chain.mention_ids.len();
            }
        }
    }
    if stats.chains > 0 {
        stats.mean_chain_length = chained as f64 / stats.chains as f64;
    }
    if stats.non_singleton_chains > 0 {
        stats.mean_non_singleton_chain_length =
            chained_multi as f64 / stats.non_singleton_chains as f64;
    }
    stats
}

/// Gold chains as clusters, with every unchained gold mention added as a
/// singleton so the result partitions all gold mentions.
pub fn gold_clusters(doc: &Document) -> Vec<Vec<String>> {
    let mut clusters: Vec<Vec<String>> = doc
        .gold_chains
        .iter()
        .map(|c| c.mention_ids.clone())
        .collect();
    let chained: HashSet<&str> = doc
        .gold_chains
        .iter()
        .flat_map(|c| c.mention_ids.iter().map(String::as_str))
        .collect();
    clusters.extend(
        doc.gold_mentions
            .iter()
            .filter(|m| !chained.contains(m.id.as_str()))
            .map(|m| vec![m.id.clone()]),
    );
    clusters
}

/// Maps each gold mention id to the index of its chain, if chained.
pub fn chain_index(doc: &Document) -> HashMap<&str, usize> {
    doc.gold_chains
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.mention_ids.iter().map(move |m| (m.as_str(), i)))
        .collect()
}
