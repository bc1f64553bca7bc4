//! Vocabularies and the per-candidate index bundle fed to both networks.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Corpus, Document};
use crate::error::{Error, Result};

pub const PAD: usize = 0;
pub const UNK: usize = 1;
const RESERVED: usize = 2;

/// String-to-id table with ids 0 and 1 reserved for padding and unknowns.
///
/// Real entries start at id 2 and never collide with the reserved slots,
/// even if the corpus contains literal `<PAD>`/`<UNK>` strings.
#[derive(Clone, Debug, Default)]
pub struct Lexicon {
    entries: Vec<String>,
    index: HashMap<String, usize>,
}

impl Lexicon {
    fn from_counts(counts: BTreeMap<&str, usize>, min_count: usize) -> Self {
        let mut kept: Vec<(&str, usize)> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .collect();
        // Descending frequency, lexicographic among ties.
        kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Self::from_entries(kept.into_iter().map(|(s, _)| s.to_owned()).collect())
    }

    pub fn from_entries(entries: Vec<String>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i + RESERVED))
            .collect();
        Self { entries, index }
    }

    /// Id for `s`, or [`UNK`].
    pub fn id(&self, s: &str) -> usize {
        self.index.get(s).copied().unwrap_or(UNK)
    }

    /// Number of ids including the reserved ones.
    pub fn size(&self) -> usize {
        self.entries.len() + RESERVED
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }
}

impl PartialEq for Lexicon {
    fn eq(&self, other: &Self) -> bool {
        self.entries == other.entries
    }
}

impl Serialize for Lexicon {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.entries.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Lexicon {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let entries = Vec::<String>::deserialize(d)?;
        Ok(Self::from_entries(entries))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Vocab {
    pub words: Lexicon,
    pub pos: Lexicon,
    pub lemmas: Lexicon,
}

impl Vocab {
    /// Stable content hash; used to detect checkpoint/corpus mismatches.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("vocab serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// Builds vocabularies over surfaces, tags and lemmas. Strings seen fewer than
/// `min_count` times are left out and map to UNK.
pub fn build_vocab(corpus: &Corpus, min_count: usize) -> Vocab {
    let mut words = BTreeMap::new();
    let mut pos = BTreeMap::new();
    let mut lemmas = BTreeMap::new();
    for tok in corpus
        .documents
        .iter()
        .flat_map(|d| d.sentences.iter().flatten())
    {
        *words.entry(tok.surface.as_str()).or_insert(0) += 1;
        *pos.entry(tok.pos.as_str()).or_insert(0) += 1;
        *lemmas.entry(tok.lemma.as_str()).or_insert(0) += 1;
    }
    Vocab {
        words: Lexicon::from_counts(words, min_count),
        pos: Lexicon::from_counts(pos, min_count),
        lemmas: Lexicon::from_counts(lemmas, min_count),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    /// Total tokens in the context window, centered on the candidate.
    pub context_window: usize,
    pub pos_window: usize,
    pub word_dim: usize,
    pub pos_dim: usize,
    pub lemma_dim: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            context_window: 5,
            pos_window: 3,
            word_dim: 100,
            pos_dim: 10,
            lemma_dim: 100,
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [
            ("context_window", self.context_window),
            ("pos_window", self.pos_window),
        ] {
            if w % 2 == 0 {
                return Err(Error::Config(format!("{name} must be odd, got {w}")));
            }
        }
        for (name, d) in [
            ("word_dim", self.word_dim),
            ("pos_dim", self.pos_dim),
            ("lemma_dim", self.lemma_dim),
        ] {
            if d == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CandidateIndices {
    pub context_ids: Vec<usize>,
    pub pos_ids: Vec<usize>,
    pub word_id: usize,
    pub lemma_id: usize,
}

/// Index bundle for the token at (`sentence`, `token`). Windows stop at the
/// sentence boundary and are padded with [`PAD`].
pub fn encode_candidate(
    doc: &Document,
    sentence: usize,
    token: usize,
    vocab: &Vocab,
    config: &FeatureConfig,
) -> Result<CandidateIndices> {
    let tokens = doc
        .sentences
        .get(sentence)
        .filter(|s| token < s.len())
        .ok_or_else(|| Error::PositionOutOfRange {
            doc_id: doc.doc_id.clone(),
            sentence,
            token,
        })?;
    let window = |width: usize, id_of: &dyn Fn(usize) -> usize| -> Vec<usize> {
        let half = (width / 2) as isize;
        (-half..=half)
            .map(|offset| {
                let pos = token as isize + offset;
                if pos < 0 || pos as usize >= tokens.len() {
                    PAD
                } else {
                    id_of(pos as usize)
                }
            })
            .collect()
    };
    let center = &tokens[token];
    Ok(CandidateIndices {
        context_ids: window(config.context_window, &|i| {
            vocab.words.id(&tokens[i].surface)
        }),
        pos_ids: window(config.pos_window, &|i| vocab.pos.id(&tokens[i].pos)),
        word_id: vocab.words.id(&center.surface),
        lemma_id: vocab.lemmas.id(&center.lemma),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Corpus, Document, Token};
    use proptest::prelude::*;

    fn sentence_doc(words: &[&str]) -> Document {
        Document {
            doc_id: "d".into(),
            topic_id: 1,
            sentences: vec![words
                .iter()
                .enumerate()
                .map(|(t, w)| Token {
                    surface: w.to_string(),
                    pos: format!("P{w}"),
                    lemma: format!("l{w}"),
                    sentence_index: 0,
                    token_index: t,
                })
                .collect()],
            gold_mentions: vec![],
            gold_chains: vec![],
        }
    }

    fn corpus(words: &[&str]) -> Corpus {
        Corpus::new(vec![sentence_doc(words)]).unwrap()
    }

    #[test]
    fn min_count_filters_rare_words() {
        let v = build_vocab(&corpus(&["a", "b", "a", "a"]), 2);
        assert_eq!(v.words.entries(), ["a"]);
        assert_eq!(v.words.id("a"), 2);
        assert_eq!(v.words.id("b"), UNK);
    }

    #[test]
    fn min_count_zero_keeps_everything() {
        let v = build_vocab(&corpus(&["a", "b", "c"]), 0);
        assert_eq!(v.words.size(), 5);
    }

    #[test]
    fn ordering_is_frequency_then_lexicographic() {
        let v = build_vocab(&corpus(&["z", "b", "a", "z"]), 1);
        assert_eq!(v.words.entries(), ["z", "a", "b"]);
        assert_eq!(v, build_vocab(&corpus(&["z", "b", "a", "z"]), 1));
    }

    #[test]
    fn reserved_strings_do_not_collide() {
        let v = build_vocab(&corpus(&["<PAD>", "<UNK>"]), 1);
        assert!(v.words.id("<PAD>") >= 2);
        assert!(v.words.id("<UNK>") >= 2);
    }

    #[test]
    fn sentence_start_is_padded() {
        let c = corpus(&["w0", "w1", "w2", "w3"]);
        let v = build_vocab(&c, 1);
        let idx = encode_candidate(&c.documents[0], 0, 0, &v, &FeatureConfig::default()).unwrap();
        assert_eq!(
            idx.context_ids,
            vec![
                PAD,
                PAD,
                v.words.id("w0"),
                v.words.id("w1"),
                v.words.id("w2")
            ]
        );
    }

    #[test]
    fn pos_window_is_centered() {
        let c = corpus(&["w0", "w1", "w2", "w3"]);
        let v = build_vocab(&c, 1);
        let idx = encode_candidate(&c.documents[0], 0, 2, &v, &FeatureConfig::default()).unwrap();
        assert_eq!(
            idx.pos_ids,
            vec![v.pos.id("Pw1"), v.pos.id("Pw2"), v.pos.id("Pw3")]
        );
        assert_eq!(idx.word_id, v.words.id("w2"));
        assert_eq!(idx.lemma_id, v.lemmas.id("lw2"));
    }

    #[test]
    fn unseen_word_maps_to_unk() {
        let v = build_vocab(&corpus(&["a"]), 1);
        let other = sentence_doc(&["zzz"]);
        let idx = encode_candidate(&other, 0, 0, &v, &FeatureConfig::default()).unwrap();
        assert_eq!(idx.word_id, UNK);
        assert_eq!(idx.lemma_id, UNK);
    }

    #[test]
    fn out_of_range_position() {
        let c = corpus(&["a"]);
        let v = build_vocab(&c, 1);
        let cfg = FeatureConfig::default();
        assert!(encode_candidate(&c.documents[0], 0, 1, &v, &cfg).is_err());
        assert!(encode_candidate(&c.documents[0], 1, 0, &v, &cfg).is_err());
    }

    #[test]
    fn even_windows_rejected() {
        let cfg = FeatureConfig {
            context_window: 4,
            ..FeatureConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #[test]
        fn bundle_lengths_and_bounds(
            len in 1usize..12,
            pos in 0usize..12,
            half_ctx in 0usize..4,
            half_pos in 0usize..3,
        ) {
            prop_assume!(pos < len);
            let words: Vec<String> = (0..len).map(|i| format!("w{}", i % 5)).collect();
            let refs: Vec<&str> = words.iter().map(String::as_str).collect();
            let c = corpus(&refs);
            let v = build_vocab(&c, 1);
            let cfg = FeatureConfig {
                context_window: 2 * half_ctx + 1,
                pos_window: 2 * half_pos + 1,
                ..FeatureConfig::default()
            };
            let a = encode_candidate(&c.documents[0], 0, pos, &v, &cfg).unwrap();
            let b = encode_candidate(&c.documents[0], 0, pos, &v, &cfg).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.context_ids.len(), cfg.context_window);
            prop_assert_eq!(a.pos_ids.len(), cfg.pos_window);
            prop_assert!(a.context_ids.iter().all(|&i| i < v.words.size()));
            prop_assert!(a.pos_ids.iter().all(|&i| i < v.pos.size()));
            prop_assert!(a.word_id < v.words.size() && a.lemma_id < v.lemmas.size());
        }
    }
}
