//! Deterministic synthetic corpus with planted event chains.
//!
//! Each document draws a few event chains. All mentions of a chain share a
//! lemma family, and the two tokens on either side of every mention come from
//! a context vocabulary owned by that chain. Event mentions are the only
//! tokens tagged as verbs or nouns. `noise` is the probability that a
//! non-initial mention switches to another lemma family and that any context
//! slot is replaced by a random filler word.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Chain, Corpus, Document, Mention, Token};
use crate::error::{Error, Result};

const EVENT_LEMMAS: &[&str] = &[
    "attack", "blaze", "quake", "arrest", "merge", "launch", "strike", "flood", "elect", "rescue",
    "collapse", "protest",
];

/// (suffix, tag) variants used for event surfaces.
const EVENT_FORMS: &[(&str, &str)] = &[("", "NN"), ("s", "NNS"), ("ed", "VBD"), ("ing", "VBG")];

const FILLER_TAGS: &[&str] = &["DT", "IN", "JJ", "RB", "CD", "PRP", "CC", "TO"];
const CONTEXT_TAGS: &[&str] = &["JJ", "RB"];

const SYLLABLES_A: &[&str] = &["ka", "lo", "mi", "ne", "su", "ta", "vo", "ri"];
const SYLLABLES_B: &[&str] = &["den", "mar", "pol", "sik", "tun", "wex"];
const N_CONTEXT_WORDS: usize = 48;
const N_FILLER_WORDS: usize = 40;
const CONTEXT_WORDS_PER_CHAIN: usize = 4;
const CONTEXT_SIDE: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_topics: u32,
    pub docs_per_topic: usize,
    /// In [0, 1].
    pub noise: f64,
}

struct Word {
    surface: String,
    pos: &'static str,
}

impl Word {
    fn token(&self, sentence_index: usize, token_index: usize) -> Token {
        Token {
            surface: self.surface.clone(),
            pos: self.pos.to_owned(),
            lemma: self.surface.clone(),
            sentence_index,
            token_index,
        }
    }
}

fn word_pool(prefix: &str, n: usize, tags: &[&'static str]) -> Vec<Word> {
    (0..n)
        .map(|i| {
            let a = SYLLABLES_A[i % SYLLABLES_A.len()];
            let b = SYLLABLES_B[(i / SYLLABLES_A.len()) % SYLLABLES_B.len()];
            Word {
                surface: format!("{prefix}{a}{b}"),
                pos: tags[i % tags.len()],
            }
        })
        .collect()
}

struct Pools {
    context: Vec<Word>,
    filler: Vec<Word>,
}

struct PlannedMention {
    chain: usize,
    family: usize,
}

pub fn generate_synthetic_corpus(spec: &SyntheticSpec) -> Result<Corpus> {
    if spec.n_topics == 0 || spec.docs_per_topic == 0 {
        return Err(Error::Config(
            "synthetic corpus needs at least one topic and one document per topic".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.noise) {
        return Err(Error::Config(format!(
            "noise must lie in [0, 1], got {}",
            spec.noise
        )));
    }
    let pools = Pools {
        context: word_pool("", N_CONTEXT_WORDS, CONTEXT_TAGS),
        filler: word_pool("o", N_FILLER_WORDS, FILLER_TAGS),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut documents = Vec::new();
    for topic in 1..=spec.n_topics {
        for d in 0..spec.docs_per_topic {
            let doc_id = format!("t{topic}_d{d}");
            documents.push(generate_document(
                &mut rng, &pools, doc_id, topic, spec.noise,
            ));
        }
    }
    Corpus::new(documents)
}

fn generate_document(
    rng: &mut ChaCha8Rng,
    pools: &Pools,
    doc_id: String,
    topic_id: u32,
    noise: f64,
) -> Document {
    let n_chains = rng.gen_range(2..=4);
    let families: Vec<usize> =
        rand::seq::index::sample(rng, EVENT_LEMMAS.len(), n_chains).into_vec();
    let context_ids: Vec<usize> =
        rand::seq::index::sample(rng, pools.context.len(), n_chains * CONTEXT_WORDS_PER_CHAIN)
            .into_vec();

    let mut planned = Vec::new();
    for (chain, &family) in families.iter().enumerate() {
        let size = rng.gen_range(1..=4);
        for k in 0..size {
            let family = if k > 0 && rng.gen_bool(noise) {
                let other = rng.gen_range(0..EVENT_LEMMAS.len() - 1);
                if other >= family {
                    other + 1
                } else {
                    other
                }
            } else {
                family
            };
            planned.push(PlannedMention { chain, family });
        }
    }
    planned.shuffle(rng);

    let mut sentences: Vec<Vec<Token>> = Vec::new();
    let mut mentions = Vec::new();
    let mut chain_members: Vec<Vec<String>> = vec![Vec::new(); n_chains];

    for plan in &planned {
        if rng.gen_bool(0.3) {
            let s = sentences.len();
            sentences.push(filler_sentence(rng, pools, s));
        }
        let s = sentences.len();
        let own_context = &context_ids
            [plan.chain * CONTEXT_WORDS_PER_CHAIN..(plan.chain + 1) * CONTEXT_WORDS_PER_CHAIN];
        let mut words: Vec<&Word> = Vec::new();
        for _ in 0..rng.gen_range(0..=3) {
            words.push(pick_filler(rng, pools));
        }
        for _ in 0..CONTEXT_SIDE {
            words.push(pick_context(rng, pools, own_context, noise));
        }
        let head = words.len();
        let mut after: Vec<&Word> = Vec::new();
        for _ in 0..CONTEXT_SIDE {
            after.push(pick_context(rng, pools, own_context, noise));
        }
        for _ in 0..rng.gen_range(0..=3) {
            after.push(pick_filler(rng, pools));
        }
        let lemma = EVENT_LEMMAS[plan.family];
        let (suffix, tag) = EVENT_FORMS[rng.gen_range(0..EVENT_FORMS.len())];

        let mut sentence: Vec<Token> = words
            .iter()
            .enumerate()
            .map(|(t, w)| w.token(s, t))
            .collect();
        sentence.push(Token {
            surface: format!("{lemma}{suffix}"),
            pos: tag.to_owned(),
            lemma: lemma.to_owned(),
            sentence_index: s,
            token_index: head,
        });
        sentence.extend(
            after
                .iter()
                .enumerate()
                .map(|(k, w)| w.token(s, head + 1 + k)),
        );
        let id = format!("m{}", mentions.len());
        chain_members[plan.chain].push(id.clone());
        mentions.push(Mention::single(id, s, head));
        sentences.push(sentence);
    }
    if rng.gen_bool(0.5) {
        let s = sentences.len();
        sentences.push(filler_sentence(rng, pools, s));
    }

    // Chains in order of first mention.
    chain_members.sort_by_key(|ids| {
        ids.first()
            .and_then(|id| id[1..].parse::<usize>().ok())
            .unwrap_or(usize::MAX)
    });
    let gold_chains = chain_members
        .into_iter()
        .filter(|ids| !ids.is_empty())
        .enumerate()
        .map(|(i, mention_ids)| Chain {
            chain_id: format!("c{i}"),
            mention_ids,
        })
        .collect();

    Document {
        doc_id,
        topic_id,
        sentences,
        gold_mentions: mentions,
        gold_chains,
    }
}

fn pick_filler<'a>(rng: &mut ChaCha8Rng, pools: &'a Pools) -> &'a Word {
    &pools.filler[rng.gen_range(0..pools.filler.len())]
}

fn pick_context<'a>(
    rng: &mut ChaCha8Rng,
    pools: &'a Pools,
    own_context: &[usize],
    noise: f64,
) -> &'a Word {
    if rng.gen_bool(noise) {
        pick_filler(rng, pools)
    } else {
        &pools.context[own_context[rng.gen_range(0..own_context.len())]]
    }
}

fn filler_sentence(rng: &mut ChaCha8Rng, pools: &Pools, s: usize) -> Vec<Token> {
    let len = rng.gen_range(3..=7);
    (0..len)
        .map(|t| pick_filler(rng, pools).token(s, t))
        .collect()
}
