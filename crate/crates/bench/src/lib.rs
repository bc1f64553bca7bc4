//! Shared fixtures for the benchmarks.

use evcoref::chains::lemma_baseline;
use evcoref::corpus::{generate_synthetic_corpus, SyntheticSpec};
use evcoref::features::{build_vocab, FeatureConfig};
use evcoref::mlnn::PairSet;
use evcoref::pipeline::gold_chain_sets;
use evcoref::{ChainSet, Corpus, EncoderConfig, MlnnConfig, MlnnModel, Vocab};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn corpus(n_topics: u32, noise: f64) -> Corpus {
    generate_synthetic_corpus(&SyntheticSpec {
        seed: 5,
        n_topics,
        docs_per_topic: 5,
        noise,
    })
    .expect("synthetic corpus")
}

/// Gold chains and same-lemma predictions for a noisy corpus.
pub fn chain_pairs(n_topics: u32) -> (Vec<ChainSet>, Vec<ChainSet>) {
    let c = corpus(n_topics, 0.4);
    let gold = gold_chain_sets(&c).expect("gold chains");
    let pred = c
        .documents
        .iter()
        .map(|d| lemma_baseline(d, &d.gold_mentions).expect("baseline"))
        .collect();
    (gold, pred)
}

pub fn small_mlnn_config() -> MlnnConfig {
    MlnnConfig {
        encoder: EncoderConfig {
            features: FeatureConfig {
                context_window: 5,
                pos_window: 3,
                word_dim: 16,
                pos_dim: 4,
                lemma_dim: 16,
            },
            context_features: 24,
            pos_features: 6,
        },
        cn_hidden: [32, 16],
        sn_hidden: [24, 12],
        ..MlnnConfig::default()
    }
}

pub struct PairFixture {
    pub model: MlnnModel,
    pub pairs: PairSet,
    pub vocab: Vocab,
    pub corpus: Corpus,
}

pub fn pair_fixture(config: &MlnnConfig) -> PairFixture {
    let corpus = corpus(4, 0.0);
    let vocab = build_vocab(&corpus, 1);
    let pairs = PairSet::from_corpus(&corpus, &vocab, &config.encoder.features).expect("pairs");
    let model = MlnnModel::init(&vocab, config, &mut ChaCha8Rng::seed_from_u64(3));
    PairFixture {
        model,
        pairs,
        vocab,
        corpus,
    }
}
