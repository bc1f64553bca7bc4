//! Within-document event coreference resolution.
//!
//! Pipeline: a feed-forward mention extractor picks event head tokens, a pair
//! model with a shared event encoder, a classifier head and a cosine scorer
//! head decides coreference for every mention pair, a threshold filter and
//! union-find turn decisions into chains, and MUC, B³, CEAF_e and CoNLL F1
//! score them against gold.

pub mod artifact;
pub mod chains;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod extractor;
pub mod features;
pub mod hungarian;
pub mod metrics;
pub mod mlnn;
pub mod nn;
pub mod pipeline;
mod train;

pub use chains::{
    build_chains, filter_decision, lemma_baseline, ChainSet, FilterPolicy, FilterThresholds,
    UnionFind,
};
pub use corpus::{Chain, Corpus, CorpusStats, Document, Mention, Token};
pub use encoder::{EncoderConfig, EventEncoder};
pub use error::{Error, Result};
pub use extractor::{ExtractorConfig, MentionExtractorModel};
pub use features::{FeatureConfig, Vocab};
pub use metrics::{b_cubed, ceaf_e, conll_f1, muc, score_corpus, CorefScores, MetricResult};
pub use mlnn::{CorefLabel, MlnnConfig, MlnnModel, PairDecision, SystemMode};
pub use pipeline::{run_pipeline, Manifest, MentionSource, PipelineConfig, PipelineReport};
