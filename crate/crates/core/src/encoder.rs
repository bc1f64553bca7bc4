//! Event feature encoder shared by the mention extractor and the pair model.
//!
//! A candidate token is encoded as
//! `[context feature ‖ pos feature ‖ word embedding ‖ lemma embedding]`, where the
//! context and POS features are single tanh layers over the concatenated window
//! embeddings.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{CandidateIndices, FeatureConfig, Vocab};
use crate::nn::{prefixed, Activation, Checkpoint, DenseLayer, EmbeddingTable, Parameters};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub features: FeatureConfig,
    pub context_features: usize,
    pub pos_features: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            context_features: 150,
            pos_features: 20,
        }
    }
}

impl EncoderConfig {
    pub fn output_dim(&self) -> usize {
        self.context_features + self.pos_features + self.features.word_dim + self.features.lemma_dim
    }

    pub fn validate(&self) -> Result<()> {
        self.features.validate()?;
        if self.context_features == 0 || self.pos_features == 0 {
            return Err(Error::Config(
                "feature projection widths must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EventEncoder {
    pub word: EmbeddingTable,
    pub pos: EmbeddingTable,
    pub lemma: EmbeddingTable,
    pub context_proj: DenseLayer,
    pub pos_proj: DenseLayer,
}

/// Intermediate values of one forward pass, kept for backpropagation.
pub(crate) struct EncoderTrace {
    context_in: Vec<f64>,
    context_out: Vec<f64>,
    pos_in: Vec<f64>,
    pos_out: Vec<f64>,
    pub(crate) output: Vec<f64>,
}

impl EventEncoder {
    pub fn init<R: Rng>(vocab: &Vocab, config: &EncoderConfig, rng: &mut R) -> Self {
        let f = &config.features;
        Self {
            word: EmbeddingTable::init(vocab.words.size(), f.word_dim, rng),
            pos: EmbeddingTable::init(vocab.pos.size(), f.pos_dim, rng),
            lemma: EmbeddingTable::init(vocab.lemmas.size(), f.lemma_dim, rng),
            context_proj: DenseLayer::init(
                f.context_window * f.word_dim,
                config.context_features,
                Activation::Tanh,
                rng,
            ),
            pos_proj: DenseLayer::init(
                f.pos_window * f.pos_dim,
                config.pos_features,
                Activation::Tanh,
                rng,
            ),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.context_proj.out_dim() + self.pos_proj.out_dim() + self.word.dim() + self.lemma.dim()
    }

    pub(crate) fn check(&self, idx: &CandidateIndices) -> Result<()> {
        let ctx_len = self.context_proj.in_dim() / self.word.dim();
        let pos_len = self.pos_proj.in_dim() / self.pos.dim();
        if idx.context_ids.len() != ctx_len {
            return Err(Error::Dimension {
                context: "context window",
                expected: ctx_len,
                actual: idx.context_ids.len(),
            });
        }
        if idx.pos_ids.len() != pos_len {
            return Err(Error::Dimension {
                context: "pos window",
                expected: pos_len,
                actual: idx.pos_ids.len(),
            });
        }
        let bounds = [
            (
                "word id",
                idx.context_ids.iter().chain([&idx.word_id]).max(),
                self.word.vocab_size(),
            ),
            ("pos id", idx.pos_ids.iter().max(), self.pos.vocab_size()),
            ("lemma id", Some(&idx.lemma_id), self.lemma.vocab_size()),
        ];
        for (context, max, size) in bounds {
            if let Some(&m) = max {
                if m >= size {
                    return Err(Error::Dimension {
                        context,
                        expected: size,
                        actual: m,
                    });
                }
            }
        }
        Ok(())
    }

    /// Event feature vector for one candidate.
    pub fn encode(&self, idx: &CandidateIndices) -> Result<Vec<f64>> {
        self.check(idx)?;
        Ok(self.forward(idx).output)
    }

    pub(crate) fn forward(&self, idx: &CandidateIndices) -> EncoderTrace {
        let context_in: Vec<f64> = idx
            .context_ids
            .iter()
            .flat_map(|&i| self.word.lookup(i).iter().copied())
            .collect();
        let pos_in: Vec<f64> = idx
            .pos_ids
            .iter()
            .flat_map(|&i| self.pos.lookup(i).iter().copied())
            .collect();
        let context_out = self.context_proj.apply(&context_in);
        let pos_out = self.pos_proj.apply(&pos_in);
        let mut output = Vec::with_capacity(self.output_dim());
        output.extend_from_slice(&context_out);
        output.extend_from_slice(&pos_out);
        output.extend_from_slice(self.word.lookup(idx.word_id));
        output.extend_from_slice(self.lemma.lookup(idx.lemma_id));
        EncoderTrace {
            context_in,
            context_out,
            pos_in,
            pos_out,
            output,
        }
    }

    pub(crate) fn backward(
        &self,
        idx: &CandidateIndices,
        trace: &EncoderTrace,
        d_output: &[f64],
        grad: &mut EventEncoder,
    ) {
        let c = self.context_proj.out_dim();
        let p = self.pos_proj.out_dim();
        let w = self.word.dim();
        let (d_ctx, rest) = d_output.split_at(c);
        let (d_pos, rest) = rest.split_at(p);
        let (d_word, d_lemma) = rest.split_at(w);

        let d_ctx_in = self.context_proj.backward(
            &trace.context_in,
            &trace.context_out,
            d_ctx,
            &mut grad.context_proj,
        );
        for (k, &id) in idx.context_ids.iter().enumerate() {
            self.word
                .accumulate(&mut grad.word, id, &d_ctx_in[k * w..(k + 1) * w]);
        }
        let pd = self.pos.dim();
        let d_pos_in =
            self.pos_proj
                .backward(&trace.pos_in, &trace.pos_out, d_pos, &mut grad.pos_proj);
        for (k, &id) in idx.pos_ids.iter().enumerate() {
            self.pos
                .accumulate(&mut grad.pos, id, &d_pos_in[k * pd..(k + 1) * pd]);
        }
        self.word.accumulate(&mut grad.word, idx.word_id, d_word);
        self.lemma
            .accumulate(&mut grad.lemma, idx.lemma_id, d_lemma);
    }

    pub(crate) fn save(&self, ck: &mut Checkpoint, prefix: &str) {
        ck.put_table(&format!("{prefix}word"), &self.word);
        ck.put_table(&format!("{prefix}pos"), &self.pos);
        ck.put_table(&format!("{prefix}lemma"), &self.lemma);
        ck.put_layer(&format!("{prefix}context_proj"), &self.context_proj);
        ck.put_layer(&format!("{prefix}pos_proj"), &self.pos_proj);
    }

    pub(crate) fn load(ck: &Checkpoint, prefix: &str, config: &EncoderConfig) -> Result<Self> {
        let enc = Self {
            word: ck.table(&format!("{prefix}word"), true)?,
            pos: ck.table(&format!("{prefix}pos"), true)?,
            lemma: ck.table(&format!("{prefix}lemma"), true)?,
            context_proj: ck.layer(&format!("{prefix}context_proj"), Activation::Tanh)?,
            pos_proj: ck.layer(&format!("{prefix}pos_proj"), Activation::Tanh)?,
        };
        let f = &config.features;
        let expected = [
            (enc.word.dim(), f.word_dim),
            (enc.pos.dim(), f.pos_dim),
            (enc.lemma.dim(), f.lemma_dim),
            (enc.context_proj.in_dim(), f.context_window * f.word_dim),
            (enc.pos_proj.in_dim(), f.pos_window * f.pos_dim),
            (enc.context_proj.out_dim(), config.context_features),
            (enc.pos_proj.out_dim(), config.pos_features),
        ];
        for (actual, want) in expected {
            if actual != want {
                return Err(Error::Checkpoint(format!(
                    "encoder shape {actual} does not match configured {want}"
                )));
            }
        }
        let sizes = [
            (enc.word.vocab_size(), ck.vocab.words.size()),
            (enc.pos.vocab_size(), ck.vocab.pos.size()),
            (enc.lemma.vocab_size(), ck.vocab.lemmas.size()),
        ];
        if sizes.iter().any(|(a, b)| a != b) {
            return Err(Error::Checkpoint(
                "embedding rows do not match vocabulary".into(),
            ));
        }
        Ok(enc)
    }
}

impl Parameters for EventEncoder {
    fn params(&self) -> Vec<(String, &[f64])> {
        let mut v = prefixed("word", self.word.params());
        v.extend(prefixed("pos", self.pos.params()));
        v.extend(prefixed("lemma", self.lemma.params()));
        v.extend(prefixed("context_proj", self.context_proj.params()));
        v.extend(prefixed("pos_proj", self.pos_proj.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut v = prefixed("word", self.word.params_mut());
        v.extend(prefixed("pos", self.pos.params_mut()));
        v.extend(prefixed("lemma", self.lemma.params_mut()));
        v.extend(prefixed("context_proj", self.context_proj.params_mut()));
        v.extend(prefixed("pos_proj", self.pos_proj.params_mut()));
        v
    }
}
