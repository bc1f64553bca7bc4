//! Feed-forward event mention extractor.
//!
//! Every token is a candidate. Its encoded features pass through two tanh
//! layers and a two-way softmax whose first component is the probability of
//! being an event mention.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, Mention};
use crate::encoder::{EncoderConfig, EventEncoder};
use crate::error::{Error, Result};
use crate::features::{encode_candidate, CandidateIndices, Vocab};
use crate::nn::loss::PROB_CLAMP;
use crate::nn::{
    cross_entropy, gradient_check, prefixed, softmax, Activation, AdadeltaState, Checkpoint,
    DenseLayer, GradCheckReport, Mlp, OptimizerConfig, Parameters,
};
use crate::train::{epoch_order, epoch_rng, init_rng, run_epoch};

/// Class index of "is a mention" in the softmax output.
pub const MENTION: usize = 0;
pub const NON_MENTION: usize = 1;

const INIT_SCHEME: &str =
    "dense: uniform +-sqrt(6/(in+out)), bias 0; embeddings: uniform +-0.5/dim, PAD row 0";

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    Recall,
    #[default]
    F1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExtractorConfig {
    pub encoder: EncoderConfig,
    pub hidden: [usize; 2],
    pub optimizer: OptimizerConfig,
    /// Only tokens whose tag starts with `VB` or `NN` are candidates.
    pub restrict_to_verbs_and_nouns: bool,
    /// Fraction of negative candidates kept per epoch.
    pub negative_keep: f64,
    /// Dev metric used to pick the epoch whose weights are kept.
    pub selection: SelectionMetric,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            hidden: [150, 80],
            optimizer: OptimizerConfig::default(),
            restrict_to_verbs_and_nouns: false,
            negative_keep: 1.0,
            selection: SelectionMetric::F1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MentionExtractorModel {
    pub encoder: EventEncoder,
    /// hidden1 (tanh), hidden2 (tanh), output (identity, 2 logits).
    pub classifier: Mlp,
}

impl Parameters for MentionExtractorModel {
    fn params(&self) -> Vec<(String, &[f64])> {
        let mut v = prefixed("encoder", self.encoder.params());
        v.extend(prefixed("classifier", self.classifier.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut v = prefixed("encoder", self.encoder.params_mut());
        v.extend(prefixed("classifier", self.classifier.params_mut()));
        v
    }
}

const LAYER_NAMES: [&str; 3] = ["hidden1", "hidden2", "output"];

impl MentionExtractorModel {
    pub fn init<R: Rng>(vocab: &Vocab, config: &ExtractorConfig, rng: &mut R) -> Self {
        let encoder = EventEncoder::init(vocab, &config.encoder, rng);
        let d = encoder.output_dim();
        let [h1, h2] = config.hidden;
        let classifier = Mlp {
            layers: vec![
                DenseLayer::init(d, h1, Activation::Tanh, rng),
                DenseLayer::init(h1, h2, Activation::Tanh, rng),
                DenseLayer::init(h2, 2, Activation::Identity, rng),
            ],
        };
        Self {
            encoder,
            classifier,
        }
    }

    fn logits(&self, idx: &CandidateIndices) -> Vec<f64> {
        let enc = self.encoder.forward(idx);
        let acts = self.classifier.forward_trace(enc.output);
        acts.into_iter().last().expect("output layer")
    }

    pub fn to_checkpoint(&self, config: &ExtractorConfig, vocab: &Vocab, seed: u64) -> Checkpoint {
        let cfg = serde_json::json!({
            "model": "mention_extractor",
            "init": INIT_SCHEME,
            "settings": config,
        });
        let mut ck = Checkpoint::new(cfg, vocab.clone(), seed);
        self.encoder.save(&mut ck, "");
        for (name, layer) in LAYER_NAMES.iter().zip(&self.classifier.layers) {
            ck.put_layer(name, layer);
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, ExtractorConfig)> {
        if ck.config.get("model").and_then(|m| m.as_str()) != Some("mention_extractor") {
            return Err(Error::Checkpoint(
                "not a mention extractor checkpoint".into(),
            ));
        }
        let config: ExtractorConfig = serde_json::from_value(ck.config["settings"].clone())?;
        let encoder = EventEncoder::load(ck, "", &config.encoder)?;
        let acts = [Activation::Tanh, Activation::Tanh, Activation::Identity];
        let layers = LAYER_NAMES
            .iter()
            .zip(acts)
            .map(|(n, a)| ck.layer(n, a))
            .collect::<Result<Vec<_>>>()?;
        if layers[2].out_dim() != 2 || layers[0].in_dim() != encoder.output_dim() {
            return Err(Error::Checkpoint(
                "extractor layer wiring is inconsistent".into(),
            ));
        }
        Ok((
            Self {
                encoder,
                classifier: Mlp { layers },
            },
            config,
        ))
    }
}

/// (p_mention, p_non_mention) for one candidate.
pub fn extractor_forward(
    model: &MentionExtractorModel,
    idx: &CandidateIndices,
) -> Result<(f64, f64)> {
    model.encoder.check(idx)?;
    let p = softmax(&model.logits(idx));
    Ok((p[MENTION], p[NON_MENTION]))
}

/// Candidate example: index bundle and target class.
#[derive(Clone, Debug)]
pub struct CandidateExample {
    pub indices: CandidateIndices,
    pub class: usize,
}

fn is_candidate(tag: &str, config: &ExtractorConfig) -> bool {
    !config.restrict_to_verbs_and_nouns || tag.starts_with("VB") || tag.starts_with("NN")
}

/// One example per candidate token; positive iff it heads a gold mention.
pub fn candidate_examples(
    doc: &Document,
    vocab: &Vocab,
    config: &ExtractorConfig,
) -> Result<Vec<CandidateExample>> {
    let heads: HashSet<(usize, usize)> = doc.gold_mentions.iter().map(Mention::position).collect();
    let mut out = Vec::new();
    for (s, sentence) in doc.sentences.iter().enumerate() {
        for (t, tok) in sentence.iter().enumerate() {
            if !is_candidate(&tok.pos, config) {
                continue;
            }
            let indices = encode_candidate(doc, s, t, vocab, &config.encoder.features)?;
            let class = if heads.contains(&(s, t)) {
                MENTION
            } else {
                NON_MENTION
            };
            out.push(CandidateExample { indices, class });
        }
    }
    Ok(out)
}

/// Mean cross-entropy over `batch` and its gradient.
pub fn batch_loss_and_grad(
    model: &MentionExtractorModel,
    batch: &[&CandidateExample],
) -> Result<(f64, MentionExtractorModel)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let n = batch.len() as f64;
    let mut grad = model.zeroed();
    let mut loss = 0.0;
    for ex in batch {
        let enc = model.encoder.forward(&ex.indices);
        let acts = model.classifier.forward_trace(enc.output.clone());
        let p = softmax(acts.last().expect("output"));
        // P(class 1) plays the role of y-hat; the target index is the label.
        loss += cross_entropy(p[1], ex.class);
        let p_target = p[ex.class];
        let clamped = p_target <= PROB_CLAMP || p_target >= 1.0 - PROB_CLAMP;
        let d_logits: Vec<f64> = if clamped {
            vec![0.0; 2]
        } else {
            (0..2)
                .map(|k| (p[k] - if k == ex.class { 1.0 } else { 0.0 }) / n)
                .collect()
        };
        let d_enc = model
            .classifier
            .backward(&acts, d_logits, &mut grad.classifier);
        model
            .encoder
            .backward(&ex.indices, &enc, &d_enc, &mut grad.encoder);
    }
    Ok((loss / n, grad))
}

/// Finite-difference check of [`batch_loss_and_grad`].
pub fn gradient_check_extractor(
    model: &MentionExtractorModel,
    batch: &[&CandidateExample],
    step: f64,
) -> Result<GradCheckReport> {
    let (_, grad) = batch_loss_and_grad(model, batch)?;
    Ok(gradient_check(model, &grad, step, |m| {
        batch_loss_and_grad(m, batch)
            .map(|(l, _)| l)
            .unwrap_or(f64::NAN)
    }))
}

/// Keeps each token whose mention probability is strictly above 0.5.
pub fn predict_mentions(
    model: &MentionExtractorModel,
    doc: &Document,
    vocab: &Vocab,
    config: &ExtractorConfig,
) -> Result<Vec<Mention>> {
    let mut out = Vec::new();
    for (s, sentence) in doc.sentences.iter().enumerate() {
        for (t, tok) in sentence.iter().enumerate() {
            if !is_candidate(&tok.pos, config) {
                continue;
            }
            let idx = encode_candidate(doc, s, t, vocab, &config.encoder.features)?;
            let (p_mention, _) = extractor_forward(model, &idx)?;
            if p_mention > 0.5 {
                out.push(Mention::single(format!("pred-{s}-{t}"), s, t));
            }
        }
    }
    Ok(out)
}

/// Identity of a mention for extraction scoring: document plus head position.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MentionKey {
    pub doc_id: String,
    pub sentence: usize,
    pub head: usize,
}

pub fn mention_keys<'a>(
    doc_id: &str,
    mentions: impl IntoIterator<Item = &'a Mention>,
) -> Vec<MentionKey> {
    mentions
        .into_iter()
        .map(|m| MentionKey {
            doc_id: doc_id.to_owned(),
            sentence: m.sentence,
            head: m.head,
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExtractionScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 of predicted against gold head positions.
/// Empty denominators give 0.
pub fn evaluate_extraction(pred: &[MentionKey], gold: &[MentionKey]) -> ExtractionScores {
    let pred: HashSet<&MentionKey> = pred.iter().collect();
    let gold: HashSet<&MentionKey> = gold.iter().collect();
    let hits = pred.intersection(&gold).count() as f64;
    let precision = if pred.is_empty() {
        0.0
    } else {
        hits / pred.len() as f64
    };
    let recall = if gold.is_empty() {
        0.0
    } else {
        hits / gold.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    ExtractionScores {
        precision,
        recall,
        f1,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtractorEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev: ExtractionScores,
}

#[derive(Clone, Debug)]
pub struct TrainedExtractor {
    pub model: MentionExtractorModel,
    pub best_epoch: usize,
    pub log: Vec<ExtractorEpoch>,
}

pub fn evaluate_on(
    model: &MentionExtractorModel,
    corpus: &Corpus,
    vocab: &Vocab,
    config: &ExtractorConfig,
) -> Result<ExtractionScores> {
    let mut pred = Vec::new();
    let mut gold = Vec::new();
    for doc in &corpus.documents {
        pred.extend(mention_keys(
            &doc.doc_id,
            &predict_mentions(model, doc, vocab, config)?,
        ));
        gold.extend(mention_keys(&doc.doc_id, &doc.gold_mentions));
    }
    Ok(evaluate_extraction(&pred, &gold))
}

/// Trains on every candidate token of `train`; keeps the weights of the epoch
/// with the best dev score under `config.selection`, or the last epoch when
/// `dev` is empty.
pub fn train_extractor(
    train: &Corpus,
    dev: &Corpus,
    vocab: &Vocab,
    config: &ExtractorConfig,
    seed: u64,
) -> Result<TrainedExtractor> {
    config.encoder.validate()?;
    let mut examples = Vec::new();
    for doc in &train.documents {
        examples.extend(candidate_examples(doc, vocab, config)?);
    }
    if examples.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut model = MentionExtractorModel::init(vocab, config, &mut init_rng(seed));
    let opt = &config.optimizer;
    let mut state = AdadeltaState::new(&model, opt.rho, opt.eps);
    let mut best: Option<(f64, usize, MentionExtractorModel)> = None;
    let mut log = Vec::with_capacity(opt.epochs);
    for epoch in 0..opt.epochs {
        let mut rng = epoch_rng(seed, epoch);
        let order = epoch_order(&mut rng, examples.len(), config.negative_keep, |i| {
            examples[i].class == NON_MENTION
        });
        let train_loss = run_epoch(
            &mut model,
            &mut state,
            &order,
            opt.batch_size,
            |m, batch| {
                let refs: Vec<&CandidateExample> = batch.iter().map(|&i| &examples[i]).collect();
                batch_loss_and_grad(m, &refs)
            },
        )?;
        let dev_scores = evaluate_on(&model, dev, vocab, config)?;
        let score = match config.selection {
            SelectionMetric::Recall => dev_scores.recall,
            SelectionMetric::F1 => dev_scores.f1,
        };
        if !dev.is_empty() && best.as_ref().map_or(true, |(s, _, _)| score > *s) {
            best = Some((score, epoch, model.clone()));
        }
        log.push(ExtractorEpoch {
            epoch,
            train_loss,
            dev: dev_scores,
        });
    }
    let last = opt.epochs.saturating_sub(1);
    let (_, best_epoch, model) = best.unwrap_or((0.0, last, model));
    Ok(TrainedExtractor {
        model,
        best_epoch,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureConfig, Lexicon};
    use crate::nn::Matrix;

    fn tiny_config() -> ExtractorConfig {
        ExtractorConfig {
            encoder: EncoderConfig {
                features: FeatureConfig {
                    context_window: 3,
                    pos_window: 3,
                    word_dim: 4,
                    pos_dim: 3,
                    lemma_dim: 4,
                },
                context_features: 5,
                pos_features: 3,
            },
            hidden: [6, 4],
            ..ExtractorConfig::default()
        }
    }

    fn tiny_vocab() -> Vocab {
        let lex = |n: usize| Lexicon::from_entries((0..n).map(|i| format!("x{i}")).collect());
        Vocab {
            words: lex(5),
            pos: lex(3),
            lemmas: lex(4),
        }
    }

    fn indices(c: [usize; 3], p: [usize; 3], w: usize, l: usize) -> CandidateIndices {
        CandidateIndices {
            context_ids: c.to_vec(),
            pos_ids: p.to_vec(),
            word_id: w,
            lemma_id: l,
        }
    }

    fn with_output(model: &mut MentionExtractorModel, logits: [f64; 2]) {
        let out = model.classifier.layers.last_mut().unwrap();
        out.weights = Matrix::zeros(out.in_dim(), 2);
        out.bias = logits.to_vec();
    }

    #[test]
    fn forward_is_a_distribution() {
        let mut rng = init_rng(3);
        let model = MentionExtractorModel::init(&tiny_vocab(), &tiny_config(), &mut rng);
        let (a, b) = extractor_forward(&model, &indices([0, 2, 3], [1, 2, 0], 2, 3)).unwrap();
        assert!((a + b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_weights_give_even_split() {
        let mut model =
            MentionExtractorModel::init(&tiny_vocab(), &tiny_config(), &mut init_rng(1));
        for (_, p) in model.classifier.params_mut() {
            p.fill(0.0);
        }
        let (a, b) = extractor_forward(&model, &indices([2, 3, 4], [2, 2, 2], 3, 2)).unwrap();
        assert_eq!((a, b), (0.5, 0.5));
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let model = MentionExtractorModel::init(&tiny_vocab(), &tiny_config(), &mut init_rng(2));
        let i = indices([1, 2, 3], [0, 1, 2], 4, 3);
        assert_eq!(
            extractor_forward(&model, &i).unwrap(),
            extractor_forward(&model, &i.clone()).unwrap()
        );
    }

    #[test]
    fn out_of_vocab_id_is_rejected() {
        let model = MentionExtractorModel::init(&tiny_vocab(), &tiny_config(), &mut init_rng(2));
        assert!(extractor_forward(&model, &indices([1, 2, 99], [0, 1, 2], 4, 3)).is_err());
    }

    fn doc_with_words(n: usize) -> Document {
        use crate::corpus::Token;
        Document {
            doc_id: "d".into(),
            topic_id: 1,
            sentences: vec![(0..n)
                .map(|t| Token {
                    surface: format!("x{t}"),
                    pos: "x0".into(),
                    lemma: "x1".into(),
                    sentence_index: 0,
                    token_index: t,
                })
                .collect()],
            gold_mentions: vec![],
            gold_chains: vec![],
        }
    }

    #[test]
    fn prediction_thresholds() {
        let cfg = tiny_config();
        let v = tiny_vocab();
        let doc = doc_with_words(4);
        let mut model = MentionExtractorModel::init(&v, &cfg, &mut init_rng(5));
        with_output(&mut model, [30.0, -30.0]);
        assert_eq!(predict_mentions(&model, &doc, &v, &cfg).unwrap().len(), 4);
        with_output(&mut model, [-30.0, 30.0]);
        assert!(predict_mentions(&model, &doc, &v, &cfg).unwrap().is_empty());
        with_output(&mut model, [0.0, 0.0]);
        assert!(predict_mentions(&model, &doc, &v, &cfg).unwrap().is_empty());
    }

    #[test]
    fn extraction_scores() {
        let gold = mention_keys(
            "d",
            &[Mention::single("a", 0, 1), Mention::single("b", 1, 0)],
        );
        assert_eq!(
            evaluate_extraction(&gold, &gold),
            ExtractionScores {
                precision: 1.0,
                recall: 1.0,
                f1: 1.0
            }
        );
        assert_eq!(evaluate_extraction(&[], &gold), ExtractionScores::default());
        let half = evaluate_extraction(&gold[..1], &gold);
        assert_eq!((half.precision, half.recall), (1.0, 0.5));
    }

    #[test]
    fn pad_row_gets_no_gradient() {
        let cfg = tiny_config();
        let model = MentionExtractorModel::init(&tiny_vocab(), &cfg, &mut init_rng(9));
        let ex = CandidateExample {
            indices: indices([0, 2, 3], [0, 1, 2], 2, 3),
            class: MENTION,
        };
        let (_, grad) = batch_loss_and_grad(&model, &[&ex]).unwrap();
        assert!(grad.encoder.word.lookup(0).iter().all(|&g| g == 0.0));
        assert!(grad.encoder.pos.lookup(0).iter().all(|&g| g == 0.0));
        // untouched rows stay zero too
        assert!(grad.encoder.word.lookup(4).iter().all(|&g| g == 0.0));
        assert!(grad.encoder.word.lookup(2).iter().any(|&g| g != 0.0));
    }

    #[test]
    fn zero_weight_gradient_matches_finite_differences() {
        let cfg = tiny_config();
        let mut model = MentionExtractorModel::init(&tiny_vocab(), &cfg, &mut init_rng(4));
        for (_, p) in model.classifier.params_mut() {
            p.fill(0.0);
        }
        let a = CandidateExample {
            indices: indices([2, 3, 4], [1, 2, 1], 3, 2),
            class: MENTION,
        };
        let b = CandidateExample {
            indices: indices([2, 3, 4], [1, 2, 1], 3, 2),
            class: NON_MENTION,
        };
        let (loss, grad) = batch_loss_and_grad(&model, &[&a, &b]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-12);
        // Output bias gradient is the mean of (p - onehot) = 0 for a symmetric batch.
        assert!(grad.classifier.layers[2]
            .bias
            .iter()
            .all(|g| g.abs() < 1e-15));
        let report = gradient_check_extractor(&model, &[&a, &b], 1e-5).unwrap();
        assert!(report.max_relative_error < 1e-4, "{report:?}");
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = tiny_config();
        let v = tiny_vocab();
        let model = MentionExtractorModel::init(&v, &cfg, &mut init_rng(8));
        let ck = model.to_checkpoint(&cfg, &v, 8);
        let bytes = ck.to_bytes().unwrap();
        let back: Checkpoint = serde_json::from_slice(&bytes).unwrap();
        let (m2, c2) = MentionExtractorModel::from_checkpoint(&back).unwrap();
        assert_eq!(m2, model);
        assert_eq!(c2, cfg);
    }
}
