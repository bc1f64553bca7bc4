//! Multi-loss pair model.
//!
//! Both events of a candidate pair go through one shared [`EventEncoder`].
//! The classifier network (CN) reads the concatenated pair vector and ends in a
//! two-way softmax; the scorer network (SN) maps each event separately and the
//! pair is scored by the cosine of the two outputs. Training minimizes the mean
//! cross-entropy of CN plus the summed `ln max(|m - s|, eps)` of SN.
//!
//! Labels follow the convention `y = 0` for coreferent pairs.

use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chains::{build_chains, ChainSet, FilterPolicy, FilterThresholds};
use crate::corpus::{chain_index, gold_clusters, Chain, Corpus, Document, Mention};
use crate::encoder::{EncoderConfig, EncoderTrace, EventEncoder};
use crate::error::{Error, Result};
use crate::features::{encode_candidate, CandidateIndices, FeatureConfig, Vocab};
use crate::metrics::score_corpus;
use crate::nn::loss::{cosine_backward, similarity_loss_grad, PROB_CLAMP, SIMILARITY_EPS};
use crate::nn::{
    cosine_similarity, cross_entropy, gradient_check, prefixed, similarity_loss, softmax,
    Activation, AdadeltaState, Checkpoint, Cosine, DenseLayer, GradCheckReport, LossValues, Mlp,
    OptimizerConfig, Parameters,
};
use crate::train::{epoch_order, epoch_rng, init_rng, run_epoch};

const INIT_SCHEME: &str =
    "dense: uniform +-sqrt(6/(in+out)), bias 0; embeddings: uniform +-0.5/dim, PAD row 0";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorefLabel {
    Coref,
    NonCoref,
}

impl CorefLabel {
    /// Class index / `y` value: 0 for coreferent, 1 otherwise.
    pub fn y(self) -> usize {
        match self {
            CorefLabel::Coref => 0,
            CorefLabel::NonCoref => 1,
        }
    }

    pub fn from_y(y: usize) -> Self {
        if y == 0 {
            CorefLabel::Coref
        } else {
            CorefLabel::NonCoref
        }
    }
}

/// The three evaluated systems. C-NN trains the classifier alone; C-MLNN and
/// MLNN train both losses. Only MLNN uses similarity and confidence at
/// inference time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SystemMode {
    #[serde(rename = "C-NN")]
    CNn,
    #[serde(rename = "C-MLNN")]
    CMlnn,
    #[serde(rename = "MLNN")]
    Mlnn,
}

impl SystemMode {
    pub fn objective(self) -> Objective {
        match self {
            SystemMode::CNn => Objective::ClassifierOnly,
            SystemMode::CMlnn | SystemMode::Mlnn => Objective::Joint,
        }
    }

    pub fn filter_policy(self, thresholds: FilterThresholds) -> FilterPolicy {
        match self {
            SystemMode::Mlnn => FilterPolicy::WithRescue(thresholds),
            SystemMode::CNn | SystemMode::CMlnn => FilterPolicy::ClassifierOnly,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SystemMode::CNn => "C-NN",
            SystemMode::CMlnn => "C-MLNN",
            SystemMode::Mlnn => "MLNN",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Cross-entropy only; SN receives no gradient.
    ClassifierOnly,
    /// Cross-entropy plus similarity loss.
    Joint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlnnConfig {
    pub encoder: EncoderConfig,
    pub cn_hidden: [usize; 2],
    pub sn_hidden: [usize; 2],
    pub optimizer: OptimizerConfig,
    /// Fraction of non-coreferent training pairs kept per epoch.
    pub negative_keep: f64,
}

impl Default for MlnnConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            cn_hidden: [300, 150],
            sn_hidden: [150, 80],
            optimizer: OptimizerConfig::default(),
            negative_keep: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlnnModel {
    pub encoder: EventEncoder,
    /// Two tanh layers and a 2-logit output over `[fa ‖ fb]`.
    pub cn: Mlp,
    /// Two tanh layers applied to each event.
    pub sn: Mlp,
}

const CN_NAMES: [&str; 3] = ["cn.hidden1", "cn.hidden2", "cn.output"];
const SN_NAMES: [&str; 2] = ["sn.hidden1", "sn.hidden2"];

impl Parameters for MlnnModel {
    fn params(&self) -> Vec<(String, &[f64])> {
        let mut v = prefixed("encoder", self.encoder.params());
        v.extend(prefixed("cn", self.cn.params()));
        v.extend(prefixed("sn", self.sn.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut v = prefixed("encoder", self.encoder.params_mut());
        v.extend(prefixed("cn", self.cn.params_mut()));
        v.extend(prefixed("sn", self.sn.params_mut()));
        v
    }
}

impl MlnnModel {
    pub fn init<R: Rng>(vocab: &Vocab, config: &MlnnConfig, rng: &mut R) -> Self {
        let encoder = EventEncoder::init(vocab, &config.encoder, rng);
        let d = encoder.output_dim();
        let [c1, c2] = config.cn_hidden;
        let [s1, s2] = config.sn_hidden;
        let cn = Mlp {
            layers: vec![
                DenseLayer::init(2 * d, c1, Activation::Tanh, rng),
                DenseLayer::init(c1, c2, Activation::Tanh, rng),
                DenseLayer::init(c2, 2, Activation::Identity, rng),
            ],
        };
        let sn = Mlp {
            layers: vec![
                DenseLayer::init(d, s1, Activation::Tanh, rng),
                DenseLayer::init(s1, s2, Activation::Tanh, rng),
            ],
        };
        Self { encoder, cn, sn }
    }

    pub fn event_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    fn check_event(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.event_dim() {
            return Err(Error::Dimension {
                context: "event feature vector",
                expected: self.event_dim(),
                actual: f.len(),
            });
        }
        Ok(())
    }

    fn cn_probs(&self, fa: &[f64], fb: &[f64]) -> Vec<f64> {
        let mut x = Vec::with_capacity(fa.len() + fb.len());
        x.extend_from_slice(fa);
        x.extend_from_slice(fb);
        softmax(self.cn.forward_trace(x).last().expect("output"))
    }

    fn sn_output(&self, f: &[f64]) -> Vec<f64> {
        self.sn.forward_trace(f.to_vec()).pop().expect("sn output")
    }

    pub fn to_checkpoint(
        &self,
        config: &MlnnConfig,
        mode: SystemMode,
        vocab: &Vocab,
        seed: u64,
    ) -> Checkpoint {
        let cfg = serde_json::json!({
            "model": "mlnn",
            "init": INIT_SCHEME,
            "mode": mode,
            "settings": config,
        });
        let mut ck = Checkpoint::new(cfg, vocab.clone(), seed);
        self.encoder.save(&mut ck, "encoder.");
        for (name, layer) in CN_NAMES.iter().zip(&self.cn.layers) {
            ck.put_layer(name, layer);
        }
        for (name, layer) in SN_NAMES.iter().zip(&self.sn.layers) {
            ck.put_layer(name, layer);
        }
        ck
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<(Self, MlnnConfig, SystemMode)> {
        if ck.config.get("model").and_then(|m| m.as_str()) != Some("mlnn") {
            return Err(Error::Checkpoint("not a pair-model checkpoint".into()));
        }
        let config: MlnnConfig = serde_json::from_value(ck.config["settings"].clone())?;
        let mode: SystemMode = serde_json::from_value(ck.config["mode"].clone())?;
        let encoder = EventEncoder::load(ck, "encoder.", &config.encoder)?;
        let cn = Mlp {
            layers: CN_NAMES
                .iter()
                .zip([Activation::Tanh, Activation::Tanh, Activation::Identity])
                .map(|(n, a)| ck.layer(n, a))
                .collect::<Result<_>>()?,
        };
        let sn = Mlp {
            layers: SN_NAMES
                .iter()
                .map(|n| ck.layer(n, Activation::Tanh))
                .collect::<Result<_>>()?,
        };
        let d = encoder.output_dim();
        if cn.layers[0].in_dim() != 2 * d || cn.out_dim() != 2 || sn.layers[0].in_dim() != d {
            return Err(Error::Checkpoint(
                "pair-model layer wiring is inconsistent".into(),
            ));
        }
        Ok((Self { encoder, cn, sn }, config, mode))
    }
}

/// Event feature vector of a mention's head token.
pub fn encode_event(
    model: &MlnnModel,
    doc: &Document,
    mention: &Mention,
    vocab: &Vocab,
    features: &FeatureConfig,
) -> Result<Vec<f64>> {
    let idx = encode_candidate(doc, mention.sentence, mention.head, vocab, features)?;
    model.encoder.encode(&idx)
}

/// CN decision for an ordered pair: argmax label (ties go to non-coreferent)
/// and the probability of that label.
pub fn classify_pair(model: &MlnnModel, fa: &[f64], fb: &[f64]) -> Result<(CorefLabel, f64)> {
    model.check_event(fa)?;
    model.check_event(fb)?;
    Ok(decide(&model.cn_probs(fa, fb)))
}

fn decide(p: &[f64]) -> (CorefLabel, f64) {
    if p[0] > p[1] {
        (CorefLabel::Coref, p[0])
    } else {
        (CorefLabel::NonCoref, p[1])
    }
}

/// Cosine of the SN outputs of the two events.
pub fn score_pair(model: &MlnnModel, fa: &[f64], fb: &[f64]) -> Result<Cosine> {
    model.check_event(fa)?;
    model.check_event(fb)?;
    Ok(cosine_similarity(
        &model.sn_output(fa),
        &model.sn_output(fb),
    ))
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairExample {
    pub a: Mention,
    pub b: Mention,
    /// Present when gold chains were supplied.
    pub label: Option<CorefLabel>,
}

fn document_order(mentions: &[Mention]) -> Vec<&Mention> {
    let mut sorted: Vec<&Mention> = mentions.iter().collect();
    sorted.sort_by(|x, y| {
        x.position()
            .cmp(&y.position())
            .then_with(|| x.end.cmp(&y.end))
            .then_with(|| x.id.cmp(&y.id))
    });
    sorted
}

/// All within-document pairs, earlier mention first. With gold chains, a pair
/// is coreferent iff both mentions sit in the same chain.
pub fn generate_pairs(mentions: &[Mention], gold_chains: Option<&[Chain]>) -> Vec<PairExample> {
    let chain_of: Option<HashMap<&str, usize>> = gold_chains.map(|chains| {
        chains
            .iter()
            .enumerate()
            .flat_map(|(i, c)| c.mention_ids.iter().map(move |m| (m.as_str(), i)))
            .collect()
    });
    let sorted = document_order(mentions);
    let mut out = Vec::with_capacity(sorted.len() * sorted.len().saturating_sub(1) / 2);
    for (i, a) in sorted.iter().enumerate() {
        for b in &sorted[i + 1..] {
            let label = chain_of.as_ref().map(|map| {
                match (map.get(a.id.as_str()), map.get(b.id.as_str())) {
                    (Some(x), Some(y)) if x == y => CorefLabel::Coref,
                    _ => CorefLabel::NonCoref,
                }
            });
            out.push(PairExample {
                a: (*a).clone(),
                b: (*b).clone(),
                label,
            });
        }
    }
    out
}

/// Losses of a scored batch. `p_non_coref[i]` is P(y = 1) for pair `i`.
pub fn joint_loss(
    p_non_coref: &[f64],
    similarities: &[f64],
    labels: &[CorefLabel],
) -> Result<LossValues> {
    if labels.is_empty() {
        return Err(Error::Empty("batch"));
    }
    if p_non_coref.len() != labels.len() || similarities.len() != labels.len() {
        return Err(Error::Dimension {
            context: "joint loss batch",
            expected: labels.len(),
            actual: p_non_coref.len().min(similarities.len()),
        });
    }
    let n = labels.len() as f64;
    let l1 = p_non_coref
        .iter()
        .zip(labels)
        .map(|(&p, y)| cross_entropy(p, y.y()))
        .sum::<f64>()
        / n;
    let l2 = similarities
        .iter()
        .zip(labels)
        .map(|(&s, y)| similarity_loss(s, y.y()))
        .sum::<f64>();
    Ok(LossValues::new(l1, l2))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairDecision {
    pub a: String,
    pub b: String,
    pub label: CorefLabel,
    pub confidence: f64,
    pub similarity: f64,
}

/// Decisions for every pair of `mentions`, in pair-generation order.
pub fn predict_pairs(
    model: &MlnnModel,
    doc: &Document,
    mentions: &[Mention],
    vocab: &Vocab,
    features: &FeatureConfig,
) -> Result<Vec<PairDecision>> {
    let sorted = document_order(mentions);
    let mut feats = Vec::with_capacity(sorted.len());
    let mut sn_out = Vec::with_capacity(sorted.len());
    for m in &sorted {
        let f = encode_event(model, doc, m, vocab, features)?;
        sn_out.push(model.sn_output(&f));
        feats.push(f);
    }
    let mut out = Vec::new();
    for i in 0..sorted.len() {
        for j in i + 1..sorted.len() {
            let (label, confidence) = decide(&model.cn_probs(&feats[i], &feats[j]));
            let similarity = cosine_similarity(&sn_out[i], &sn_out[j]).value;
            out.push(PairDecision {
                a: sorted[i].id.clone(),
                b: sorted[j].id.clone(),
                label,
                confidence,
                similarity,
            });
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IndexedPair {
    pub a: usize,
    pub b: usize,
    pub label: CorefLabel,
}

/// Training pairs with each mention encoded once.
#[derive(Clone, Debug, Default)]
pub struct PairSet {
    pub mentions: Vec<CandidateIndices>,
    pub pairs: Vec<IndexedPair>,
}

impl PairSet {
    /// Pairs over the gold mentions of every document, labeled from gold chains.
    pub fn from_corpus(corpus: &Corpus, vocab: &Vocab, features: &FeatureConfig) -> Result<Self> {
        let mut set = PairSet::default();
        for doc in &corpus.documents {
            let chains = chain_index(doc);
            let sorted = document_order(&doc.gold_mentions);
            let base = set.mentions.len();
            for m in &sorted {
                set.mentions
                    .push(encode_candidate(doc, m.sentence, m.head, vocab, features)?);
            }
            for i in 0..sorted.len() {
                for j in i + 1..sorted.len() {
                    let same = matches!(
                        (chains.get(sorted[i].id.as_str()), chains.get(sorted[j].id.as_str())),
                        (Some(x), Some(y)) if x == y
                    );
                    set.pairs.push(IndexedPair {
                        a: base + i,
                        b: base + j,
                        label: if same {
                            CorefLabel::Coref
                        } else {
                            CorefLabel::NonCoref
                        },
                    });
                }
            }
        }
        Ok(set)
    }
}

struct PairForward {
    cn_acts: Vec<Vec<f64>>,
    probs: Vec<f64>,
    cosine: Option<Cosine>,
}

struct BatchForward {
    /// Mention index -> slot in the traces below.
    slots: BTreeMap<usize, usize>,
    order: Vec<usize>,
    enc: Vec<EncoderTrace>,
    sn: Vec<Vec<Vec<f64>>>,
    pairs: Vec<PairForward>,
}

fn forward_batch(
    model: &MlnnModel,
    set: &PairSet,
    batch: &[usize],
    objective: Objective,
) -> BatchForward {
    let mut slots = BTreeMap::new();
    let mut order = Vec::new();
    for &k in batch {
        let p = set.pairs[k];
        for m in [p.a, p.b] {
            slots.entry(m).or_insert_with(|| {
                order.push(m);
                order.len() - 1
            });
        }
    }
    let enc: Vec<EncoderTrace> = order
        .iter()
        .map(|&m| model.encoder.forward(&set.mentions[m]))
        .collect();
    let sn: Vec<Vec<Vec<f64>>> = if objective == Objective::Joint {
        enc.iter()
            .map(|t| model.sn.forward_trace(t.output.clone()))
            .collect()
    } else {
        Vec::new()
    };
    let pairs = batch
        .iter()
        .map(|&k| {
            let p = set.pairs[k];
            let (sa, sb) = (slots[&p.a], slots[&p.b]);
            let mut x = enc[sa].output.clone();
            x.extend_from_slice(&enc[sb].output);
            let cn_acts = model.cn.forward_trace(x);
            let probs = softmax(cn_acts.last().expect("output"));
            let cosine = (objective == Objective::Joint).then(|| {
                cosine_similarity(
                    sn[sa].last().expect("sn output"),
                    sn[sb].last().expect("sn output"),
                )
            });
            PairForward {
                cn_acts,
                probs,
                cosine,
            }
        })
        .collect();
    BatchForward {
        slots,
        order,
        enc,
        sn,
        pairs,
    }
}

/// Loss of a batch of pairs (indices into `set.pairs`) and its gradient.
/// Under [`Objective::ClassifierOnly`] the similarity loss is left out and
/// reported as 0.
pub fn batch_loss_and_grad(
    model: &MlnnModel,
    set: &PairSet,
    batch: &[usize],
    objective: Objective,
) -> Result<(LossValues, MlnnModel)> {
    if batch.is_empty() {
        return Err(Error::Empty("batch"));
    }
    let fwd = forward_batch(model, set, batch, objective);
    let n = batch.len() as f64;
    let d = model.event_dim();
    let mut grad = model.zeroed();
    let mut d_enc = vec![vec![0.0; d]; fwd.order.len()];
    let mut d_sn = vec![vec![0.0; model.sn.out_dim()]; fwd.order.len()];
    let (mut l1, mut l2) = (0.0, 0.0);

    for (&k, pf) in batch.iter().zip(&fwd.pairs) {
        let pair = set.pairs[k];
        let y = pair.label.y();
        let (sa, sb) = (fwd.slots[&pair.a], fwd.slots[&pair.b]);
        l1 += cross_entropy(pf.probs[1], y);
        let p_target = pf.probs[y];
        if p_target > PROB_CLAMP && p_target < 1.0 - PROB_CLAMP {
            let d_logits = (0..2)
                .map(|c| (pf.probs[c] - if c == y { 1.0 } else { 0.0 }) / n)
                .collect();
            let dx = model.cn.backward(&pf.cn_acts, d_logits, &mut grad.cn);
            for i in 0..d {
                d_enc[sa][i] += dx[i];
                d_enc[sb][i] += dx[d + i];
            }
        }
        if let Some(cos) = pf.cosine {
            l2 += similarity_loss(cos.value, y);
            let ds = similarity_loss_grad(cos.value, y);
            let ua = fwd.sn[sa].last().expect("sn output");
            let ub = fwd.sn[sb].last().expect("sn output");
            let (du, dv) = cosine_backward(ua, ub, cos, ds);
            for (acc, g) in d_sn[sa].iter_mut().zip(&du) {
                *acc += g;
            }
            for (acc, g) in d_sn[sb].iter_mut().zip(&dv) {
                *acc += g;
            }
        }
    }

    for (slot, &m) in fwd.order.iter().enumerate() {
        if objective == Objective::Joint {
            let back = model
                .sn
                .backward(&fwd.sn[slot], d_sn[slot].clone(), &mut grad.sn);
            for (acc, g) in d_enc[slot].iter_mut().zip(&back) {
                *acc += g;
            }
        }
        model.encoder.backward(
            &set.mentions[m],
            &fwd.enc[slot],
            &d_enc[slot],
            &mut grad.encoder,
        );
    }
    let l1 = l1 / n;
    Ok((LossValues::new(l1, l2), grad))
}

/// Result of a gradient check with clamp-boundary examples excluded.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaskedGradCheck {
    /// Check over the batch with masked examples removed.
    pub report: GradCheckReport,
    /// Batch positions whose probability or similarity sits at or near a clamp.
    pub masked: Vec<usize>,
    /// Check over the full batch, reported only when something was masked.
    pub full_batch: Option<GradCheckReport>,
}

fn near_clamp(pf: &PairForward, y: usize) -> bool {
    let p = pf.probs[y];
    let prob_edge = p <= 2.0 * PROB_CLAMP || p >= 1.0 - 2.0 * PROB_CLAMP;
    let sim_edge = pf.cosine.is_some_and(|c| {
        let m = crate::nn::loss::similarity_margin(y);
        (m - c.value).abs() <= 2.0 * SIMILARITY_EPS
    });
    prob_edge || sim_edge
}

pub fn gradient_check_mlnn(
    model: &MlnnModel,
    set: &PairSet,
    batch: &[usize],
    objective: Objective,
    step: f64,
) -> Result<MaskedGradCheck> {
    let fwd = forward_batch(model, set, batch, objective);
    let mut masked = Vec::new();
    let mut kept = Vec::new();
    for (pos, (&k, pf)) in batch.iter().zip(&fwd.pairs).enumerate() {
        if near_clamp(pf, set.pairs[k].label.y()) {
            masked.push(pos);
        } else {
            kept.push(k);
        }
    }
    let check = |b: &[usize]| -> Result<GradCheckReport> {
        if b.is_empty() {
            return Ok(GradCheckReport {
                max_relative_error: 0.0,
                worst: None,
                checked: 0,
            });
        }
        let (_, grad) = batch_loss_and_grad(model, set, b, objective)?;
        Ok(gradient_check(model, &grad, step, |m| {
            batch_loss_and_grad(m, set, b, objective)
                .map(|(l, _)| l.l_all)
                .unwrap_or(f64::NAN)
        }))
    };
    let report = check(&kept)?;
    let full_batch = if masked.is_empty() {
        None
    } else {
        Some(check(batch)?)
    };
    Ok(MaskedGradCheck {
        report,
        masked,
        full_batch,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MlnnEpoch {
    pub epoch: usize,
    pub train_loss: LossValues,
    pub dev_pair_accuracy: f64,
    pub dev_conll_f1: f64,
}

#[derive(Clone, Debug)]
pub struct TrainedMlnn {
    pub model: MlnnModel,
    pub best_epoch: usize,
    pub log: Vec<MlnnEpoch>,
}

/// Pair accuracy and CoNLL F1 on gold mentions of `dev`, clustering with `policy`.
pub fn evaluate_pairs_on(
    model: &MlnnModel,
    dev: &Corpus,
    vocab: &Vocab,
    features: &FeatureConfig,
    policy: &FilterPolicy,
) -> Result<(f64, f64)> {
    let mut correct = 0usize;
    let mut total = 0usize;
    let mut gold_sets = Vec::new();
    let mut pred_sets = Vec::new();
    for doc in &dev.documents {
        let decisions = predict_pairs(model, doc, &doc.gold_mentions, vocab, features)?;
        let chains = chain_index(doc);
        for d in &decisions {
            let same = matches!(
                (chains.get(d.a.as_str()), chains.get(d.b.as_str())),
                (Some(x), Some(y)) if x == y
            );
            correct += usize::from(same == (d.label == CorefLabel::Coref));
            total += 1;
        }
        let ids: Vec<String> = doc.gold_mentions.iter().map(|m| m.id.clone()).collect();
        pred_sets.push(build_chains(&doc.doc_id, &ids, &decisions, policy)?);
        gold_sets.push(ChainSet::new(&doc.doc_id, gold_clusters(doc))?);
    }
    let accuracy = if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    };
    let conll = if gold_sets.is_empty() {
        0.0
    } else {
        score_corpus(&gold_sets, &pred_sets)?.conll_f1
    };
    Ok((accuracy, conll))
}

/// Trains the pair model on gold-mention pairs of `train`. The kept weights are
/// those of the epoch with the best dev CoNLL F1 after clustering with the
/// mode's filter; with an empty dev set the last epoch is kept.
pub fn train_joint(
    train: &Corpus,
    dev: &Corpus,
    vocab: &Vocab,
    config: &MlnnConfig,
    mode: SystemMode,
    thresholds: FilterThresholds,
    seed: u64,
) -> Result<TrainedMlnn> {
    config.encoder.validate()?;
    let features = &config.encoder.features;
    let set = PairSet::from_corpus(train, vocab, features)?;
    if set.pairs.is_empty() {
        return Err(Error::Empty("training pairs"));
    }
    let objective = mode.objective();
    let policy = mode.filter_policy(thresholds);
    let mut model = MlnnModel::init(vocab, config, &mut init_rng(seed));
    let opt = &config.optimizer;
    let mut state = AdadeltaState::new(&model, opt.rho, opt.eps);
    let mut best: Option<(f64, usize, MlnnModel)> = None;
    let mut log = Vec::with_capacity(opt.epochs);
    for epoch in 0..opt.epochs {
        let mut rng = epoch_rng(seed, epoch);
        let order = epoch_order(&mut rng, set.pairs.len(), config.negative_keep, |i| {
            set.pairs[i].label == CorefLabel::NonCoref
        });
        let mut sums = (0.0, 0.0);
        let mut batches = 0usize;
        run_epoch(
            &mut model,
            &mut state,
            &order,
            opt.batch_size,
            |m, batch| {
                let (loss, grad) = batch_loss_and_grad(m, &set, batch, objective)?;
                if !loss.l_all.is_finite() {
                    return Err(Error::NonFinite {
                        path: format!("loss at epoch {epoch}"),
                    });
                }
                sums.0 += loss.l1;
                sums.1 += loss.l2;
                batches += 1;
                Ok((loss.l_all, grad))
            },
        )?;
        let nb = batches.max(1) as f64;
        let train_loss = LossValues::new(sums.0 / nb, sums.1 / nb);
        let (dev_pair_accuracy, dev_conll_f1) =
            evaluate_pairs_on(&model, dev, vocab, features, &policy)?;
        if !dev.is_empty() && best.as_ref().map_or(true, |(s, _, _)| dev_conll_f1 > *s) {
            best = Some((dev_conll_f1, epoch, model.clone()));
        }
        log.push(MlnnEpoch {
            epoch,
            train_loss,
            dev_pair_accuracy,
            dev_conll_f1,
        });
    }
    let last = opt.epochs.saturating_sub(1);
    let (_, best_epoch, model) = best.unwrap_or((0.0, last, model));
    Ok(TrainedMlnn {
        model,
        best_epoch,
        log,
    })
}
