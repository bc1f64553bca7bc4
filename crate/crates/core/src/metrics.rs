//! MUC, B³, CEAF_e and CoNLL F1.
//!
//! Each metric is computed as recall and precision fractions whose numerators
//! and denominators are summed over documents before dividing. A zero
//! denominator yields 0. Gold and predicted clusters are each scored over their
//! own mentions, so mentions present on one side only lower the score.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::chains::ChainSet;
use crate::error::{Error, Result};
use crate::hungarian::max_weight_assignment;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
}

impl MetricResult {
    pub fn new(recall: f64, precision: f64) -> Self {
        let f1 = if recall + precision == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self {
            recall,
            precision,
            f1,
        }
    }
}

/// Unreduced recall and precision fractions.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Counts {
    pub recall_num: f64,
    pub recall_den: f64,
    pub precision_num: f64,
    pub precision_den: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl Counts {
    pub fn result(&self) -> MetricResult {
        MetricResult::new(
            ratio(self.recall_num, self.recall_den),
            ratio(self.precision_num, self.precision_den),
        )
    }
}

impl std::ops::AddAssign for Counts {
    fn add_assign(&mut self, o: Self) {
        self.recall_num += o.recall_num;
        self.recall_den += o.recall_den;
        self.precision_num += o.precision_num;
        self.precision_den += o.precision_den;
    }
}

/// Cluster-overlap counts between the two sides of one document.
struct Overlap {
    key_sizes: Vec<usize>,
    response_sizes: Vec<usize>,
    /// (key cluster, response cluster) -> |K ∩ R|
    shared: BTreeMap<(usize, usize), usize>,
}

impl Overlap {
    fn new(key: &[Vec<String>], response: &[Vec<String>]) -> Self {
        let owner: HashMap<&str, usize> = response
            .iter()
            .enumerate()
            .flat_map(|(j, c)| c.iter().map(move |m| (m.as_str(), j)))
            .collect();
        let mut shared = BTreeMap::new();
        for (i, c) in key.iter().enumerate() {
            for m in c {
                if let Some(&j) = owner.get(m.as_str()) {
                    *shared.entry((i, j)).or_insert(0) += 1;
                }
            }
        }
        Self {
            key_sizes: key.iter().map(Vec::len).collect(),
            response_sizes: response.iter().map(Vec::len).collect(),
            shared,
        }
    }

    fn transposed(&self) -> Self {
        Self {
            key_sizes: self.response_sizes.clone(),
            response_sizes: self.key_sizes.clone(),
            shared: self
                .shared
                .iter()
                .map(|(&(i, j), &n)| ((j, i), n))
                .collect(),
        }
    }
}

/// MUC recall numerator and denominator of `key` against `response`.
fn muc_side(o: &Overlap) -> (f64, f64) {
    let mut parts = vec![0usize; o.key_sizes.len()];
    let mut covered = vec![0usize; o.key_sizes.len()];
    for (&(i, _), &n) in &o.shared {
        parts[i] += 1;
        covered[i] += n;
    }
    let mut num = 0usize;
    let mut den = 0usize;
    for (i, &size) in o.key_sizes.iter().enumerate() {
        // Key mentions missing from the response each count as their own part.
        let p = parts[i] + (size - covered[i]);
        num += size - p;
        den += size - 1;
    }
    (num as f64, den as f64)
}

fn b_cubed_side(o: &Overlap) -> (f64, f64) {
    let num = o
        .shared
        .iter()
        .map(|(&(i, _), &n)| (n * n) as f64 / o.key_sizes[i] as f64)
        .sum();
    (num, o.key_sizes.iter().sum::<usize>() as f64)
}

fn phi4(shared: usize, k: usize, r: usize) -> f64 {
    2.0 * shared as f64 / (k + r) as f64
}

fn ceaf_e_total(o: &Overlap) -> f64 {
    if o.key_sizes.is_empty() || o.response_sizes.is_empty() {
        return 0.0;
    }
    let mut w = vec![vec![0.0; o.response_sizes.len()]; o.key_sizes.len()];
    for (&(i, j), &n) in &o.shared {
        w[i][j] = phi4(n, o.key_sizes[i], o.response_sizes[j]);
    }
    max_weight_assignment(&w).1
}

fn side_counts(recall: (f64, f64), precision: (f64, f64)) -> Counts {
    Counts {
        recall_num: recall.0,
        recall_den: recall.1,
        precision_num: precision.0,
        precision_den: precision.1,
    }
}

pub fn muc_counts(gold: &ChainSet, pred: &ChainSet) -> Counts {
    let o = Overlap::new(&gold.clusters, &pred.clusters);
    side_counts(muc_side(&o), muc_side(&o.transposed()))
}

pub fn b_cubed_counts(gold: &ChainSet, pred: &ChainSet) -> Counts {
    let o = Overlap::new(&gold.clusters, &pred.clusters);
    side_counts(b_cubed_side(&o), b_cubed_side(&o.transposed()))
}

pub fn ceaf_e_counts(gold: &ChainSet, pred: &ChainSet) -> Counts {
    let o = Overlap::new(&gold.clusters, &pred.clusters);
    let phi = ceaf_e_total(&o);
    side_counts(
        (phi, gold.clusters.len() as f64),
        (phi, pred.clusters.len() as f64),
    )
}

pub fn muc(gold: &ChainSet, pred: &ChainSet) -> MetricResult {
    muc_counts(gold, pred).result()
}

pub fn b_cubed(gold: &ChainSet, pred: &ChainSet) -> MetricResult {
    b_cubed_counts(gold, pred).result()
}

pub fn ceaf_e(gold: &ChainSet, pred: &ChainSet) -> MetricResult {
    ceaf_e_counts(gold, pred).result()
}

pub fn conll_f1(muc_f1: f64, b_cubed_f1: f64, ceaf_e_f1: f64) -> f64 {
    (muc_f1 + b_cubed_f1 + ceaf_e_f1) / 3.0
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorefScores {
    pub muc: MetricResult,
    pub b_cubed: MetricResult,
    pub ceaf_e: MetricResult,
    pub conll_f1: f64,
}

/// Micro-aggregated scores. Both lists must cover the same documents; order
/// does not matter.
pub fn score_corpus(gold: &[ChainSet], pred: &[ChainSet]) -> Result<CorefScores> {
    let mut by_id: BTreeMap<&str, &ChainSet> = BTreeMap::new();
    for p in pred {
        if by_id.insert(p.doc_id.as_str(), p).is_some() {
            return Err(Error::DocumentMismatch(format!(
                "document {:?} predicted twice",
                p.doc_id
            )));
        }
    }
    if gold.len() != by_id.len() {
        return Err(Error::DocumentMismatch(format!(
            "{} gold documents but {} predicted",
            gold.len(),
            by_id.len()
        )));
    }
    let (mut m, mut b, mut c) = (Counts::default(), Counts::default(), Counts::default());
    for g in gold {
        let p = by_id.get(g.doc_id.as_str()).ok_or_else(|| {
            Error::DocumentMismatch(format!("no prediction for document {:?}", g.doc_id))
        })?;
        m += muc_counts(g, p);
        b += b_cubed_counts(g, p);
        c += ceaf_e_counts(g, p);
    }
    let (muc, b_cubed, ceaf_e) = (m.result(), b.result(), c.result());
    Ok(CorefScores {
        muc,
        b_cubed,
        ceaf_e,
        conll_f1: conll_f1(muc.f1, b_cubed.f1, ceaf_e.f1),
    })
}

/// Fixed-layout table in percentages with one decimal.
pub fn format_table(rows: &[(&str, CorefScores)]) -> String {
    let width = rows
        .iter()
        .map(|(n, _)| n.chars().count())
        .max()
        .unwrap_or(0)
        .max(6);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:width$} | {:^20} | {:^20} | {:^20} | {:>5}",
        "", "B3", "MUC", "CEAF_e", "CoNLL"
    );
    let _ = writeln!(
        out,
        "{:width$} | {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6} | {:>5}",
        "system", "R", "P", "F1", "R", "P", "F1", "R", "P", "F1", "F1"
    );
    let pct = |x: f64| format!("{:.1}", 100.0 * x);
    for (name, s) in rows {
        let mut line = format!("{name:width$} |");
        for r in [s.b_cubed, s.muc, s.ceaf_e] {
            let _ = write!(
                line,
                " {:>6} {:>6} {:>6} |",
                pct(r.recall),
                pct(r.precision),
                pct(r.f1)
            );
        }
        let _ = writeln!(out, "{line} {:>5}", pct(s.conll_f1));
    }
    out
}
