//! JSON checkpoints. Every float is written with 17 significant digits so a
//! reload reproduces the exact doubles.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DenseLayer, EmbeddingTable, Matrix};
use crate::error::{Error, Result};
use crate::features::Vocab;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerRecord {
    pub w: Vec<Vec<f64>>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: serde_json::Value,
    pub vocab: Vocab,
    pub seed: u64,
    pub tables: BTreeMap<String, Vec<Vec<f64>>>,
    pub layers: BTreeMap<String, LayerRecord>,
}

struct FullPrecision;

impl serde_json::ser::Formatter for FullPrecision {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes any value with 17-significant-digit floats.
pub fn to_writer_full_precision<W: Write, T: Serialize>(writer: W, value: &T) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(writer, FullPrecision);
    value.serialize(&mut ser)?;
    Ok(())
}

impl Checkpoint {
    pub fn new(config: serde_json::Value, vocab: Vocab, seed: u64) -> Self {
        Self {
            format_version: CHECKPOINT_VERSION,
            config,
            vocab,
            seed,
            tables: BTreeMap::new(),
            layers: BTreeMap::new(),
        }
    }

    pub fn put_table(&mut self, name: &str, table: &EmbeddingTable) {
        self.tables.insert(name.to_owned(), table.weights.to_rows());
    }

    pub fn put_layer(&mut self, name: &str, layer: &DenseLayer) {
        self.layers.insert(
            name.to_owned(),
            LayerRecord {
                w: layer.weights.to_rows(),
                b: layer.bias.clone(),
            },
        );
    }

    pub fn table(&self, name: &str, trainable: bool) -> Result<EmbeddingTable> {
        let rows = self
            .tables
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing table {name:?}")))?;
        Ok(EmbeddingTable {
            weights: Matrix::from_rows(rows)?,
            trainable,
        })
    }

    pub fn layer(&self, name: &str, activation: super::Activation) -> Result<DenseLayer> {
        let rec = self
            .layers
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing layer {name:?}")))?;
        let weights = Matrix::from_rows(&rec.w)?;
        if rec.b.len() != weights.cols() {
            return Err(Error::Checkpoint(format!(
                "layer {name:?}: bias has {} entries for {} outputs",
                rec.b.len(),
                weights.cols()
            )));
        }
        Ok(DenseLayer {
            weights,
            bias: rec.b.clone(),
            activation,
        })
    }

    fn check_finite(&self) -> Result<()> {
        for (name, rows) in &self.tables {
            if rows.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    path: format!("tables.{name}"),
                });
            }
        }
        for (name, l) in &self.layers {
            if l.w.iter().flatten().chain(&l.b).any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    path: format!("layers.{name}"),
                });
            }
        }
        Ok(())
    }

    pub fn to_writer<W: Write>(&self, writer: W) -> Result<()> {
        self.check_finite()?;
        to_writer_full_precision(writer, self)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.to_writer(&mut buf)?;
        Ok(buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        self.to_writer(&mut out)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_reader(BufReader::new(file))?;
        if ckpt.format_version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {}",
                ckpt.format_version
            )));
        }
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Lexicon;
    use proptest::prelude::*;

    fn vocab() -> Vocab {
        Vocab {
            words: Lexicon::from_entries(vec!["a".into()]),
            pos: Lexicon::from_entries(vec![]),
            lemmas: Lexicon::from_entries(vec![]),
        }
    }

    #[test]
    fn seventeen_significant_digits() {
        let mut ck = Checkpoint::new(serde_json::json!({}), vocab(), 3);
        ck.tables
            .insert("t".into(), vec![vec![0.1, -2.5e-300, 0.0]]);
        let text = String::from_utf8(ck.to_bytes().unwrap()).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("-2.5000000000000000e-300"), "{text}");
    }

    #[test]
    fn non_finite_values_are_refused() {
        let mut ck = Checkpoint::new(serde_json::json!({}), vocab(), 3);
        ck.tables.insert("t".into(), vec![vec![f64::NAN]]);
        assert!(matches!(ck.to_bytes(), Err(Error::NonFinite { .. })));
    }

    proptest! {
        #[test]
        fn doubles_round_trip_exactly(values in prop::collection::vec(any::<f64>().prop_filter("finite", |x| x.is_finite()), 1..16)) {
            let mut ck = Checkpoint::new(serde_json::json!({"x": 1}), vocab(), 9);
            ck.layers.insert("l".into(), LayerRecord { w: vec![values.clone()], b: values.clone() });
            let bytes = ck.to_bytes().unwrap();
            let back: Checkpoint = serde_json::from_slice(&bytes).unwrap();
            for (a, b) in back.layers["l"].b.iter().zip(&values) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(back, ck);
        }
    }
}
