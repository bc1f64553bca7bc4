//! Line-oriented JSON artifacts shared by every pipeline stage.
//!
//! Stage outputs start with a header line naming the format version and the
//! producing stage. Readers accept files with or without the header so that
//! hand-written inputs stay valid.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactHeader {
    pub format_version: u32,
    pub stage: String,
}

impl ArtifactHeader {
    pub fn new(stage: &str) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            stage: stage.to_owned(),
        }
    }
}

/// Parsed JSONL file: optional header plus records with their 1-based line numbers.
pub struct JsonlFile<T> {
    pub header: Option<ArtifactHeader>,
    pub records: Vec<(usize, T)>,
}

fn looks_like_header(line: &str) -> bool {
    serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(line)
        .map(|m| m.contains_key("format_version"))
        .unwrap_or(false)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<JsonlFile<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl_from(BufReader::new(file), path)
}

pub fn read_jsonl_from<T: DeserializeOwned, R: BufRead>(
    reader: R,
    path: &Path,
) -> Result<JsonlFile<T>> {
    let mut header = None;
    let mut records = Vec::new();
    let mut seen_content = false;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if !seen_content && looks_like_header(trimmed) {
            seen_content = true;
            let h: ArtifactHeader = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
                path: path.to_owned(),
                line: line_no,
                message: format!("bad header: {e}"),
            })?;
            if h.format_version != FORMAT_VERSION {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: line_no,
                    message: format!("unsupported format_version {}", h.format_version),
                });
            }
            header = Some(h);
            continue;
        }
        seen_content = true;
        let record = serde_json::from_str(trimmed).map_err(|e| Error::Parse {
            path: path.to_owned(),
            line: line_no,
            message: e.to_string(),
        })?;
        records.push((line_no, record));
    }
    Ok(JsonlFile { header, records })
}

pub fn write_jsonl_to<T: Serialize, W: Write>(
    mut out: W,
    stage: &str,
    records: impl IntoIterator<Item = T>,
) -> Result<()> {
    serde_json::to_writer(&mut out, &ArtifactHeader::new(stage))?;
    out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    for record in records {
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn write_jsonl<T: Serialize>(
    path: &Path,
    stage: &str,
    records: impl IntoIterator<Item = T>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_jsonl_to(&mut out, stage, records)?;
    out.flush().map_err(|e| Error::io(path, e))
}
