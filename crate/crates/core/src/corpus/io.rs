use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Chain, Corpus, Document, Mention, Token};
use crate::artifact::{read_jsonl_from, write_jsonl_to};
use crate::error::{Error, Result};

pub(crate) const CORPUS_STAGE: &str = "corpus";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenRecord {
    w: String,
    p: String,
    l: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MentionRecord {
    id: String,
    sent: usize,
    start: usize,
    end: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocumentRecord {
    doc_id: String,
    topic: u32,
    sentences: Vec<Vec<TokenRecord>>,
    mentions: Vec<MentionRecord>,
    chains: Vec<Vec<String>>,
}

impl From<DocumentRecord> for Document {
    fn from(r: DocumentRecord) -> Self {
        Document {
            doc_id: r.doc_id,
            topic_id: r.topic,
            sentences: r
                .sentences
                .into_iter()
                .enumerate()
                .map(|(s, toks)| {
                    toks.into_iter()
                        .enumerate()
                        .map(|(t, tok)| Token {
                            surface: tok.w,
                            pos: tok.p,
                            lemma: tok.l,
                            sentence_index: s,
                            token_index: t,
                        })
                        .collect()
                })
                .collect(),
            gold_mentions: r
                .mentions
                .into_iter()
                .map(|m| Mention::new(m.id, m.sent, m.start, m.end))
                .collect(),
            gold_chains: r
                .chains
                .into_iter()
                .enumerate()
                .map(|(i, ids)| Chain {
                    chain_id: format!("c{i}"),
                    mention_ids: ids,
                })
                .collect(),
        }
    }
}

impl From<&Document> for DocumentRecord {
    fn from(d: &Document) -> Self {
        DocumentRecord {
            doc_id: d.doc_id.clone(),
            topic: d.topic_id,
            sentences: d
                .sentences
                .iter()
                .map(|s| {
                    s.iter()
                        .map(|t| TokenRecord {
                            w: t.surface.clone(),
                            p: t.pos.clone(),
                            l: t.lemma.clone(),
                        })
                        .collect()
                })
                .collect(),
            mentions: d
                .gold_mentions
                .iter()
                .map(|m| MentionRecord {
                    id: m.id.clone(),
                    sent: m.sentence,
                    start: m.start,
                    end: m.end,
                })
                .collect(),
            chains: d
                .gold_chains
                .iter()
                .map(|c| c.mention_ids.clone())
                .collect(),
        }
    }
}

/// Loads and validates a JSONL corpus file.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file), path)
}

/// Reads a corpus from any buffered reader; `path` is used for diagnostics.
pub fn read_corpus<R: BufRead>(reader: R, path: &Path) -> Result<Corpus> {
    let parsed = read_jsonl_from::<DocumentRecord, _>(reader, path)?;
    let mut seen = HashSet::new();
    let mut documents = Vec::with_capacity(parsed.records.len());
    for (line, record) in parsed.records {
        let doc = Document::from(record);
        doc.validate().map_err(|e| match e {
            Error::Invariant { doc_id, message } => Error::Parse {
                path: path.to_owned(),
                line,
                message: format!("document {doc_id}: {message}"),
            },
            other => other,
        })?;
        if !seen.insert(doc.doc_id.clone()) {
            return Err(Error::DuplicateDocument(doc.doc_id));
        }
        documents.push(doc);
    }
    Ok(Corpus { documents })
}

pub fn write_corpus_to<W: Write>(out: W, corpus: &Corpus) -> Result<()> {
    write_jsonl_to(
        out,
        CORPUS_STAGE,
        corpus.documents.iter().map(DocumentRecord::from),
    )
}

pub fn write_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    write_corpus_to(&mut out, corpus)?;
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<Corpus> {
        read_corpus(text.as_bytes(), Path::new("mem.jsonl"))
    }

    const MINIMAL: &str = r#"{"doc_id": "d1", "topic": 1, "sentences": [[{"w": "Fire", "p": "NN", "l": "fire"}, {"w": "spread", "p": "VBD", "l": "spread"}, {"w": "fast", "p": "RB", "l": "fast"}]], "mentions": [{"id": "m1", "sent": 0, "start": 0, "end": 0}], "chains": [["m1"]]}"#;

    #[test]
    fn loads_minimal_document() {
        let c = read(MINIMAL).unwrap();
        assert_eq!(c.len(), 1);
        let d = &c.documents[0];
        assert_eq!(d.sentences[0].len(), 3);
        assert_eq!(d.gold_mentions[0].head, 0);
        let s = super::super::corpus_stats(&c);
        assert_eq!(
            (s.documents, s.sentences, s.mentions, s.chains),
            (1, 1, 1, 1)
        );
        assert_eq!(s.mean_chain_length, 1.0);
    }

    #[test]
    fn rejects_reversed_span_with_line_number() {
        let bad = MINIMAL.replace(r#""start": 0, "end": 0"#, r#""start": 2, "end": 1"#);
        let text = format!("\n{bad}");
        match read(&text).unwrap_err() {
            Error::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("span start > end"), "{message}");
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn rejects_duplicate_doc_id() {
        let text = format!("{MINIMAL}\n{MINIMAL}\n");
        assert!(matches!(read(&text), Err(Error::DuplicateDocument(_))));
    }

    #[test]
    fn rejects_unknown_fields() {
        let bad = MINIMAL.replace(r#""topic": 1"#, r#""topic": 1, "extra": true"#);
        assert!(matches!(read(&bad), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn malformed_json_reports_line() {
        let text = format!("{MINIMAL}\n{{not json\n");
        assert!(matches!(read(&text), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn written_corpus_reads_back_equal() {
        let c = read(MINIMAL).unwrap();
        let mut buf = Vec::new();
        write_corpus_to(&mut buf, &c).unwrap();
        assert_eq!(read(std::str::from_utf8(&buf).unwrap()).unwrap(), c);
    }
}
