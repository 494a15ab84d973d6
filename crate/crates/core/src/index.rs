//! Corpus ingestion, chunking, embedding, and top-k cosine retrieval.
//!
//! Retrieval is an exhaustive flat scan: per-question corpora are small and
//! the similarity-threshold semantics of the terminator depend on exact
//! scores. The scan sits behind `retrieve` so an approximate index could be
//! swapped in later without touching callers.

use std::io::{BufRead, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::providers::{Embedder, ProviderError};
use crate::types::{sort_hits, Passage, RetrievalHit};

/// Versioned magic header for persisted index files.
pub const INDEX_MAGIC: &str = "LAGIDX1";

/// One source document before chunking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusDocument {
    pub id: String,
    pub title: String,
    pub text: String,
}

/// Whitespace-token window settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChunkConfig {
    pub chunk_size: usize,
    pub overlap: usize,
}

impl Default for ChunkConfig {
    fn default() -> Self {
        Self {
            chunk_size: 100,
            overlap: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexStats {
    pub documents: usize,
    pub passages: usize,
    /// Unix millis at ingest or load; never persisted, so re-running an
    /// identical ingest yields a byte-identical index file.
    #[serde(skip)]
    pub ingested_at_ms: Option<u64>,
}

/// Immutable corpus-wide similarity index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorIndex {
    pub dimension: usize,
    pub entries: Vec<Passage>,
    pub stats: IndexStats,
}

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("chunk_size ({chunk_size}) must exceed overlap ({overlap}) and be positive")]
    BadChunking { chunk_size: usize, overlap: usize },

    #[error("duplicate document id {id:?}")]
    DuplicateDocId { id: String },

    #[error("document {id:?} has no text and no title")]
    EmptyDocument { id: String },

    #[error("embedding document {doc_id:?}: {source}")]
    Embed {
        doc_id: String,
        source: ProviderError,
    },

    #[error("vector dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cosine of a zero vector is undefined")]
    ZeroVector,

    #[error("corpus line {line}: {detail}")]
    Parse { line: usize, detail: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("bad index file: {detail}")]
    BadFormat { detail: String },
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

/// Split into whitespace-token windows of at most `chunk_size` tokens whose
/// starts advance by `chunk_size - overlap`.
fn chunk_tokens<'a>(tokens: &[&'a str], cfg: ChunkConfig) -> Vec<Vec<&'a str>> {
    let step = cfg.chunk_size - cfg.overlap;
    let mut chunks = Vec::new();
    let mut start = 0;
    while start < tokens.len() {
        let end = (start + cfg.chunk_size).min(tokens.len());
        chunks.push(tokens[start..end].to_vec());
        start += step;
    }
    if chunks.is_empty() {
        chunks.push(Vec::new());
    }
    chunks
}

/// Chunk, embed, and index a corpus. Passage ids are `"{doc_id}:{ordinal}"`,
/// and the document title is prepended to each chunk (first line) before
/// embedding.
pub fn ingest(
    docs: &[CorpusDocument],
    cfg: ChunkConfig,
    embedder: &dyn Embedder,
) -> Result<VectorIndex, IndexError> {
    if docs.is_empty() {
        return Err(IndexError::EmptyCorpus);
    }
    if cfg.chunk_size == 0 || cfg.chunk_size <= cfg.overlap {
        return Err(IndexError::BadChunking {
            chunk_size: cfg.chunk_size,
            overlap: cfg.overlap,
        });
    }

    let mut seen_ids = std::collections::HashSet::new();
    let mut entries: Vec<Passage> = Vec::new();
    let mut dimension: Option<usize> = None;

    for doc in docs {
        if !seen_ids.insert(doc.id.as_str()) {
            return Err(IndexError::DuplicateDocId { id: doc.id.clone() });
        }
        let title = doc.title.split_whitespace().collect::<Vec<_>>().join(" ");
        let tokens: Vec<&str> = doc.text.split_whitespace().collect();
        if tokens.is_empty() && title.is_empty() {
            return Err(IndexError::EmptyDocument { id: doc.id.clone() });
        }
        for (ordinal, chunk) in chunk_tokens(&tokens, cfg).into_iter().enumerate() {
            let body = chunk.join(" ");
            let text = if body.is_empty() {
                title.clone()
            } else {
                format!("{title}\n{body}")
            };
            let embedding = embedder.embed(&text).map_err(|source| IndexError::Embed {
                doc_id: doc.id.clone(),
                source,
            })?;
            match dimension {
                None => dimension = Some(embedding.len()),
                Some(expected) if expected != embedding.len() => {
                    return Err(IndexError::DimensionMismatch {
                        expected,
                        got: embedding.len(),
                    });
                }
                Some(_) => {}
            }
            entries.push(Passage {
                id: format!("{}:{}", doc.id, ordinal),
                source_doc: doc.id.clone(),
                text,
                embedding,
            });
        }
    }

    Ok(VectorIndex {
        dimension: dimension.unwrap_or(0),
        stats: IndexStats {
            documents: docs.len(),
            passages: entries.len(),
            ingested_at_ms: Some(now_ms()),
        },
        entries,
    })
}

/// Standard cosine similarity. Symmetric, 1.0 for a nonzero vector against
/// itself (within 1e-9), errors on zero vectors or unequal dimensions.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, IndexError> {
    if u.len() != v.len() {
        return Err(IndexError::DimensionMismatch {
            expected: u.len(),
            got: v.len(),
        });
    }
    let mut dot = 0.0;
    let mut nu = 0.0;
    let mut nv = 0.0;
    for (a, b) in u.iter().zip(v.iter()) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(IndexError::ZeroVector);
    }
    Ok((dot / (nu.sqrt() * nv.sqrt())).clamp(-1.0, 1.0))
}

/// The k most similar passages, sorted by score descending with ties broken
/// by passage id ascending. Returns fewer than k only when the index holds
/// fewer entries.
pub fn retrieve(
    index: &VectorIndex,
    query: &[f64],
    k: usize,
) -> Result<Vec<RetrievalHit>, IndexError> {
    if query.len() != index.dimension {
        return Err(IndexError::DimensionMismatch {
            expected: index.dimension,
            got: query.len(),
        });
    }
    let mut hits: Vec<RetrievalHit> = Vec::with_capacity(index.entries.len());
    for passage in &index.entries {
        let score = cosine(query, &passage.embedding)?;
        hits.push(RetrievalHit {
            passage: passage.clone(),
            score,
        });
    }
    sort_hits(&mut hits);
    hits.truncate(k);
    Ok(hits)
}

/// Parse a JSON Lines corpus, one document per line. Blank lines are skipped;
/// parse errors carry the 1-based line number.
pub fn load_corpus_jsonl(path: &Path) -> Result<Vec<CorpusDocument>, IndexError> {
    let file = std::fs::File::open(path).map_err(|source| IndexError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let reader = std::io::BufReader::new(file);
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: CorpusDocument =
            serde_json::from_str(&line).map_err(|e| IndexError::Parse {
                line: i + 1,
                detail: e.to_string(),
            })?;
        docs.push(doc);
    }
    Ok(docs)
}

#[derive(Serialize)]
struct PersistTo<'a> {
    dimension: usize,
    passages: &'a [Passage],
}

#[derive(Deserialize)]
struct PersistFrom {
    dimension: usize,
    passages: Vec<Passage>,
}

impl VectorIndex {
    /// Write `LAGIDX1` magic line + compact JSON payload. Deterministic for
    /// identical contents.
    pub fn save(&self, path: &Path) -> Result<(), IndexError> {
        let payload = PersistTo {
            dimension: self.dimension,
            passages: &self.entries,
        };
        let body = serde_json::to_string(&payload).map_err(|e| IndexError::BadFormat {
            detail: format!("serialize: {e}"),
        })?;
        let mut file = std::fs::File::create(path).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        file.write_all(INDEX_MAGIC.as_bytes())
            .and_then(|_| file.write_all(b"\n"))
            .and_then(|_| file.write_all(body.as_bytes()))
            .map_err(|source| IndexError::Io {
                path: path.display().to_string(),
                source,
            })
    }

    pub fn load(path: &Path) -> Result<Self, IndexError> {
        let raw = std::fs::read_to_string(path).map_err(|source| IndexError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let (magic, body) = raw.split_once('\n').ok_or_else(|| IndexError::BadFormat {
            detail: "missing header line".to_string(),
        })?;
        if magic.trim_end() != INDEX_MAGIC {
            return Err(IndexError::BadFormat {
                detail: format!("unsupported header {magic:?}, expected {INDEX_MAGIC:?}"),
            });
        }
        let payload: PersistFrom = serde_json::from_str(body).map_err(|e| {
            IndexError::BadFormat {
                detail: format!("payload parse error: {e}"),
            }
        })?;
        let entries: Vec<Passage> = payload.passages;
        for passage in &entries {
            if passage.embedding.len() != payload.dimension {
                return Err(IndexError::DimensionMismatch {
                    expected: payload.dimension,
                    got: passage.embedding.len(),
                });
            }
        }
        let documents = entries
            .iter()
            .map(|p| p.source_doc.as_str())
            .collect::<std::collections::HashSet<_>>()
            .len();
        Ok(Self {
            dimension: payload.dimension,
            stats: IndexStats {
                documents,
                passages: entries.len(),
                ingested_at_ms: Some(now_ms()),
            },
            entries,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::providers::HashEmbedder;

    fn doc(id: &str, title: &str, text: &str) -> CorpusDocument {
        CorpusDocument {
            id: id.into(),
            title: title.into(),
            text: text.into(),
        }
    }

    fn numbered_tokens(n: usize) -> String {
        (0..n).map(|i| format!("t{i}")).collect::<Vec<_>>().join(" ")
    }

    #[test]
    fn short_document_stays_one_passage() {
        let embedder = HashEmbedder::new(32, 1);
        let docs = vec![doc("d1", "Short", &numbered_tokens(10))];
        let index = ingest(&docs, ChunkConfig { chunk_size: 100, overlap: 20 }, &embedder).unwrap();
        assert_eq!(index.entries.len(), 1);
        assert_eq!(index.entries[0].id, "d1:0");
    }

    #[test]
    fn sliding_window_starts_match_hand_computation() {
        // 250 tokens, size 100, overlap 20 -> starts at 0, 80, 160, 240.
        let embedder = HashEmbedder::new(32, 1);
        let docs = vec![doc("d1", "Long", &numbered_tokens(250))];
        let index = ingest(&docs, ChunkConfig { chunk_size: 100, overlap: 20 }, &embedder).unwrap();
        assert_eq!(index.entries.len(), 4);
        let first_tokens: Vec<&str> = index
            .entries
            .iter()
            .map(|p| p.text.lines().nth(1).unwrap().split_whitespace().next().unwrap())
            .collect();
        assert_eq!(first_tokens, vec!["t0", "t80", "t160", "t240"]);
        // Last window runs to the end of the document.
        assert!(index.entries[3].text.ends_with("t249"));
    }

    #[test]
    fn case_study_corpus_yields_four_distinct_passages() {
        let embedder = HashEmbedder::default();
        let docs = vec![
            doc("vilaiyaadu-mankatha", "Vilaiyaadu Mankatha", "soundtrack album marketed by Sony Music Entertainment"),
            doc("sony-music", "Sony Music", "second largest recorded music company after Universal Music Group"),
            doc("right-stuff-records", "The Right Stuff Records", "reissue label owned by Universal Music Group based in Santa Monica"),
            doc("santa-monica", "Santa Monica", "coastal city reached by the Portola expedition on August 3, 1769"),
        ];
        let index = ingest(&docs, ChunkConfig::default(), &embedder).unwrap();
        assert_eq!(index.entries.len(), 4);
        let ids: std::collections::HashSet<&str> =
            index.entries.iter().map(|p| p.id.as_str()).collect();
        assert_eq!(ids.len(), 4);
    }

    #[test]
    fn title_line_is_prepended() {
        let embedder = HashEmbedder::new(32, 1);
        let docs = vec![doc("d1", "A Title", "body text here")];
        let index = ingest(&docs, ChunkConfig::default(), &embedder).unwrap();
        assert_eq!(index.entries[0].text, "A Title\nbody text here");
        assert_eq!(index.entries[0].title(), "A Title");
    }

    #[test]
    fn ingest_rejects_bad_inputs() {
        let embedder = HashEmbedder::new(32, 1);
        assert!(matches!(
            ingest(&[], ChunkConfig::default(), &embedder),
            Err(IndexError::EmptyCorpus)
        ));
        let docs = vec![doc("d1", "T", "x"), doc("d1", "T", "y")];
        assert!(matches!(
            ingest(&docs, ChunkConfig::default(), &embedder),
            Err(IndexError::DuplicateDocId { .. })
        ));
        let docs = vec![doc("d1", "T", "x")];
        assert!(matches!(
            ingest(&docs, ChunkConfig { chunk_size: 10, overlap: 10 }, &embedder),
            Err(IndexError::BadChunking { .. })
        ));
    }

    #[test]
    fn cosine_matches_hand_values() {
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let c = cosine(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        // 32 / sqrt(14 * 77)
        assert!((c - 0.9746318461970762).abs() < 1e-12);
        let s = cosine(&[0.6, 0.8], &[0.6, 0.8]).unwrap();
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cosine_rejects_degenerate_inputs() {
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(IndexError::ZeroVector)
        ));
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(IndexError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn retrieve_returns_whole_corpus_when_k_exceeds_it() {
        let embedder = HashEmbedder::new(32, 1);
        let docs = vec![doc("a", "A", "one"), doc("b", "B", "two"), doc("c", "C", "three")];
        let index = ingest(&docs, ChunkConfig::default(), &embedder).unwrap();
        let query = embedder.embed("one").unwrap();
        let hits = retrieve(&index, &query, 5).unwrap();
        assert_eq!(hits.len(), 3);
    }

    #[test]
    fn self_retrieval_ranks_first_with_unit_score() {
        let embedder = HashEmbedder::default();
        let docs = vec![
            doc("a", "Alpha", "completely unrelated words live here"),
            doc("b", "Beta", "the target passage about bridges"),
        ];
        let index = ingest(&docs, ChunkConfig::default(), &embedder).unwrap();
        let target = &index.entries[1];
        let query = embedder.embed(&target.text).unwrap();
        let hits = retrieve(&index, &query, 2).unwrap();
        assert_eq!(hits[0].passage.id, target.id);
        assert!((hits[0].score - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ingest_is_deterministic() {
        let embedder = HashEmbedder::default();
        let docs = vec![doc("a", "A", &numbered_tokens(150)), doc("b", "B", "short doc")];
        let cfg = ChunkConfig { chunk_size: 60, overlap: 10 };
        let one = ingest(&docs, cfg, &embedder).unwrap();
        let two = ingest(&docs, cfg, &embedder).unwrap();
        assert_eq!(one.entries, two.entries);
        assert_eq!(one.dimension, two.dimension);
    }

    #[test]
    fn persistence_round_trips_and_checks_magic() {
        let embedder = HashEmbedder::new(16, 3);
        let docs = vec![doc("a", "A", "alpha beta"), doc("b", "B", "gamma delta")];
        let index = ingest(&docs, ChunkConfig::default(), &embedder).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("test.lagidx");
        index.save(&path).unwrap();

        let raw = std::fs::read_to_string(&path).unwrap();
        assert!(raw.starts_with("LAGIDX1\n"));

        let loaded = VectorIndex::load(&path).unwrap();
        assert_eq!(loaded.dimension, index.dimension);
        assert_eq!(loaded.entries, index.entries);

        std::fs::write(&path, "NOTMAGIC\n{}").unwrap();
        assert!(matches!(
            VectorIndex::load(&path),
            Err(IndexError::BadFormat { .. })
        ));
    }

    #[test]
    fn corpus_loader_reports_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(
            &path,
            "{\"id\":\"a\",\"title\":\"A\",\"text\":\"x\"}\n\nnot json\n",
        )
        .unwrap();
        match load_corpus_jsonl(&path) {
            Err(IndexError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected parse error with line number, got {other:?}"),
        }
    }
}
