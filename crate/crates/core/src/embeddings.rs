//! Frozen word-embedding lookup: word2vec text files or seeded random vectors.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::corpus::Document;
use crate::error::{Error, Result};

pub const DEFAULT_DIM: usize = 50;
/// Half-width of the uniform distribution used by [`EmbeddingTable::random`].
pub const RANDOM_RANGE: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableSource {
    Loaded,
    Random { seed: u64 },
}

/// Token to vector map. Immutable once built.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    entries: HashMap<String, Vec<f64>>,
    source: TableSource,
}

/// A document as the network sees it: a `D x N` matrix whose column `t`
/// is the embedding of `tokens[t]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedDoc {
    pub matrix: Array2<f64>,
    pub tokens: Vec<String>,
    pub label_index: usize,
    pub id: String,
}

impl EmbeddedDoc {
    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.matrix.ncols() == 0
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let bad = || Error::Format { line: 1, message: format!("expected \"<count> <dim>\", got {line:?}") };
    let mut parts = line.split_whitespace();
    let count = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
    let dim: usize = parts.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?;
    if parts.next().is_some() || dim == 0 {
        return Err(bad());
    }
    Ok((count, dim))
}

impl EmbeddingTable {
    /// Parses the word2vec text format: a `V D` header, then `token v1 .. vD`
    /// per line. Later duplicates overwrite earlier ones.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (count, dim) = match lines.next() {
            Some((_, header)) => parse_header(header)?,
            None => return Err(Error::Format { line: 1, message: "empty file".into() }),
        };

        let mut entries = HashMap::with_capacity(count);
        let mut rows = 0;
        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let token = parts.next().unwrap_or_default();
            let vector = parts
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|_| Error::Format { line: line_no, message: format!("{v:?} is not a number") })
                })
                .collect::<Result<Vec<f64>>>()?;
            if vector.len() != dim {
                return Err(Error::Format {
                    line: line_no,
                    message: format!("expected {dim} values, found {}", vector.len()),
                });
            }
            if entries.insert(token.to_owned(), vector).is_some() {
                log::warn!("embedding line {line_no}: duplicate token {token:?}, keeping the later vector");
            }
            rows += 1;
        }
        if rows != count {
            log::warn!("embedding header announces {count} vectors, file has {rows}");
        }
        Ok(EmbeddingTable { dim, entries, source: TableSource::Loaded })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    /// Builds a random table over `vocabulary`. Each vector depends only on
    /// `(seed, token)`, never on the other tokens or their order.
    pub fn random<'a, I>(vocabulary: I, dim: usize, seed: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be at least 1".into()));
        }
        let entries = vocabulary.into_iter().map(|token| (token.to_owned(), random_vector(token, dim, seed))).collect();
        Ok(EmbeddingTable { dim, entries, source: TableSource::Random { seed } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn source(&self) -> &TableSource {
        &self.source
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.entries.get(token).map(Vec::as_slice)
    }

    /// SHA-256 over the sorted entries; identifies the table in model files.
    pub fn fingerprint(&self) -> String {
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        let mut hasher = Sha256::new();
        hasher.update((self.dim as u64).to_le_bytes());
        for key in keys {
            hasher.update((key.len() as u64).to_le_bytes());
            hasher.update(key.as_bytes());
            for v in &self.entries[key] {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hex_string(&hasher.finalize())
    }

    /// Maps a document to its embedding matrix. Out-of-vocabulary tokens are
    /// dropped; the zero column is reserved for deleted words.
    pub fn encode(&self, doc: &Document) -> Result<EmbeddedDoc> {
        let (tokens, vectors): (Vec<String>, Vec<&[f64]>) =
            doc.tokens.iter().filter_map(|t| self.get(t).map(|v| (t.clone(), v))).unzip();
        if tokens.len() < 2 {
            return Err(Error::TooShort { id: doc.id.clone(), found: tokens.len() });
        }
        let matrix = Array2::from_shape_fn((self.dim, tokens.len()), |(i, t)| vectors[t][i]);
        Ok(EmbeddedDoc { matrix, tokens, label_index: doc.label_index, id: doc.id.clone() })
    }
}

fn random_vector(token: &str, dim: usize, seed: u64) -> Vec<f64> {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(token.as_bytes());
    let mut key = [0u8; 32];
    key.copy_from_slice(&hasher.finalize());
    let mut rng = ChaCha8Rng::from_seed(key);
    (0..dim).map(|_| rng.gen_range(-RANDOM_RANGE..=RANDOM_RANGE)).collect()
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
