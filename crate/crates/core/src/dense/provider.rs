use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::textkit::AnalysisChain;

/// A dense vector with finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    pub fn new(vector: Vec<f64>) -> Result<Self> {
        if vector.is_empty() {
            return Err(Error::invalid("embedding must have at least one dimension"));
        }
        if let Some(i) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("embedding component {i} is not finite")));
        }
        Ok(Embedding(vector))
    }

    pub fn zeros(dim: usize) -> Self {
        Embedding(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }
}

/// Maps text to fixed-dimension embeddings, deterministically.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding>;
}

/// Signed feature hashing of character trigrams.
///
/// Each lowercased token is padded with `#` on both sides; every character
/// 3-gram is hashed with 64-bit FNV-1a, added with sign `+1` (bit 63 clear)
/// or `-1` (bit 63 set) into bucket `hash % dim`, and the result is
/// L2-normalized. Text without tokens embeds to the zero vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashedNGram {
    dim: usize,
}

impl Default for HashedNGram {
    fn default() -> Self {
        HashedNGram { dim: 256 }
    }
}

impl HashedNGram {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(HashedNGram { dim })
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

impl EmbeddingProvider for HashedNGram {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        let mut v = vec![0.0; self.dim];
        let mut buf = String::new();
        for token in AnalysisChain::metric().analyze(text) {
            let padded: Vec<char> = std::iter::once('#')
                .chain(token.as_str().chars())
                .chain(std::iter::once('#'))
                .collect();
            for gram in padded.windows(3) {
                buf.clear();
                buf.extend(gram);
                let h = fnv1a64(buf.as_bytes());
                let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
                v[(h % self.dim as u64) as usize] += sign;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(Embedding(v))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct EmbeddingRecord {
    id: String,
    vector: Vec<f64>,
}

/// Reads `{"id": ..., "vector": [...]}` lines. Blank lines are skipped;
/// every vector must have the same length and ids must be unique.
pub fn read_embeddings_jsonl(path: impl AsRef<Path>) -> Result<Vec<(String, Embedding)>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut seen = HashMap::new();
    let mut dim = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: EmbeddingRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            column: e.column(),
            message: e.to_string(),
        })?;
        let schema = |message: String| Error::Schema {
            path: path.to_path_buf(),
            record: i,
            message,
        };
        let emb = Embedding::new(record.vector).map_err(|e| schema(e.to_string()))?;
        match dim {
            None => dim = Some(emb.dim()),
            Some(d) if d != emb.dim() => {
                return Err(schema(format!("vector has {} dims, expected {d}", emb.dim())))
            }
            _ => {}
        }
        if seen.insert(record.id.clone(), i).is_some() {
            return Err(schema(format!("duplicate id {:?}", record.id)));
        }
        out.push((record.id, emb));
    }
    if out.is_empty() {
        return Err(Error::invalid(format!("{} has no embeddings", path.display())));
    }
    Ok(out)
}

pub fn write_embeddings_jsonl<'a, I>(path: impl AsRef<Path>, entries: I) -> Result<()>
where
    I: IntoIterator<Item = (&'a str, &'a Embedding)>,
{
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for (id, emb) in entries {
        let line = serde_json::to_string(&EmbeddingRecord {
            id: id.to_string(),
            vector: emb.as_slice().to_vec(),
        })
        .map_err(|e| Error::invalid(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Precomputed vectors keyed by the exact text they embed.
#[derive(Debug, Clone)]
pub struct FileBacked {
    dim: usize,
    vectors: HashMap<String, Embedding>,
}

impl FileBacked {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_entries(read_embeddings_jsonl(path)?)
    }

    pub fn from_entries(entries: Vec<(String, Embedding)>) -> Result<Self> {
        let dim = entries
            .first()
            .map(|(_, e)| e.dim())
            .ok_or_else(|| Error::invalid("no embeddings given"))?;
        let mut vectors = HashMap::with_capacity(entries.len());
        for (id, emb) in entries {
            if emb.dim() != dim {
                return Err(Error::invalid(format!("{id:?} has {} dims, expected {dim}", emb.dim())));
            }
            if vectors.insert(id.clone(), emb).is_some() {
                return Err(Error::invalid(format!("duplicate id {id:?}")));
            }
        }
        Ok(FileBacked { dim, vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

impl EmbeddingProvider for FileBacked {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<Embedding> {
        self.vectors
            .get(text)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("no embedding for id {text:?}")))
    }
}

/// How to construct a provider; used by configuration and the CLI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderSpec {
    Hashed { dim: usize },
    File { path: PathBuf },
}

impl Default for ProviderSpec {
    fn default() -> Self {
        ProviderSpec::Hashed { dim: 256 }
    }
}

impl ProviderSpec {
    pub fn build(&self) -> Result<Box<dyn EmbeddingProvider>> {
        Ok(match self {
            ProviderSpec::Hashed { dim } => Box::new(HashedNGram::new(*dim)?),
            ProviderSpec::File { path } => Box::new(FileBacked::load(path)?),
        })
    }
}
