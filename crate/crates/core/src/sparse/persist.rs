//! Binary index file format.
//!
//! All integers are little-endian `u32`; strings are a `u32` byte length
//! followed by UTF-8 bytes.
//!
//! ```text
//! magic        b"SPIX"
//! version      u32 (= 1)
//! lowercase    u8 (0/1)
//! stem         u8 (0/1)
//! stopwords    u32 count, then count strings (sorted)
//! docs         u32 count N, then N × (id string, length u32)
//! warnings     u32 count, then count × (chunk id string, reason string)
//! terms        u32 count, then per term in lexicographic order:
//!                term string, u32 posting count, then per posting:
//!                doc ordinal u32, term_freq u32, term_freq × position u32
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::textkit::AnalysisChain;

use super::index::{IndexWarning, InvertedIndex, Posting};

pub const MAGIC: &[u8; 4] = b"SPIX";
pub const VERSION: u32 = 1;

struct Writer<W: Write> {
    out: W,
}

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> std::io::Result<()> {
        self.out.write_all(&[v])
    }

    fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.out.write_all(&v.to_le_bytes())
    }

    fn len(&mut self, n: usize) -> std::io::Result<()> {
        let n = u32::try_from(n)
            .map_err(|_| std::io::Error::new(std::io::ErrorKind::InvalidInput, "length exceeds u32"))?;
        self.u32(n)
    }

    fn str(&mut self, s: &str) -> std::io::Result<()> {
        self.len(s.len())?;
        self.out.write_all(s.as_bytes())
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let bytes = &self.buf[self.pos..end];
        self.pos = end;
        Ok(bytes)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(Error::Format(format!("bad flag byte {v}"))),
        }
    }

    fn str(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        let at = self.pos;
        String::from_utf8(self.take(n)?.to_vec())
            .map_err(|_| Error::Format(format!("invalid UTF-8 string at byte {at}")))
    }

    /// Count prefix, bounded by the bytes left so corrupt input cannot force
    /// a huge allocation.
    fn count(&mut self, min_item_bytes: usize) -> Result<usize> {
        let n = self.u32()? as usize;
        let left = self.buf.len() - self.pos;
        if n.saturating_mul(min_item_bytes) > left {
            return Err(Error::Format(format!("count {n} exceeds remaining data")));
        }
        Ok(n)
    }
}

impl InvertedIndex {
    pub fn write_to<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = Writer { out };
        w.out.write_all(MAGIC)?;
        w.u32(VERSION)?;
        w.u8(u8::from(self.chain.lowercase))?;
        w.u8(u8::from(self.chain.stem))?;
        w.len(self.chain.stopwords.len())?;
        for s in &self.chain.stopwords {
            w.str(s)?;
        }
        w.len(self.doc_ids.len())?;
        for (id, len) in self.doc_ids.iter().zip(&self.doc_len) {
            w.str(id)?;
            w.u32(*len)?;
        }
        w.len(self.warnings.len())?;
        for warning in &self.warnings {
            w.str(&warning.chunk_id)?;
            w.str(&warning.reason)?;
        }
        w.len(self.postings.len())?;
        for (term, list) in &self.postings {
            w.str(term)?;
            w.len(list.len())?;
            for p in list {
                w.u32(p.doc)?;
                w.u32(p.term_freq)?;
                for &pos in &p.positions {
                    w.u32(pos)?;
                }
            }
        }
        w.out.flush()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Format("missing SPIX magic".into()));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let lowercase = r.flag()?;
        let stem = r.flag()?;
        let mut stopwords = BTreeSet::new();
        for _ in 0..r.count(4)? {
            stopwords.insert(r.str()?);
        }
        let chain = AnalysisChain {
            lowercase,
            stem,
            stopwords,
        };

        let n = r.count(8)?;
        if n == 0 {
            return Err(Error::Format("index has no documents".into()));
        }
        let mut doc_ids = Vec::with_capacity(n);
        let mut doc_len = Vec::with_capacity(n);
        for _ in 0..n {
            doc_ids.push(r.str()?);
            let len = r.u32()?;
            if len == 0 {
                return Err(Error::Format("document length must be positive".into()));
            }
            doc_len.push(len);
        }
        let mut warnings = Vec::new();
        for _ in 0..r.count(8)? {
            warnings.push(IndexWarning {
                chunk_id: r.str()?,
                reason: r.str()?,
            });
        }

        let mut postings = BTreeMap::new();
        for _ in 0..r.count(8)? {
            let term = r.str()?;
            let count = r.count(12)?;
            let mut list = Vec::with_capacity(count);
            for _ in 0..count {
                let doc = r.u32()?;
                if doc as usize >= n || list.last().is_some_and(|p: &Posting| p.doc >= doc) {
                    return Err(Error::Format(format!("bad document ordinal for {term:?}")));
                }
                let term_freq = r.u32()?;
                if term_freq == 0 {
                    return Err(Error::Format(format!("zero term frequency for {term:?}")));
                }
                if (term_freq as usize).saturating_mul(4) > buf.len() - r.pos {
                    return Err(Error::Format("positions exceed remaining data".into()));
                }
                let positions = (0..term_freq)
                    .map(|_| r.u32())
                    .collect::<Result<Vec<_>>>()?;
                if positions.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Format(format!("unsorted positions for {term:?}")));
                }
                list.push(Posting {
                    doc,
                    term_freq,
                    positions,
                });
            }
            postings.insert(term, list);
        }
        if r.pos != buf.len() {
            return Err(Error::Format("trailing bytes after index".into()));
        }
        Ok(InvertedIndex::from_parts(chain, doc_ids, doc_len, postings, warnings))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_to(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut buf))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&buf)
    }
}
