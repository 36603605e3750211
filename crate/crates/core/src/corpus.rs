//! CQA datasets and retrieval corpora: loading, cleaning, answer-type
//! classification, dataset statistics and chunking.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::textkit::{ngrams, token_spans, tokenize, AnalysisChain, Token};

/// One context/question/answer record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CqaTriplet {
    pub id: String,
    pub context: String,
    pub question: String,
    pub answer: String,
}

impl CqaTriplet {
    pub fn new(
        id: impl Into<String>,
        context: impl Into<String>,
        question: impl Into<String>,
        answer: impl Into<String>,
    ) -> Self {
        CqaTriplet {
            id: id.into(),
            context: context.into(),
            question: question.into(),
            answer: answer.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chunk {
    pub id: String,
    pub text: String,
}

impl Chunk {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Chunk {
            id: id.into(),
            text: text.into(),
        }
    }
}

/// An ordered collection of chunks with its length statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    chunks: Vec<Chunk>,
    avg_len: f64,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids and empty chunk texts.
    pub fn new(chunks: Vec<Chunk>) -> Result<Self> {
        let mut corpus = Corpus {
            chunks: Vec::with_capacity(chunks.len()),
            avg_len: 0.0,
        };
        let mut seen = HashSet::new();
        for chunk in chunks {
            if !seen.insert(chunk.id.clone()) {
                return Err(Error::invalid(format!("duplicate chunk id {:?}", chunk.id)));
            }
            if chunk.text.trim().is_empty() {
                return Err(Error::invalid(format!("chunk {:?} has empty text", chunk.id)));
            }
            corpus.chunks.push(chunk);
        }
        corpus.recompute();
        Ok(corpus)
    }

    pub fn push(&mut self, chunk: Chunk) -> Result<()> {
        if self.chunks.iter().any(|c| c.id == chunk.id) {
            return Err(Error::invalid(format!("duplicate chunk id {:?}", chunk.id)));
        }
        if chunk.text.trim().is_empty() {
            return Err(Error::invalid(format!("chunk {:?} has empty text", chunk.id)));
        }
        self.chunks.push(chunk);
        self.recompute();
        Ok(())
    }

    fn recompute(&mut self) {
        self.avg_len = if self.chunks.is_empty() {
            0.0
        } else {
            let total: usize = self.chunks.iter().map(|c| tokenize(&c.text).len()).sum();
            total as f64 / self.chunks.len() as f64
        };
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    /// Mean token count per chunk.
    pub fn avg_len(&self) -> f64 {
        self.avg_len
    }

    pub fn get(&self, id: &str) -> Option<&Chunk> {
        self.chunks.iter().find(|c| c.id == id)
    }

    /// Map from chunk id to text, for resolving retrieval results.
    pub fn text_map(&self) -> HashMap<&str, &str> {
        self.chunks
            .iter()
            .map(|c| (c.id.as_str(), c.text.as_str()))
            .collect()
    }
}

/// Loads a CQA dataset: a JSON array of objects with string fields
/// `Context`, `Question`, `Answer` and an optional `Id`.
///
/// Records without an `Id` get `id<index>` (0-based). A `null` text field
/// loads as the empty string so that [`clean`] can report it.
pub fn load_cqa(path: impl AsRef<Path>) -> Result<Vec<CqaTriplet>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cqa(&text, path)
}

/// Parses CQA JSON from a string; `origin` is only used in error messages.
pub fn parse_cqa(text: &str, origin: &Path) -> Result<Vec<CqaTriplet>> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Parse {
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let schema = |record: usize, message: String| Error::Schema {
        path: origin.to_path_buf(),
        record,
        message,
    };
    let Value::Array(records) = value else {
        return Err(schema(0, "top-level value must be an array".into()));
    };

    let mut triplets = Vec::with_capacity(records.len());
    let mut ids = HashSet::new();
    for (index, record) in records.iter().enumerate() {
        let Value::Object(fields) = record else {
            return Err(schema(index, "record must be an object".into()));
        };
        let text_field = |name: &str| -> Result<String> {
            match fields.get(name) {
                None => Err(schema(index, format!("missing field \"{name}\""))),
                Some(Value::Null) => Ok(String::new()),
                Some(Value::String(s)) => Ok(s.clone()),
                Some(_) => Err(schema(index, format!("field \"{name}\" must be a string"))),
            }
        };
        let context = text_field("Context")?;
        let question = text_field("Question")?;
        let answer = text_field("Answer")?;
        let id = match fields.get("Id") {
            None | Some(Value::Null) => format!("id{index}"),
            Some(Value::String(s)) => s.clone(),
            Some(Value::Number(n)) => n.to_string(),
            Some(_) => return Err(schema(index, "field \"Id\" must be a string".into())),
        };
        if !ids.insert(id.clone()) {
            return Err(schema(index, format!("duplicate id {id:?}")));
        }
        triplets.push(CqaTriplet {
            id,
            context,
            question,
            answer,
        });
    }
    Ok(triplets)
}

/// A triplet removed by [`clean`] and why.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dropped {
    pub id: String,
    pub reason: String,
}

/// Removes triplets with any field empty after trimming. Kept triplets retain
/// their order.
pub fn clean(triplets: Vec<CqaTriplet>) -> (Vec<CqaTriplet>, Vec<Dropped>) {
    let mut kept = Vec::with_capacity(triplets.len());
    let mut dropped = Vec::new();
    for t in triplets {
        let empty: Vec<&str> = [
            ("context", &t.context),
            ("question", &t.question),
            ("answer", &t.answer),
        ]
        .into_iter()
        .filter(|(_, v)| v.trim().is_empty())
        .map(|(name, _)| name)
        .collect();
        if empty.is_empty() {
            kept.push(t);
        } else {
            let reason = empty
                .iter()
                .map(|name| format!("empty {name}"))
                .collect::<Vec<_>>()
                .join(", ");
            dropped.push(Dropped { id: t.id, reason });
        }
    }
    (kept, dropped)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnswerKind {
    Extractive,
    Abstractive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnswerClass {
    pub kind: AnswerKind,
    pub overlap_ratio: f64,
}

/// Classifies an answer by the fraction of its distinct (lowercased,
/// unstemmed) tokens that also occur in the context. Extractive iff the
/// fraction is strictly above one half.
pub fn classify_answer(answer: &str, context: &str) -> Result<AnswerClass> {
    let chain = AnalysisChain::metric();
    let answer_types: HashSet<Token> = chain.analyze(answer).into_iter().collect();
    if answer_types.is_empty() {
        return Err(Error::invalid("answer has no tokens"));
    }
    let context_types: HashSet<Token> = chain.analyze(context).into_iter().collect();
    let shared = answer_types.intersection(&context_types).count();
    let overlap_ratio = shared as f64 / answer_types.len() as f64;
    let kind = if overlap_ratio > 0.5 {
        AnswerKind::Extractive
    } else {
        AnswerKind::Abstractive
    };
    Ok(AnswerClass {
        kind,
        overlap_ratio,
    })
}

/// Word-length distribution of one text field.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LengthHistogram {
    /// word count → number of records with that many words
    pub counts: BTreeMap<usize, usize>,
}

impl LengthHistogram {
    fn add(&mut self, len: usize) {
        *self.counts.entry(len).or_default() += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn min(&self) -> Option<usize> {
        self.counts.keys().next().copied()
    }

    pub fn max(&self) -> Option<usize> {
        self.counts.keys().next_back().copied()
    }

    pub fn mean(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let sum: usize = self.counts.iter().map(|(len, n)| len * n).sum();
        sum as f64 / total as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub triplet_count: usize,
    pub context_lengths: LengthHistogram,
    pub question_lengths: LengthHistogram,
    pub answer_lengths: LengthHistogram,
    pub extractive_count: usize,
    pub abstractive_count: usize,
    /// Question trigrams by descending frequency, then lexicographically.
    pub top_trigrams: Vec<([String; 3], usize)>,
}

/// Length histograms, answer-type counts and question trigram frequencies.
pub fn dataset_stats(triplets: &[CqaTriplet]) -> Result<DatasetStats> {
    if triplets.is_empty() {
        return Err(Error::invalid("dataset is empty"));
    }
    let chain = AnalysisChain::metric();
    let mut stats = DatasetStats {
        triplet_count: triplets.len(),
        context_lengths: LengthHistogram::default(),
        question_lengths: LengthHistogram::default(),
        answer_lengths: LengthHistogram::default(),
        extractive_count: 0,
        abstractive_count: 0,
        top_trigrams: Vec::new(),
    };
    let mut trigram_counts: HashMap<[String; 3], usize> = HashMap::new();
    for t in triplets {
        stats.context_lengths.add(tokenize(&t.context).len());
        stats.question_lengths.add(tokenize(&t.question).len());
        stats.answer_lengths.add(tokenize(&t.answer).len());

        let class = classify_answer(&t.answer, &t.context)
            .map_err(|e| Error::invalid(format!("triplet {}: {e}", t.id)))?;
        match class.kind {
            AnswerKind::Extractive => stats.extractive_count += 1,
            AnswerKind::Abstractive => stats.abstractive_count += 1,
        }

        let question = chain.analyze(&t.question);
        for gram in ngrams(&question, 3)? {
            let key = [
                gram[0].as_str().to_string(),
                gram[1].as_str().to_string(),
                gram[2].as_str().to_string(),
            ];
            *trigram_counts.entry(key).or_default() += 1;
        }
    }
    let mut trigrams: Vec<_> = trigram_counts.into_iter().collect();
    trigrams.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    stats.top_trigrams = trigrams;
    Ok(stats)
}

/// One chunk per context. With `dedupe`, exactly equal contexts collapse
/// into a single chunk whose id joins the source ids with `+`.
pub fn corpus_from_contexts(triplets: &[CqaTriplet], dedupe: bool) -> Result<Corpus> {
    if triplets.is_empty() {
        return Err(Error::invalid("no triplets to build a corpus from"));
    }
    let mut order: Vec<(Vec<&str>, &str)> = Vec::new();
    let mut by_text: HashMap<&str, usize> = HashMap::new();
    for t in triplets {
        if dedupe {
            if let Some(&slot) = by_text.get(t.context.as_str()) {
                order[slot].0.push(&t.id);
                continue;
            }
            by_text.insert(&t.context, order.len());
        }
        order.push((vec![t.id.as_str()], t.context.as_str()));
    }
    let chunks = order
        .into_iter()
        .map(|(ids, text)| Chunk::new(ids.join("+"), text))
        .collect();
    Corpus::new(chunks)
}

/// Splits `text` into windows of `chunk_words` words that advance by
/// `chunk_words - overlap_words`. Chunk text is the original slice (with its
/// separators) from the first to the last word of the window; ids are
/// `<doc>:<word offset>`. The final short window is kept.
pub fn chunk_text(
    doc: &str,
    text: &str,
    chunk_words: usize,
    overlap_words: usize,
) -> Result<Vec<Chunk>> {
    if chunk_words == 0 || overlap_words >= chunk_words {
        return Err(Error::invalid(format!(
            "need chunk_words > overlap_words >= 0 (got {chunk_words} and {overlap_words})"
        )));
    }
    let spans = token_spans(text);
    if spans.is_empty() {
        return Err(Error::invalid(format!("document {doc:?} contains no words")));
    }
    let stride = chunk_words - overlap_words;
    Ok((0..spans.len())
        .step_by(stride)
        .map(|start| {
            let end = (start + chunk_words).min(spans.len()) - 1;
            Chunk::new(
                format!("{doc}:{start}"),
                &text[spans[start].start..spans[end].end],
            )
        })
        .collect())
}

/// Reads a UTF-8 text file and chunks it with [`chunk_text`], using the file
/// stem as the document name.
pub fn corpus_from_text(
    path: impl AsRef<Path>,
    chunk_words: usize,
    overlap_words: usize,
) -> Result<Corpus> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.trim().is_empty() {
        return Err(Error::invalid(format!("{} is empty", path.display())));
    }
    let doc = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "doc".to_string());
    Corpus::new(chunk_text(&doc, &text, chunk_words, overlap_words)?)
}
