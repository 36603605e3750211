//! Benchmark harnesses: top-k retrieval scoring against reference contexts,
//! pre/post generation evaluation, and report rendering.
//!
//! For k > 1 the retrieved chunk texts are joined in rank order with a
//! single `\n` and the joined text is scored as one prediction, so adding
//! chunks can only add tokens: token recall never falls as k grows.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::corpus::{Corpus, CqaTriplet};
use crate::dense::{
    EmbeddingProvider, FlatIndex, ProviderSpec, RpForest, Similarity, DEFAULT_LEAF_SIZE,
    DEFAULT_TREES,
};
use crate::error::{Error, Result};
use crate::metrics::{average, score_pair, Direction, MetricId, MetricValue, ScorePair};
use crate::ranking::RankedList;
use crate::sparse::{Bm25Params, InvertedIndex, Scorer, SearchEngine};
use crate::textkit::AnalysisChain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RetrieverKind {
    /// TF-IDF over a lowercased, unstemmed index.
    TfIdf,
    /// BM25 over a lowercased, unstemmed index.
    Bm25,
    /// Search engine: stemmed analysis, BM25, quoted phrases as filters.
    Engine,
    FlatDot,
    FlatCosine,
    /// Random-projection forest over the dot-product index.
    Forest,
}

impl RetrieverKind {
    pub const ALL: [RetrieverKind; 6] = [
        RetrieverKind::TfIdf,
        RetrieverKind::Bm25,
        RetrieverKind::Engine,
        RetrieverKind::FlatDot,
        RetrieverKind::FlatCosine,
        RetrieverKind::Forest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            RetrieverKind::TfIdf => "tfidf",
            RetrieverKind::Bm25 => "bm25",
            RetrieverKind::Engine => "engine",
            RetrieverKind::FlatDot => "flat_dot",
            RetrieverKind::FlatCosine => "flat_cosine",
            RetrieverKind::Forest => "forest",
        }
    }

    pub fn is_dense(self) -> bool {
        matches!(
            self,
            RetrieverKind::FlatDot | RetrieverKind::FlatCosine | RetrieverKind::Forest
        )
    }
}

impl fmt::Display for RetrieverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RetrieverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "tfidf" | "tf_idf" => RetrieverKind::TfIdf,
            "bm25" => RetrieverKind::Bm25,
            "engine" | "es" => RetrieverKind::Engine,
            "flat_dot" | "dot" | "dpr" => RetrieverKind::FlatDot,
            "flat_cosine" | "cosine" | "sbert" => RetrieverKind::FlatCosine,
            "forest" | "annoy" | "ann" => RetrieverKind::Forest,
            other => return Err(Error::invalid(format!("unknown retriever {other:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForestParams {
    pub n_trees: usize,
    pub leaf_size: usize,
    /// Candidates to collect per query; `None` means `n_trees · k`. Values
    /// below `k` are raised to `k`.
    pub search_k: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: DEFAULT_TREES,
            leaf_size: DEFAULT_LEAF_SIZE,
            search_k: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalBenchConfig {
    pub retrievers: Vec<RetrieverKind>,
    pub k_values: Vec<usize>,
    /// Must report precision, recall and f1: token F1 or the embedding
    /// matching score.
    pub metric: MetricId,
    pub provider: ProviderSpec,
    pub bm25: Bm25Params,
    pub forest: ForestParams,
    pub seed: u64,
}

impl Default for RetrievalBenchConfig {
    fn default() -> Self {
        RetrievalBenchConfig {
            retrievers: RetrieverKind::ALL.to_vec(),
            k_values: vec![1, 3, 5, 10],
            metric: MetricId::BertScore,
            provider: ProviderSpec::default(),
            bm25: Bm25Params::default(),
            forest: ForestParams::default(),
            seed: 42,
        }
    }
}

impl RetrievalBenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.retrievers.is_empty() {
            return Err(Error::invalid("no retrievers configured"));
        }
        if self.k_values.is_empty() {
            return Err(Error::invalid("no k values configured"));
        }
        if self.k_values[0] == 0 {
            return Err(Error::invalid("k values must be positive"));
        }
        if self.k_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("k values must be strictly increasing"));
        }
        if !self.metric.has_precision_recall() {
            return Err(Error::invalid(format!(
                "metric {} has no precision/recall; use f1 or bert",
                self.metric
            )));
        }
        self.bm25.validate()
    }

    fn needs_provider(&self) -> bool {
        self.metric.needs_provider() || self.retrievers.iter().any(|r| r.is_dense())
    }
}

/// (question, reference context) pairs from a CQA dataset.
pub fn queries_from_triplets(triplets: &[CqaTriplet]) -> Vec<(String, String)> {
    triplets
        .iter()
        .map(|t| (t.question.clone(), t.context.clone()))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub retriever: RetrieverKind,
    pub k: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrieverTiming {
    pub retriever: RetrieverKind,
    pub build: Duration,
    pub queries: Duration,
    /// Retrievals (over all queries and k) that returned nothing.
    pub empty_results: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalBenchReport {
    /// Retriever-major, then ascending k, in configuration order.
    pub rows: Vec<BenchRow>,
    pub query_count: usize,
    pub metric: MetricId,
    pub seed: u64,
    pub timings: Vec<RetrieverTiming>,
}

impl RetrievalBenchReport {
    pub fn row(&self, retriever: RetrieverKind, k: usize) -> Option<&BenchRow> {
        self.rows
            .iter()
            .find(|r| r.retriever == retriever && r.k == k)
    }
}

enum Prepared {
    Sparse(InvertedIndex, Scorer),
    Engine(SearchEngine),
    Flat(FlatIndex, Similarity),
    Forest(FlatIndex, RpForest, Option<usize>),
}

fn prepare(
    kind: RetrieverKind,
    corpus: &Corpus,
    config: &RetrievalBenchConfig,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<Prepared> {
    let flat = || -> Result<FlatIndex> {
        let provider = provider.ok_or_else(|| Error::invalid("dense retrievers need a provider"))?;
        FlatIndex::from_texts(
            provider,
            corpus.chunks().iter().map(|c| (c.id.as_str(), c.text.as_str())),
        )
    };
    Ok(match kind {
        RetrieverKind::TfIdf => Prepared::Sparse(
            InvertedIndex::build(corpus, &AnalysisChain::metric())?,
            Scorer::TfIdf,
        ),
        RetrieverKind::Bm25 => Prepared::Sparse(
            InvertedIndex::build(corpus, &AnalysisChain::metric())?,
            Scorer::Bm25(config.bm25),
        ),
        RetrieverKind::Engine => Prepared::Engine(SearchEngine::with_chain(
            corpus,
            &AnalysisChain::index(),
            config.bm25,
        )?),
        RetrieverKind::FlatDot => Prepared::Flat(flat()?, Similarity::Dot),
        RetrieverKind::FlatCosine => Prepared::Flat(flat()?, Similarity::Cosine),
        RetrieverKind::Forest => {
            let index = flat()?;
            let forest = RpForest::build(
                &index,
                config.forest.n_trees,
                config.forest.leaf_size,
                config.seed,
            )?;
            Prepared::Forest(index, forest, config.forest.search_k)
        }
    })
}

fn empty(k: usize) -> RankedList {
    RankedList { k, hits: Vec::new() }
}

impl Prepared {
    fn retrieve(
        &self,
        query: &str,
        k: usize,
        provider: Option<&dyn EmbeddingProvider>,
    ) -> Result<RankedList> {
        let embed = |q: &str| {
            provider
                .ok_or_else(|| Error::invalid("dense retrievers need a provider"))?
                .embed(q)
        };
        match self {
            Prepared::Sparse(index, scorer) => {
                if index.query_terms(query).is_empty() {
                    return Ok(empty(k));
                }
                index.search(query, k, scorer)
            }
            Prepared::Engine(engine) => {
                if engine.index().query_terms(query).is_empty() {
                    return Ok(empty(k));
                }
                engine.query(query, k)
            }
            Prepared::Flat(index, similarity) => {
                let q = embed(query)?;
                if q.is_zero() {
                    return Ok(empty(k));
                }
                index.search(&q, k, *similarity)
            }
            Prepared::Forest(index, forest, search_k) => {
                let q = embed(query)?;
                if q.is_zero() {
                    return Ok(empty(k));
                }
                forest.search(index, &q, k, search_k.map(|s| s.max(k)))
            }
        }
    }
}

/// Scores of one query at every configured k: `(precision, recall, f1)`,
/// plus how many of those retrievals came back empty.
type QueryScores = (Vec<(f64, f64, f64)>, usize);

fn score_query(
    prepared: &Prepared,
    texts: &HashMap<&str, &str>,
    question: &str,
    reference: &str,
    config: &RetrievalBenchConfig,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<QueryScores> {
    let mut scores = Vec::with_capacity(config.k_values.len());
    let mut empties = 0;
    for &k in &config.k_values {
        let hits = prepared.retrieve(question, k, provider)?;
        if hits.is_empty() {
            empties += 1;
            log::warn!("no results for query {question:?} at k={k}");
            scores.push((0.0, 0.0, 0.0));
            continue;
        }
        let mut joined = String::new();
        for (i, hit) in hits.hits.iter().enumerate() {
            let text = texts
                .get(hit.id.as_str())
                .ok_or_else(|| Error::NotFound(format!("chunk {:?}", hit.id)))?;
            if i > 0 {
                joined.push('\n');
            }
            joined.push_str(text);
        }
        let value = score_pair(config.metric, &ScorePair::new(joined, reference), provider)?;
        let part = |key: &str| {
            value
                .component(key)
                .ok_or_else(|| Error::invalid(format!("metric {} lacks {key}", config.metric)))
        };
        scores.push((part("precision")?, part("recall")?, part("f1")?));
    }
    Ok((scores, empties))
}

/// Retrieves top-k for every query, retriever and k, scores the joined
/// chunks against the reference context, and averages per (retriever, k).
///
/// Queries run in parallel; sums are taken in query order so the report
/// does not depend on scheduling. A report over zero queries has no rows.
pub fn run_retrieval_bench(
    corpus: &Corpus,
    queries: &[(String, String)],
    config: &RetrievalBenchConfig,
) -> Result<RetrievalBenchReport> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::invalid("corpus is empty"));
    }
    if let Some(i) = queries.iter().position(|(_, r)| r.trim().is_empty()) {
        return Err(Error::invalid(format!("query {i} has an empty reference")));
    }
    let provider = if config.needs_provider() {
        Some(config.provider.build()?)
    } else {
        None
    };
    let provider = provider.as_deref();
    let texts = corpus.text_map();

    let mut report = RetrievalBenchReport {
        rows: Vec::new(),
        query_count: queries.len(),
        metric: config.metric,
        seed: config.seed,
        timings: Vec::new(),
    };
    for &kind in &config.retrievers {
        let started = Instant::now();
        let prepared = prepare(kind, corpus, config, provider)?;
        let build = started.elapsed();

        let started = Instant::now();
        let per_query: Vec<QueryScores> = queries
            .par_iter()
            .map(|(q, r)| score_query(&prepared, &texts, q, r, config, provider))
            .collect::<Result<_>>()?;
        let elapsed = started.elapsed();

        let empty_results = per_query.iter().map(|(_, e)| e).sum();
        report.timings.push(RetrieverTiming {
            retriever: kind,
            build,
            queries: elapsed,
            empty_results,
        });
        if queries.is_empty() {
            continue;
        }
        let n = queries.len() as f64;
        for (slot, &k) in config.k_values.iter().enumerate() {
            let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
            for (scores, _) in &per_query {
                let (qp, qr, qf) = scores[slot];
                p += qp;
                r += qr;
                f += qf;
            }
            report.rows.push(BenchRow {
                retriever: kind,
                k,
                precision: p / n,
                recall: r / n,
                f1: f / n,
            });
        }
        log::info!(
            "{kind}: {} queries in {:.3}s (build {:.3}s, {empty_results} empty)",
            queries.len(),
            elapsed.as_secs_f64(),
            build.as_secs_f64()
        );
    }
    Ok(report)
}

/// A pair that a metric could not score.
#[derive(Debug, Clone, PartialEq)]
pub struct Exclusion {
    /// Position of the pair in the input.
    pub index: usize,
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationRow {
    pub metric: MetricId,
    /// Mean over the pairs that scored; `None` when none did.
    pub mean: Option<MetricValue>,
    pub scored: usize,
    pub excluded: Vec<Exclusion>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenerationReport {
    pub pair_count: usize,
    pub rows: Vec<GenerationRow>,
}

impl GenerationReport {
    pub fn row(&self, metric: MetricId) -> Option<&GenerationRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }
}

/// Scores every pair with every metric and averages per metric. Pairs a
/// metric rejects are left out of that metric's mean and listed.
pub fn run_generation_eval(
    pairs: &[ScorePair],
    metrics: &[MetricId],
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<GenerationReport> {
    if pairs.is_empty() {
        return Err(Error::invalid("no pairs to evaluate"));
    }
    if metrics.is_empty() {
        return Err(Error::invalid("no metrics selected"));
    }
    if provider.is_none() {
        if let Some(m) = metrics.iter().find(|m| m.needs_provider()) {
            return Err(Error::invalid(format!("metric {m} needs an embedding provider")));
        }
    }
    let mut rows = Vec::with_capacity(metrics.len());
    for &metric in metrics {
        let results: Vec<Result<MetricValue>> = pairs
            .par_iter()
            .map(|pair| score_pair(metric, pair, provider))
            .collect();
        let mut values = Vec::new();
        let mut excluded = Vec::new();
        for (index, (pair, result)) in pairs.iter().zip(results).enumerate() {
            match result {
                Ok(v) => values.push(v),
                Err(e) => {
                    log::warn!("{metric}: pair {index} excluded: {e}");
                    excluded.push(Exclusion {
                        index,
                        id: pair.id.clone(),
                        message: e.to_string(),
                    });
                }
            }
        }
        let mean = if values.is_empty() {
            None
        } else {
            Some(average(&values)?)
        };
        rows.push(GenerationRow {
            metric,
            mean,
            scored: values.len(),
            excluded,
        });
    }
    Ok(GenerationReport {
        pair_count: pairs.len(),
        rows,
    })
}

/// Relative change from `pre` to `post` in percent, signed so that an
/// improvement is positive under either direction.
pub fn improvement_pct(pre: f64, post: f64, direction: Direction) -> Result<f64> {
    if pre == 0.0 {
        return Err(Error::Undefined("improvement relative to a zero baseline".into()));
    }
    if !pre.is_finite() || !post.is_finite() {
        return Err(Error::invalid("pre and post values must be finite"));
    }
    Ok(match direction {
        Direction::HigherBetter => 100.0 * (post - pre) / pre,
        Direction::LowerBetter => 100.0 * (pre - post) / pre,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub metric: String,
    pub direction: Direction,
    pub pre: f64,
    pub post: f64,
    /// `None` when the baseline is zero.
    pub improvement: Option<f64>,
}

impl ComparisonRow {
    pub fn new(metric: impl Into<String>, direction: Direction, pre: f64, post: f64) -> Result<Self> {
        let improvement = match improvement_pct(pre, post, direction) {
            Ok(v) => Some(v),
            Err(Error::Undefined(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(ComparisonRow {
            metric: metric.into(),
            direction,
            pre,
            post,
            improvement,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    /// Seed of the run, echoed in the Markdown caption.
    pub seed: Option<u64>,
}

impl ComparisonReport {
    /// Pairs up two evaluations metric by metric. The embedding-matching
    /// score contributes three rows: `bert_precision`, `bert_recall`,
    /// `bert_f1`. Metrics missing or without a mean on either side are
    /// skipped.
    pub fn from_evaluations(pre: &GenerationReport, post: &GenerationReport) -> Result<Self> {
        let mut rows = Vec::new();
        for before in &pre.rows {
            let Some(after) = post.row(before.metric) else {
                continue;
            };
            let (Some(a), Some(b)) = (&before.mean, &after.mean) else {
                continue;
            };
            let direction = before.metric.direction();
            if before.metric == MetricId::BertScore {
                for part in ["precision", "recall", "f1"] {
                    let (Some(x), Some(y)) = (a.component(part), b.component(part)) else {
                        continue;
                    };
                    rows.push(ComparisonRow::new(format!("bert_{part}"), direction, x, y)?);
                }
            } else {
                rows.push(ComparisonRow::new(before.metric.name(), direction, a.value, b.value)?);
            }
        }
        Ok(ComparisonReport { rows, seed: None })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportFormat {
    #[default]
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "md" | "markdown" => Ok(ReportFormat::Markdown),
            other => Err(Error::invalid(format!("unknown report format {other:?}"))),
        }
    }
}

/// Reports that can be rendered as a table.
pub trait Render {
    fn render(&self, format: ReportFormat) -> String;
}

fn table(caption: Option<String>, header: &[&str], rows: &[Vec<String>], format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Csv => {
            out.push_str(&header.join(","));
            out.push('\n');
            for row in rows {
                out.push_str(&row.join(","));
                out.push('\n');
            }
        }
        ReportFormat::Markdown => {
            if let Some(caption) = caption {
                let _ = writeln!(out, "{caption}\n");
            }
            let _ = writeln!(out, "| {} |", header.join(" | "));
            let _ = writeln!(out, "|{}", "---|".repeat(header.len()));
            for row in rows {
                let _ = writeln!(out, "| {} |", row.join(" | "));
            }
        }
    }
    out
}

impl Render for RetrievalBenchReport {
    fn render(&self, format: ReportFormat) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.retriever.name().to_string(),
                    r.k.to_string(),
                    format!("{:.3}", r.precision),
                    format!("{:.3}", r.recall),
                    format!("{:.3}", r.f1),
                ]
            })
            .collect();
        let caption = format!(
            "Retrieval benchmark: {} queries, metric {}, seed {}",
            self.query_count, self.metric, self.seed
        );
        table(
            Some(caption),
            &["retriever", "k", "precision", "recall", "f1"],
            &rows,
            format,
        )
    }
}

impl Render for ComparisonReport {
    fn render(&self, format: ReportFormat) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.metric.clone(),
                    format!("{:.3}", r.pre),
                    format!("{:.3}", r.post),
                    r.improvement
                        .map_or_else(|| "NA".to_string(), |v| format!("{v:.2}")),
                ]
            })
            .collect();
        let caption = match self.seed {
            Some(seed) => format!("Pre/post comparison, seed {seed}"),
            None => "Pre/post comparison".to_string(),
        };
        table(
            Some(caption),
            &["metric", "pre", "post", "improvement"],
            &rows,
            format,
        )
    }
}

impl GenerationReport {
    /// Flattened (name, mean) rows in metric order; the embedding-matching
    /// score contributes `bert_precision`, `bert_recall`, `bert_f1`.
    fn table_rows(&self) -> Vec<Vec<String>> {
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |v| format!("{v:.3}"));
        let mut rows = Vec::new();
        for row in &self.rows {
            let counts = [row.scored.to_string(), row.excluded.len().to_string()];
            if row.metric == MetricId::BertScore {
                for part in ["precision", "recall", "f1"] {
                    let value = row.mean.as_ref().and_then(|m| m.component(part));
                    let mut cells = vec![format!("bert_{part}"), fmt(value)];
                    cells.extend(counts.clone());
                    rows.push(cells);
                }
            } else {
                let mut cells = vec![row.metric.name().to_string(), fmt(row.mean.as_ref().map(|m| m.value))];
                cells.extend(counts);
                rows.push(cells);
            }
        }
        rows
    }
}

impl Render for GenerationReport {
    fn render(&self, format: ReportFormat) -> String {
        table(
            Some(format!("Generation metrics over {} pairs", self.pair_count)),
            &["metric", "value", "scored", "excluded"],
            &self.table_rows(),
            format,
        )
    }
}

/// Renders either report type. Output depends only on the report contents.
pub fn render_report<R: Render + ?Sized>(report: &R, format: ReportFormat) -> String {
    report.render(format)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Chunk;
    use crate::metrics::token_f1;

    fn corpus() -> Corpus {
        Corpus::new(vec![
            Chunk::new("c1", "fire doors must close automatically"),
            Chunk::new("c2", "exit stairs need handrails on both sides"),
            Chunk::new("c3", "smoke alarms are required in every bedroom"),
        ])
        .unwrap()
    }

    fn queries() -> Vec<(String, String)> {
        [
            ("must fire doors close", "fire doors must close automatically"),
            ("handrails on exit stairs", "exit stairs need handrails on both sides"),
            ("where are smoke alarms required", "smoke alarms are required in every bedroom"),
        ]
        .iter()
        .map(|(q, r)| (q.to_string(), r.to_string()))
        .collect()
    }

    fn token_config(retrievers: Vec<RetrieverKind>, k_values: Vec<usize>) -> RetrievalBenchConfig {
        RetrievalBenchConfig {
            retrievers,
            k_values,
            metric: MetricId::TokenF1,
            ..Default::default()
        }
    }

    #[test]
    fn exact_hits_at_rank_one_score_one() {
        let cfg = token_config(vec![RetrieverKind::Bm25, RetrieverKind::Engine], vec![1]);
        let report = run_retrieval_bench(&corpus(), &queries(), &cfg).unwrap();
        for row in &report.rows {
            assert_eq!((row.precision, row.recall, row.f1), (1.0, 1.0, 1.0), "{row:?}");
        }
    }

    #[test]
    fn matches_manual_pipeline() {
        let corpus = corpus();
        let queries = queries();
        let cfg = token_config(vec![RetrieverKind::TfIdf], vec![1, 2]);
        let report = run_retrieval_bench(&corpus, &queries, &cfg).unwrap();
        let index = InvertedIndex::build(&corpus, &AnalysisChain::metric()).unwrap();
        for (slot, k) in [1usize, 2].into_iter().enumerate() {
            let mut recall = 0.0;
            for (q, r) in &queries {
                let hits = index.search(q, k, &Scorer::TfIdf).unwrap();
                let text: Vec<&str> = hits.ids().iter().map(|id| corpus.get(id).unwrap().text.as_str()).collect();
                let v = token_f1(&ScorePair::new(text.join("\n"), r.as_str())).unwrap();
                recall += v.component("recall").unwrap();
            }
            assert!((report.rows[slot].recall - recall / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn every_cell_present_in_order() {
        let cfg = RetrievalBenchConfig {
            k_values: vec![1, 2, 3],
            ..Default::default()
        };
        let report = run_retrieval_bench(&corpus(), &queries(), &cfg).unwrap();
        assert_eq!(report.rows.len(), 18);
        for (i, kind) in RetrieverKind::ALL.iter().enumerate() {
            for (j, k) in [1, 2, 3].iter().enumerate() {
                let row = &report.rows[i * 3 + j];
                assert_eq!((row.retriever, row.k), (*kind, *k));
            }
        }
        assert_eq!(report.timings.len(), 6);
    }

    #[test]
    fn unmatched_query_counts_as_empty() {
        let cfg = token_config(vec![RetrieverKind::Bm25], vec![1]);
        let queries = vec![("zzz qqq".to_string(), "fire doors".to_string())];
        let report = run_retrieval_bench(&corpus(), &queries, &cfg).unwrap();
        assert_eq!(report.rows[0].f1, 0.0);
        assert_eq!(report.timings[0].empty_results, 1);
    }

    #[test]
    fn config_validation() {
        let bad = |f: fn(&mut RetrievalBenchConfig)| {
            let mut cfg = RetrievalBenchConfig::default();
            f(&mut cfg);
            run_retrieval_bench(&corpus(), &queries(), &cfg).is_err()
        };
        assert!(bad(|c| c.k_values = vec![3, 1]));
        assert!(bad(|c| c.k_values = vec![0, 1]));
        assert!(bad(|c| c.k_values = vec![1, 1]));
        assert!(bad(|c| c.retrievers.clear()));
        assert!(bad(|c| c.metric = MetricId::Bleu));
        let q = vec![("fire".to_string(), " ".to_string())];
        assert!(run_retrieval_bench(&corpus(), &q, &RetrievalBenchConfig::default()).is_err());
    }

    #[test]
    fn empty_query_set_renders_header_only() {
        let cfg = token_config(vec![RetrieverKind::Bm25], vec![1, 3]);
        let report = run_retrieval_bench(&corpus(), &[], &cfg).unwrap();
        assert_eq!(render_report(&report, ReportFormat::Csv), "retriever,k,precision,recall,f1\n");
    }

    #[test]
    fn markdown_shape() {
        let cfg = token_config(vec![RetrieverKind::Bm25, RetrieverKind::TfIdf], vec![1, 2]);
        let report = run_retrieval_bench(&corpus(), &queries(), &cfg).unwrap();
        let md = render_report(&report, ReportFormat::Markdown);
        let data_rows = md.lines().filter(|l| l.starts_with("| ") && !l.starts_with("| retriever")).count();
        assert_eq!(data_rows, 4);
        assert!(md.contains("seed 42"));
        assert!(!render_report(&report, ReportFormat::Csv).contains("seed"));
    }

    #[test]
    fn improvement_examples() {
        let f1 = improvement_pct(0.402, 0.465, Direction::HigherBetter).unwrap();
        assert!((f1 - 15.67).abs() < 0.01);
        let sms = improvement_pct(3.988, 3.298, Direction::LowerBetter).unwrap();
        assert!((sms - 17.30).abs() < 0.01);
        assert_eq!(improvement_pct(0.3, 0.3, Direction::LowerBetter).unwrap(), 0.0);
        assert!(matches!(improvement_pct(0.0, 1.0, Direction::HigherBetter), Err(Error::Undefined(_))));
    }

    #[test]
    fn generation_eval_identical_pairs() {
        let pairs = vec![
            ScorePair::new("fire doors close", "fire doors close"),
            ScorePair::new("exit stairs", "exit stairs"),
        ];
        let metrics = [MetricId::TokenF1, MetricId::Bleu, MetricId::Rouge1];
        let report = run_generation_eval(&pairs, &metrics, None).unwrap();
        for row in &report.rows {
            assert_eq!(row.mean.as_ref().unwrap().value, 1.0);
            assert!(row.excluded.is_empty());
        }
        assert!(run_generation_eval(&pairs, &[MetricId::Sms], None).is_err());
        assert_eq!(
            render_report(&report, ReportFormat::Csv),
            "metric,value,scored,excluded\nf1,1.000,2,0\nbleu,1.000,2,0\nrouge1,1.000,2,0\n"
        );
        assert!(run_generation_eval(&[], &metrics, None).is_err());
    }

    #[test]
    fn generation_eval_excludes_bad_pairs() {
        let pairs = vec![
            ScorePair::new("fire doors", "fire exit").with_id("a"),
            ScorePair::new("fire doors", "").with_id("b"),
        ];
        let report = run_generation_eval(&pairs, &[MetricId::TokenF1], None).unwrap();
        let row = report.row(MetricId::TokenF1).unwrap();
        assert_eq!(row.scored, 1);
        assert_eq!(row.excluded[0].id, "b");
        assert_eq!(row.mean.as_ref().unwrap().value, 0.5);
    }

    #[test]
    fn comparison_expands_bert_rows() {
        let provider = crate::dense::HashedNGram::default();
        let pre = vec![ScorePair::new("doors shut", "fire doors close")];
        let post = vec![ScorePair::new("fire doors close", "fire doors close")];
        let metrics = [MetricId::TokenF1, MetricId::Sms, MetricId::BertScore];
        let a = run_generation_eval(&pre, &metrics, Some(&provider)).unwrap();
        let b = run_generation_eval(&post, &metrics, Some(&provider)).unwrap();
        let cmp = ComparisonReport::from_evaluations(&a, &b).unwrap();
        let names: Vec<&str> = cmp.rows.iter().map(|r| r.metric.as_str()).collect();
        assert_eq!(names, ["f1", "sms", "bert_precision", "bert_recall", "bert_f1"]);
        let sms = &cmp.rows[1];
        assert_eq!(sms.direction, Direction::LowerBetter);
        assert_eq!(sms.improvement, Some(100.0));
        let csv = render_report(&cmp, ReportFormat::Csv);
        assert!(csv.starts_with("metric,pre,post,improvement\nf1,"));
    }

    #[test]
    fn zero_baseline_renders_na() {
        let cmp = ComparisonReport {
            rows: vec![ComparisonRow::new("bleu", Direction::HigherBetter, 0.0, 0.2).unwrap()],
            seed: None,
        };
        assert_eq!(render_report(&cmp, ReportFormat::Csv), "metric,pre,post,improvement\nbleu,0.000,0.200,NA\n");
    }
}
