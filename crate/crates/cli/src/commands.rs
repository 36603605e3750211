use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};

use regqa_core::bench::{
    improvement_pct, queries_from_triplets, render_report, run_generation_eval,
    run_retrieval_bench, ComparisonReport, ForestParams, ReportFormat, RetrievalBenchConfig,
    RetrieverKind,
};
use regqa_core::corpus::{clean, corpus_from_contexts, corpus_from_text, dataset_stats, load_cqa, Corpus};
use regqa_core::dense::{read_embeddings_jsonl, write_embeddings_jsonl, EmbeddingProvider, FlatIndex, RpForest, Similarity};
use regqa_core::lora::{demo_fit, trainable_pct};
use regqa_core::metrics::{read_pairs_jsonl, score_pair, Direction, MetricId, ScorePair};
use regqa_core::sparse::{Bm25Params, InvertedIndex, Scorer, SearchEngine};
use regqa_core::textkit::{load_stopwords, AnalysisChain};
use regqa_core::RankedList;

use crate::{
    BenchCommand, BenchGenerationArgs, BenchRetrievalArgs, Bm25Args, Cli, Command, CorpusSource,
    ForestArgs, IndexArgs, LoraArgs, ScoreArgs, SearchArgs, StatsArgs,
};

/// An error plus whether it stems from bad input (exit 2) or from a failure
/// while doing valid work (exit 1).
pub struct Failure {
    pub error: anyhow::Error,
    usage: Option<bool>,
}

impl Failure {
    pub fn code(&self) -> u8 {
        let usage = self.usage.unwrap_or_else(|| {
            self.error.chain().any(|cause| {
                if let Some(e) = cause.downcast_ref::<regqa_core::Error>() {
                    return match e {
                        regqa_core::Error::Io { source, .. } => {
                            source.kind() == std::io::ErrorKind::NotFound
                        }
                        regqa_core::Error::Format(_) => false,
                        _ => true,
                    };
                }
                false
            })
        });
        if usage {
            2
        } else {
            1
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(error: anyhow::Error) -> Self {
        Failure { error, usage: None }
    }
}

impl From<regqa_core::Error> for Failure {
    fn from(error: regqa_core::Error) -> Self {
        Failure::from(anyhow::Error::from(error))
    }
}

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure {
        error: anyhow!("{msg}"),
        usage: Some(true),
    }
}

fn runtime(error: anyhow::Error) -> Failure {
    Failure {
        error,
        usage: Some(false),
    }
}

type CmdResult = Result<(), Failure>;

pub fn run(cli: Cli) -> CmdResult {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| runtime(e.into()))?;
    }
    match cli.command {
        Command::Index(args) => cmd_index(args),
        Command::Search(args) => cmd_search(args),
        Command::Bench(BenchCommand::Retrieval(args)) => cmd_bench_retrieval(args),
        Command::Bench(BenchCommand::Generation(args)) => cmd_bench_generation(args),
        Command::Stats(args) => cmd_stats(args),
        Command::Score(args) => cmd_score(args),
        Command::LoraDemo(args) => cmd_lora(args),
    }
}

fn require_file(path: &Path) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("no such file: {}", path.display())))
    }
}

fn parse<T: std::str::FromStr<Err = regqa_core::Error>>(value: &str) -> Result<T, Failure> {
    value.parse::<T>().map_err(usage)
}

fn metric_list(names: &[String]) -> Result<Vec<MetricId>, Failure> {
    if names.is_empty() {
        return Ok(MetricId::ALL.to_vec());
    }
    names.iter().map(|n| parse(n)).collect()
}

fn bm25_params(args: &Bm25Args) -> Result<Bm25Params, Failure> {
    let params = Bm25Params {
        k1: args.k1,
        b: args.b,
        ..Bm25Params::default()
    };
    params.validate().map_err(usage)?;
    Ok(params)
}

/// Writes `text` to `out`, or to stdout when no path is given.
fn emit(text: &str, out: Option<&PathBuf>) -> CmdResult {
    match out {
        Some(path) => std::fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(runtime),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .context("writing to stdout")
                .map_err(runtime)
        }
    }
}

fn load_corpus(source: &CorpusSource) -> Result<Option<Corpus>, Failure> {
    match (&source.cqa, &source.text) {
        (Some(path), _) => {
            require_file(path)?;
            let (kept, dropped) = clean(load_cqa(path)?);
            for d in &dropped {
                log::warn!("dropped triplet {}: {}", d.id, d.reason);
            }
            if kept.is_empty() {
                return Err(usage(format!("{} has no complete triplets", path.display())));
            }
            Ok(Some(corpus_from_contexts(&kept, !source.no_dedupe)?))
        }
        (None, Some(path)) => {
            if source.overlap >= source.chunk_words {
                return Err(usage(format!(
                    "--overlap ({}) must be smaller than --chunk-words ({})",
                    source.overlap, source.chunk_words
                )));
            }
            require_file(path)?;
            Ok(Some(corpus_from_text(path, source.chunk_words, source.overlap)?))
        }
        (None, None) => Ok(None),
    }
}

fn cmd_index(args: IndexArgs) -> CmdResult {
    if let Some(path) = &args.stopwords {
        require_file(path)?;
    }
    if let Some(path) = &args.provider.provider_file {
        require_file(path)?;
    }
    let corpus = load_corpus(&args.source)?
        .ok_or_else(|| usage("give a corpus with --cqa or --text"))?;
    let mut chain = if args.no_stem {
        AnalysisChain::metric()
    } else {
        AnalysisChain::index()
    };
    if let Some(path) = &args.stopwords {
        chain = chain.with_stopwords(load_stopwords(path)?);
    }
    let index = InvertedIndex::build(&corpus, &chain)?;
    for w in index.warnings() {
        log::warn!("chunk {}: {}", w.chunk_id, w.reason);
    }
    if let Some(out) = &args.out {
        index.save(out)?;
    }
    if let Some(out) = &args.embeddings_out {
        let provider = args.provider.spec().build()?;
        let mut entries = Vec::with_capacity(corpus.len());
        for chunk in corpus.chunks() {
            entries.push((chunk.id.as_str(), provider.embed(&chunk.text)?));
        }
        write_embeddings_jsonl(out, entries.iter().map(|(id, e)| (*id, e)))?;
    }
    emit(
        &format!(
            "N\t{}\navg_len\t{:.6}\nvocabulary\t{}\n",
            index.num_docs(),
            index.avg_len(),
            index.vocabulary_size()
        ),
        None,
    )
}

fn print_ranked(list: &RankedList) -> CmdResult {
    let mut out = String::new();
    for (rank, hit) in list.hits.iter().enumerate() {
        out.push_str(&format!("{}\t{}\t{:.6}\n", rank + 1, hit.id, hit.score));
    }
    emit(&out, None)
}

enum SearchMode {
    Sparse(Scorer),
    Engine,
    Phrase,
    Dense(RetrieverKind),
}

fn cmd_search(args: SearchArgs) -> CmdResult {
    if args.k == 0 {
        return Err(usage("k must be at least 1"));
    }
    let params = bm25_params(&args.bm25)?;
    let mode = match args.retriever.to_ascii_lowercase().as_str() {
        "phrase" => SearchMode::Phrase,
        name => match parse::<RetrieverKind>(name)? {
            RetrieverKind::TfIdf => SearchMode::Sparse(Scorer::TfIdf),
            RetrieverKind::Bm25 => SearchMode::Sparse(Scorer::Bm25(params)),
            RetrieverKind::Engine => SearchMode::Engine,
            kind => SearchMode::Dense(kind),
        },
    };
    for path in [&args.index, &args.embeddings, &args.provider.provider_file]
        .into_iter()
        .flatten()
    {
        require_file(path)?;
    }
    let list = match mode {
        SearchMode::Dense(kind) => dense_search(&args, kind)?,
        sparse => {
            let index = match &args.index {
                Some(path) => InvertedIndex::load(path)?,
                None => {
                    let corpus = load_corpus(&args.source)?
                        .ok_or_else(|| usage("give --index, --cqa or --text"))?;
                    InvertedIndex::build(&corpus, &AnalysisChain::index())?
                }
            };
            if index.query_terms(&args.query).is_empty() {
                return Err(usage(format!(
                    "query {:?} has no searchable terms after analysis",
                    args.query
                )));
            }
            match sparse {
                SearchMode::Sparse(scorer) => index.search(&args.query, args.k, &scorer)?,
                SearchMode::Phrase => index.phrase_search_with(&args.query, args.k, &params)?,
                _ => SearchEngine::from_index(index, params)?.query(&args.query, args.k)?,
            }
        }
    };
    print_ranked(&list)
}

fn dense_search(args: &SearchArgs, kind: RetrieverKind) -> Result<RankedList, Failure> {
    let provider = args.provider.spec().build()?;
    let index = match &args.embeddings {
        Some(path) => FlatIndex::new(read_embeddings_jsonl(path)?)?,
        None => {
            let corpus = load_corpus(&args.source)?
                .ok_or_else(|| usage("give --embeddings, --cqa or --text"))?;
            FlatIndex::from_texts(
                provider.as_ref(),
                corpus.chunks().iter().map(|c| (c.id.as_str(), c.text.as_str())),
            )?
        }
    };
    let q = provider.embed(&args.query)?;
    if q.is_zero() {
        return Err(usage(format!("query {:?} embeds to the zero vector", args.query)));
    }
    Ok(match kind {
        RetrieverKind::FlatDot => index.search(&q, args.k, Similarity::Dot)?,
        RetrieverKind::FlatCosine => index.search(&q, args.k, Similarity::Cosine)?,
        _ => {
            let forest = build_forest(&index, &args.forest)?;
            forest.search(&index, &q, args.k, args.forest.search_k)?
        }
    })
}

fn build_forest(index: &FlatIndex, args: &ForestArgs) -> Result<RpForest, Failure> {
    Ok(RpForest::build(index, args.trees, args.leaf_size, args.seed)?)
}

fn cmd_bench_retrieval(args: BenchRetrievalArgs) -> CmdResult {
    require_file(&args.cqa)?;
    if let Some(path) = &args.provider.provider_file {
        require_file(path)?;
    }
    let format: ReportFormat = parse(&args.format)?;
    let retrievers = if args.retrievers.is_empty() {
        RetrieverKind::ALL.to_vec()
    } else {
        args.retrievers.iter().map(|r| parse(r)).collect::<Result<_, _>>()?
    };
    let config = RetrievalBenchConfig {
        retrievers,
        k_values: args.k_values.clone(),
        metric: parse(&args.metric)?,
        provider: args.provider.spec(),
        bm25: bm25_params(&args.bm25)?,
        forest: ForestParams {
            n_trees: args.forest.trees,
            leaf_size: args.forest.leaf_size,
            search_k: args.forest.search_k,
        },
        seed: args.forest.seed,
    };
    config.validate().map_err(usage)?;

    let (kept, dropped) = clean(load_cqa(&args.cqa)?);
    for d in &dropped {
        log::warn!("dropped triplet {}: {}", d.id, d.reason);
    }
    if kept.is_empty() {
        return Err(usage(format!("{} has no complete triplets", args.cqa.display())));
    }
    let corpus = corpus_from_contexts(&kept, !args.no_dedupe)?;
    let queries = queries_from_triplets(&kept);
    let report = run_retrieval_bench(&corpus, &queries, &config)?;
    for t in &report.timings {
        log::info!(
            "{}: build {:.3}s, queries {:.3}s, {} empty",
            t.retriever,
            t.build.as_secs_f64(),
            t.queries.as_secs_f64(),
            t.empty_results
        );
    }
    emit(&render_report(&report, format), args.out.as_ref())
}

fn load_pairs(path: &Path) -> Result<Vec<ScorePair>, Failure> {
    let pairs = read_pairs_jsonl(path)?;
    if pairs.is_empty() {
        return Err(usage(format!("{} has no pairs", path.display())));
    }
    Ok(pairs)
}

fn provider_for(metrics: &[MetricId], args: &crate::ProviderArgs) -> Result<Option<Box<dyn EmbeddingProvider>>, Failure> {
    if metrics.iter().any(|m| m.needs_provider()) {
        Ok(Some(args.spec().build()?))
    } else {
        Ok(None)
    }
}

fn cmd_bench_generation(args: BenchGenerationArgs) -> CmdResult {
    require_file(&args.pre)?;
    for path in [&args.post, &args.provider.provider_file].into_iter().flatten() {
        require_file(path)?;
    }
    let format: ReportFormat = parse(&args.format)?;
    let metrics = metric_list(&args.metrics)?;
    let provider = provider_for(&metrics, &args.provider)?;
    let provider = provider.as_deref();

    let pre = run_generation_eval(&load_pairs(&args.pre)?, &metrics, provider)?;
    let text = match &args.post {
        None => render_report(&pre, format),
        Some(path) => {
            let post = run_generation_eval(&load_pairs(path)?, &metrics, provider)?;
            let mut report = ComparisonReport::from_evaluations(&pre, &post)?;
            report.seed = Some(args.seed);
            render_report(&report, format)
        }
    };
    emit(&text, args.out.as_ref())
}

fn cmd_stats(args: StatsArgs) -> CmdResult {
    require_file(&args.cqa)?;
    let (kept, dropped) = clean(load_cqa(&args.cqa)?);
    for d in &dropped {
        log::warn!("dropped triplet {}: {}", d.id, d.reason);
    }
    let stats = dataset_stats(&kept)?;
    let mut out = String::new();
    out.push_str(&format!("triplets\t{}\n", stats.triplet_count));
    out.push_str(&format!("dropped\t{}\n", dropped.len()));
    out.push_str(&format!("extractive\t{}\n", stats.extractive_count));
    out.push_str(&format!("abstractive\t{}\n", stats.abstractive_count));
    for (name, hist) in [
        ("context_tokens", &stats.context_lengths),
        ("question_tokens", &stats.question_lengths),
        ("answer_tokens", &stats.answer_lengths),
    ] {
        out.push_str(&format!(
            "{name}\tmin={}\tmax={}\tmean={:.3}\n",
            hist.min().unwrap_or(0),
            hist.max().unwrap_or(0),
            hist.mean()
        ));
    }
    for (gram, count) in stats.top_trigrams.iter().take(args.top) {
        out.push_str(&format!("trigram\t{}\t{count}\n", gram.join(" ")));
    }
    emit(&out, None)
}

fn cmd_score(args: ScoreArgs) -> CmdResult {
    if let Some(path) = &args.provider.provider_file {
        require_file(path)?;
    }
    let pairs = match (&args.pairs, &args.prediction, &args.reference) {
        (Some(path), _, _) => {
            require_file(path)?;
            load_pairs(path)?
        }
        (None, Some(p), Some(r)) => vec![ScorePair::new(p.as_str(), r.as_str()).with_id("pair")],
        _ => return Err(usage("give --prediction and --reference, or --pairs")),
    };
    let metrics = metric_list(&args.metrics)?;
    let provider = provider_for(&metrics, &args.provider)?;

    let mut csv = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| runtime(e.into());
    csv.write_record(["id", "metric", "value", "components"]).map_err(io)?;
    for pair in &pairs {
        for &metric in &metrics {
            let value = score_pair(metric, pair, provider.as_deref())
                .with_context(|| format!("pair {:?}, metric {metric}", pair.id))?;
            let components = value
                .components
                .iter()
                .map(|(k, v)| format!("{k}={v:.6}"))
                .collect::<Vec<_>>()
                .join(";");
            csv.write_record([
                pair.id.as_str(),
                metric.name(),
                &format!("{:.6}", value.value),
                &components,
            ])
            .map_err(io)?;
        }
    }
    let bytes = csv.into_inner().map_err(|e| runtime(anyhow!("{e}")))?;
    emit(&String::from_utf8_lossy(&bytes), None)
}

fn cmd_lora(args: LoraArgs) -> CmdResult {
    if args.rank == 0 || args.rank > args.d_in.min(args.d_out) {
        return Err(usage(format!(
            "--rank must be between 1 and {}",
            args.d_in.min(args.d_out)
        )));
    }
    let fit = demo_fit(args.d_out, args.d_in, args.rank, args.steps, args.lr, args.seed)?;
    let mut out = String::new();
    let every = (args.steps / 10).max(1);
    for (step, loss) in fit.losses.iter().enumerate() {
        if step % every == 0 || step == fit.losses.len() - 1 {
            out.push_str(&format!("step\t{step}\tloss\t{loss:.6}\n"));
        }
    }
    let first = fit.losses[0];
    let last = *fit.losses.last().unwrap_or(&first);
    let pct = trainable_pct(fit.trainable as f64, fit.total as f64)?;
    out.push_str(&format!(
        "trainable\t{}\ttotal\t{}\tpercent\t{pct:.2}\n",
        fit.trainable, fit.total
    ));
    if first != 0.0 {
        let reduction = improvement_pct(first, last, Direction::LowerBetter)?;
        out.push_str(&format!("loss_reduction_pct\t{reduction:.2}\n"));
    }
    out.push_str(&format!("w_drift\t{}\n", fit.w_drift));
    emit(&out, None)
}
