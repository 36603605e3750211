use std::path::PathBuf;
use std::process::{Command, Output};

use regqa_core::corpus::{clean, corpus_from_contexts, dataset_stats, load_cqa};
use regqa_core::sparse::{Bm25Params, InvertedIndex, Scorer};
use regqa_core::textkit::AnalysisChain;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn regqa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regqa"))
        .args(args)
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path_str(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn index_reports_corpus_size() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("toy.spix");
    let o = regqa(&["index", "--cqa", path_str(&fixture("toy3.json")), "--out", path_str(&out)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("N\t3\n"));
    assert!(stderr(&o).is_empty());
    let index = InvertedIndex::load(&out).unwrap();
    assert_eq!(index.num_docs(), 3);
}

#[test]
fn index_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.spix"), dir.path().join("b.spix"));
    for out in [&a, &b] {
        let o = regqa(&["index", "--cqa", path_str(&fixture("synthetic50.json")), "-o", path_str(out)]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
}

#[test]
fn index_missing_file_is_usage_error() {
    let o = regqa(&["index", "--cqa", "/no/such/file.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("/no/such/file.json"));
    assert!(stdout(&o).is_empty());
}

#[test]
fn index_text_overlap_must_be_below_chunk_size() {
    let dir = tempfile::tempdir().unwrap();
    let doc = dir.path().join("code.txt");
    std::fs::write(&doc, "one two three four five six").unwrap();
    let o = regqa(&["index", "--text", path_str(&doc), "--chunk-words", "3", "--overlap", "3"]);
    assert_eq!(o.status.code(), Some(2));
    let o = regqa(&["index", "--text", path_str(&doc), "--chunk-words", "3", "--overlap", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("N\t3\n"));
}

#[test]
fn search_exit_on_toy_index() {
    let dir = tempfile::tempdir().unwrap();
    let idx = dir.path().join("toy.spix");
    regqa(&["index", "--cqa", path_str(&fixture("toy3.json")), "-o", path_str(&idx)]);
    let o = regqa(&["search", "exit", "--index", path_str(&idx), "-r", "bm25", "-k", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let index = InvertedIndex::load(&idx).unwrap();
    let expected = index.search("exit", 1, &Scorer::Bm25(Bm25Params::default())).unwrap();
    assert_eq!(expected.hits[0].id, "C2");
    assert_eq!(stdout(&o), format!("1\tC2\t{:.6}\n", expected.hits[0].score));
}

#[test]
fn search_from_corpus_with_each_retriever() {
    let cqa = fixture("toy3.json");
    for r in ["tfidf", "bm25", "engine", "phrase", "flat_dot", "flat_cosine", "forest"] {
        let o = regqa(&["search", "fire exit", "--cqa", path_str(&cqa), "-r", r, "-k", "2"]);
        assert_eq!(o.status.code(), Some(0), "{r}: {}", stderr(&o));
        let out = stdout(&o);
        assert!(out.lines().count() >= 1 && out.lines().count() <= 2, "{r}: {out}");
        assert!(out.lines().next().unwrap().starts_with("1\tC2\t"), "{r}: {out}");
    }
}

#[test]
fn search_usage_errors() {
    let cqa = fixture("toy3.json");
    let cqa = path_str(&cqa);
    let o = regqa(&["search", "exit", "--cqa", cqa, "-k", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = regqa(&["search", "!!! ...", "--cqa", cqa]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no searchable terms"));
    let o = regqa(&["search", "exit", "--cqa", cqa, "-r", "grep"]);
    assert_eq!(o.status.code(), Some(2));
    let o = regqa(&["search", "exit"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corrupt_index_is_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let idx = dir.path().join("bad.spix");
    std::fs::write(&idx, b"not an index").unwrap();
    let o = regqa(&["search", "exit", "--index", path_str(&idx)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bench_retrieval_matches_golden() {
    let golden = std::fs::read_to_string(fixture("golden/synthetic50_retrieval.csv")).unwrap();
    let o = regqa(&["bench", "retrieval", "--cqa", path_str(&fixture("synthetic50.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), golden);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.csv");
    let o = regqa(&[
        "--threads", "2", "bench", "retrieval", "--cqa", path_str(&fixture("synthetic50.json")),
        "--seed", "42", "--out", path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read_to_string(out).unwrap(), golden);
}

#[test]
fn bench_retrieval_markdown_echoes_seed() {
    let o = regqa(&[
        "bench", "retrieval", "--cqa", path_str(&fixture("toy3.json")), "--retrievers", "bm25,tfidf",
        "--k", "1,2", "--metric", "f1", "--format", "md", "--seed", "7",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("seed 7"));
    assert_eq!(out.lines().filter(|l| l.starts_with("| bm25") || l.starts_with("| tfidf")).count(), 4);
}

#[test]
fn bench_bad_config_is_usage_error() {
    let cqa = fixture("toy3.json");
    let o = regqa(&["bench", "retrieval", "--cqa", path_str(&cqa), "--k", "3,1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = regqa(&["bench", "retrieval", "--cqa", path_str(&cqa), "--metric", "bleu"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn conflicting_provider_flags() {
    let o = regqa(&[
        "bench", "retrieval", "--cqa", path_str(&fixture("toy3.json")), "--provider-hashed", "64",
        "--provider-file", "vectors.jsonl",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

fn write_pairs(dir: &std::path::Path, name: &str, pairs: &[(&str, &str)]) -> PathBuf {
    let path = dir.join(name);
    let body: String = pairs
        .iter()
        .enumerate()
        .map(|(i, (p, r))| format!("{{\"id\": \"q{i}\", \"prediction\": \"{p}\", \"reference\": \"{r}\"}}\n"))
        .collect();
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn bench_generation_identical_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = write_pairs(
        dir.path(),
        "same.jsonl",
        &[("fire doors close", "fire doors close"), ("exit stairs need rails", "exit stairs need rails")],
    );
    let o = regqa(&["bench", "generation", "--pre", path_str(&pairs), "--metrics", "f1,bleu,rouge1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "metric,value,scored,excluded\nf1,1.000,2,0\nbleu,1.000,2,0\nrouge1,1.000,2,0\n"
    );
}

#[test]
fn bench_generation_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let pre = write_pairs(dir.path(), "pre.jsonl", &[("fire doors", "fire doors close automatically")]);
    let post = write_pairs(dir.path(), "post.jsonl", &[("fire doors close", "fire doors close automatically")]);
    let o = regqa(&[
        "bench", "generation", "--pre", path_str(&pre), "--post", path_str(&post), "--metrics", "rouge1",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "metric,pre,post,improvement\nrouge1,0.500,0.750,50.00\n");
    let o = regqa(&[
        "bench", "generation", "--pre", path_str(&pre), "--post", path_str(&post), "--metrics", "bert",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let names: Vec<String> = stdout(&o).lines().skip(1).map(|l| l.split(',').next().unwrap().to_string()).collect();
    assert_eq!(names, ["bert_precision", "bert_recall", "bert_f1"]);
}

#[test]
fn stats_match_library() {
    let path = fixture("toy3.json");
    let o = regqa(&["stats", path_str(&path)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let (kept, _) = clean(load_cqa(&path).unwrap());
    let stats = dataset_stats(&kept).unwrap();
    let out = stdout(&o);
    assert!(out.starts_with(&format!(
        "triplets\t{}\ndropped\t0\nextractive\t{}\nabstractive\t{}\n",
        stats.triplet_count, stats.extractive_count, stats.abstractive_count
    )));
    assert_eq!(stats.triplet_count, 3);
}

#[test]
fn stats_empty_array_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.json");
    std::fs::write(&path, "[]").unwrap();
    let o = regqa(&["stats", path_str(&path)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!stderr(&o).is_empty());
}

#[test]
fn score_single_pair() {
    let o = regqa(&["score", "--prediction", "fire door", "--reference", "fire exit", "--metrics", "f1,rouge1"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(
        stdout(&o),
        "id,metric,value,components\n\
         pair,f1,0.500000,f1=0.500000;precision=0.500000;recall=0.500000\n\
         pair,rouge1,0.500000,\n"
    );
}

#[test]
fn score_pairs_file_all_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = write_pairs(dir.path(), "p.jsonl", &[("the the door", "the door"), ("a b c", "a b c d")]);
    let o = regqa(&["score", "--pairs", path_str(&pairs)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 1 + 2 * 6);
    assert!(out.contains("q1,bleu,0.750000,"));
    assert!(out.contains("q0,rouge1,1.000000,"));
}

#[test]
fn score_rejects_empty_reference() {
    let o = regqa(&["score", "--prediction", "door", "--reference", "", "--metrics", "f1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn lora_demo_runs() {
    let o = regqa(&["lora-demo", "--d-in", "8", "--d-out", "8", "--rank", "2", "--steps", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("trainable\t32\ttotal\t96"));
    assert!(out.contains("w_drift\t0\n"));
    assert_eq!(out, stdout(&regqa(&["lora-demo", "--d-in", "8", "--d-out", "8", "--rank", "2", "--steps", "50"])));
    let o = regqa(&["lora-demo", "--rank", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn embeddings_round_trip_through_search() {
    let dir = tempfile::tempdir().unwrap();
    let emb = dir.path().join("chunks.jsonl");
    let cqa = fixture("toy3.json");
    let o = regqa(&["index", "--cqa", path_str(&cqa), "--embeddings-out", path_str(&emb), "--provider-hashed", "64"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let from_file = regqa(&[
        "search", "fire exit", "--embeddings", path_str(&emb), "-r", "flat_cosine", "--provider-hashed", "64",
    ]);
    let from_corpus = regqa(&["search", "fire exit", "--cqa", path_str(&cqa), "-r", "flat_cosine", "--provider-hashed", "64"]);
    assert_eq!(from_file.status.code(), Some(0), "{}", stderr(&from_file));
    assert_eq!(stdout(&from_file), stdout(&from_corpus));
}

#[test]
fn pooled_corpus_matches_library() {
    let path = fixture("synthetic50.json");
    let (kept, _) = clean(load_cqa(&path).unwrap());
    let corpus = corpus_from_contexts(&kept, true).unwrap();
    let index = InvertedIndex::build(&corpus, &AnalysisChain::index()).unwrap();
    let o = regqa(&["index", "--cqa", path_str(&path)]);
    assert_eq!(
        stdout(&o),
        format!("N\t{}\navg_len\t{:.6}\nvocabulary\t{}\n", index.num_docs(), index.avg_len(), index.vocabulary_size())
    );
}
