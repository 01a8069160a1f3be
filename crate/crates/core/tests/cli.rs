use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use exsearch::corpus::load_corpus;
use exsearch::index::Index;
use exsearch::matching::{EvalConfig, Evaluator, Query};
use exsearch::qbe::{FixtureProvider, ParseProvider};
use exsearch::query::parse_boolean;
use exsearch::results::aggregate_by_capture;
use exsearch::service::Service;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const CORPUS: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.jsonl");
const PARSES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/parses.jsonl");

fn exsearch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_exsearch"))
        .args(args)
        .env_remove("EXSEARCH_INDEX")
        .env_remove("EXSEARCH_CORPUS")
        .env_remove("EXSEARCH_PARSE_FIXTURES")
        .env_remove("EXSEARCH_ANNOTATOR_CMD")
        .output()
        .expect("binary runs")
}

fn stdout_ok(out: Output) -> String {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn saved_index_answers_like_the_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let idx = dir.path().join("fixture.idx");
    stdout_ok(exsearch(&["index", "--corpus", CORPUS, "--out", path_str(&idx)]));
    let query = ["r:e=DISEASE risk factor", "--limit", "100"];
    let from_index = stdout_ok(exsearch(&[&["query", "--index", path_str(&idx)], &query[..]].concat()));
    let from_corpus = stdout_ok(exsearch(&[&["query", "--corpus", CORPUS], &query[..]].concat()));
    assert_eq!(from_index, from_corpus);
    assert!(from_index.lines().any(|l| l == "pmid:2002\ts03\t[r:Diabetes] is a risk factor for stroke."), "{from_index}");
}

#[test]
fn export_is_byte_identical_to_the_service() {
    let query = "<>p1:[e]BMP-6 $induces the $phosphorylation $of <>p2:Smad1";
    let cli = stdout_ok(exsearch(&["export", "--corpus", CORPUS, "--parse-fixtures", PARSES, "--mode", "syntactic", query]));

    let provider: Arc<dyn ParseProvider> = Arc::new(FixtureProvider::load(PARSES).unwrap());
    let router = Service::new(Index::build(load_corpus(CORPUS).unwrap()), Some(provider), EvalConfig::default()).router();
    let body = json!({"mode": "syntactic", "query": query}).to_string();
    let req = Request::post("/export").header(header::CONTENT_TYPE, "application/json").body(Body::from(body)).unwrap();
    let resp = tokio::runtime::Runtime::new().unwrap().block_on(async {
        let resp = router.oneshot(req).await.unwrap();
        assert_eq!(resp.status(), StatusCode::OK);
        resp.into_body().collect().await.unwrap().to_bytes()
    });
    assert_eq!(cli.as_bytes(), &resp[..]);
    assert_eq!(cli.lines().count(), 3);
}

#[test]
fn export_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hits.tsv");
    let printed = stdout_ok(exsearch(&["export", "--corpus", CORPUS, "d:e=DISEASE"]));
    stdout_ok(exsearch(&["export", "--corpus", CORPUS, "--out", path_str(&out), "d:e=DISEASE"]));
    assert_eq!(std::fs::read_to_string(out).unwrap(), printed);
}

#[test]
fn aggregate_json_matches_library() {
    let out = stdout_ok(exsearch(&["aggregate", "--corpus", CORPUS, "--capture", "d", "--json", "d:e=DISEASE"]));
    let v: Value = serde_json::from_str(&out).unwrap();
    let index = Index::build(load_corpus(CORPUS).unwrap());
    let eval = Evaluator::new(&index).eval(&Query::Boolean(parse_boolean("d:e=DISEASE").unwrap())).unwrap();
    let table = aggregate_by_capture(&eval.matches, "d");
    let mut want = serde_json::to_value(&table).unwrap();
    want["index_version"] = json!(index.version());
    assert_eq!(v, want);

    let out = exsearch(&["aggregate", "--corpus", CORPUS, "--capture", "d", "d:e=DISEASE"]);
    assert_eq!(
        String::from_utf8_lossy(&out.stderr).trim(),
        format!("{} distinct values over {} matches, 0 without `d`", table.rows.len(), table.total)
    );
    let text = stdout_ok(out);
    let counts: Vec<usize> = text.lines().map(|l| l.split('\t').next().unwrap().parse().unwrap()).collect();
    assert_eq!(counts, table.rows.iter().map(|r| r.count).collect::<Vec<_>>());
}

#[test]
fn tag_rebuilds_with_new_entity_type() {
    let dir = tempfile::tempdir().unwrap();
    let lexicon = dir.path().join("aliases.txt");
    std::fs::write(&lexicon, "nCov-19\nSARS-COV-ii\n2019 nCoV\nCOVID-19\nnovel coronavirus\n").unwrap();
    let idx = dir.path().join("tagged.idx");
    let jsonl = dir.path().join("tagged.jsonl");
    stdout_ok(exsearch(&[
        "tag",
        "--corpus",
        CORPUS,
        "--lexicon",
        path_str(&lexicon),
        "--type-name",
        "COVID-19",
        "--out",
        path_str(&idx),
        "--corpus-out",
        path_str(&jsonl),
    ]));
    let hits = stdout_ok(exsearch(&["query", "--index", path_str(&idx), "--limit", "100", "a:e=COVID-19"]));
    assert!(hits.contains("[a:nCov-19]"), "{hits}");
    assert!(hits.contains("[a:2019 nCoV]"), "{hits}");
    let reloaded = stdout_ok(exsearch(&["query", "--corpus", path_str(&jsonl), "--limit", "100", "a:e=COVID-19"]));
    assert_eq!(hits, reloaded);

    let out = exsearch(&["tag", "--corpus", CORPUS, "--entry", "SARS-CoV-II", "--type-name", "VIRUS", "--out", path_str(&idx)]);
    assert!(out.status.success());
    let entries = String::from_utf8(out.stderr).unwrap();
    assert!(entries.starts_with("tagged 1 entries as VIRUS, version "), "{entries}");
    let hits = stdout_ok(exsearch(&["query", "--index", path_str(&idx), "v:e=VIRUS"]));
    assert!(hits.contains("[v:SARS-CoV-II]"), "{hits}");
}

#[test]
fn errors_use_the_service_body_and_exit_codes() {
    let out = exsearch(&["query", "--corpus", CORPUS, "lemma="]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    let json_part = stderr.trim().strip_prefix("error: ").expect("error prefix");
    let v: Value = serde_json::from_str(json_part).unwrap();
    assert_eq!(v["error"]["kind"], "parse");

    let out = exsearch(&["query", "--corpus", "/no/such/file.jsonl", "stroke"]);
    assert_eq!(out.status.code(), Some(2));
    let out = exsearch(&["query", "--index", "/dev/null", "stroke"]);
    assert_eq!(out.status.code(), Some(2));
}
