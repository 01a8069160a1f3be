//! Unordered term queries: every sentence containing disjoint tokens for all
//! required terms, with optional terms captured when present.
//!
//!     cargo run --example boolean -- "r:e=DISEASE risk ?f:factor"

use exsearch::corpus::load_corpus;
use exsearch::index::Index;
use exsearch::matching::{Evaluator, Query};
use exsearch::query::parse_boolean;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let text = std::env::args().nth(1).unwrap_or_else(|| "r:e=DISEASE risk ?f:factor".into());
    let index = Index::build(load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.jsonl"))?);
    let query = parse_boolean(&text)?;
    println!("parsed as `{query}`");

    let result = Evaluator::new(&index).eval(&Query::Boolean(query))?;
    for m in &result.matches {
        let captures: Vec<String> = m.captures.iter().map(|(name, span)| format!("{name}={}", span.text)).collect();
        println!("{}/{}  {}", m.sentence.doc_id, m.sentence.sent_id, captures.join("  "));
    }
    println!("{} matches from {} candidate sentences", result.matches.len(), result.candidates);
    Ok(())
}
