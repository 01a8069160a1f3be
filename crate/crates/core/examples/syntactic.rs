//! Query by example: mark anchors (`$`) and captures (`name:`) in an example
//! sentence, let the parse of that sentence define the pattern, and run it.

use exsearch::corpus::load_corpus;
use exsearch::index::Index;
use exsearch::matching::{Evaluator, Query};
use exsearch::qbe::{compile_markup, FixtureProvider};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = env!("CARGO_MANIFEST_DIR");
    let index = Index::build(load_corpus(format!("{dir}/fixtures/corpus.jsonl"))?);
    // Parses of the example sentences are read from a fixture file; a real
    // deployment would use `CommandProvider` with an external annotator.
    let provider = FixtureProvider::load(format!("{dir}/fixtures/parses.jsonl"))?;

    for markup in [
        "<>p1:[e]BMP-6 $induces the $phosphorylation $of <>p2:Smad1",
        "<>r:Diabetes is a $risk $factor for $stroke",
    ] {
        let graph = compile_markup(markup, &provider)?;
        println!("{markup}");
        for (i, node) in graph.nodes.iter().enumerate() {
            let constraint = node.constraint.as_ref().map(|c| c.to_string()).unwrap_or_else(|| "*".into());
            println!("  node {i}: {constraint} {}", node.capture.as_deref().unwrap_or(""));
        }
        for e in &graph.edges {
            println!("  edge {} -{}-> {}", e.from, e.label, e.to);
        }
        for m in Evaluator::new(&index).eval(&Query::Syntactic(graph))?.matches {
            let row: Vec<String> = m.captures.iter().map(|(k, v)| format!("{k}={}", v.text)).collect();
            println!("  -> {}", row.join(", "));
        }
    }
    Ok(())
}
