//! Ordered patterns with gaps, wildcards and repetitions.

use exsearch::corpus::load_corpus;
use exsearch::index::Index;
use exsearch::matching::{Evaluator, Query};
use exsearch::query::parse_sequential;

const QUERIES: &[&str] = &[
    "interspecies kind:...1-3... transmission",
    "novel coronavirus ( alias:...1-2... )",
    "a m:[tag=JJ]* risk factor",
    "risk factor for x:*",
];

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let index = Index::build(load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.jsonl"))?);
    let evaluator = Evaluator::new(&index);
    for text in QUERIES {
        let result = evaluator.eval(&Query::Sequential(parse_sequential(text)?))?;
        println!("{text}");
        for m in &result.matches {
            for (name, span) in &m.captures {
                println!("    {:<8} {name} = {:?}", m.sentence.sent_id, span.text);
            }
        }
    }
    Ok(())
}
