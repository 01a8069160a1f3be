//! Tag every surface form of a lexicon as a new entity type, rebuild the
//! index, and search for the type instead of each alias.

use exsearch::corpus::{apply_entity_lexicon, load_corpus};
use exsearch::index::Index;
use exsearch::matching::{Evaluator, Query};
use exsearch::query::parse_boolean;
use exsearch::results::aggregate_by_capture;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let corpus = load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.jsonl"))?;
    let aliases = ["nCov-19", "SARS-COV-ii", "2019 nCoV", "COVID-19", "novel coronavirus"];
    let before = Index::build(corpus.clone());
    let after = Index::build(apply_entity_lexicon(&corpus, &aliases, "COVID-19")?);
    println!("index version {} -> {}", before.version(), after.version());

    let query = Query::Boolean(parse_boolean("a:e=COVID-19")?);
    let result = Evaluator::new(&after).eval(&query)?;
    for row in aggregate_by_capture(&result.matches, "a").rows {
        println!("{:>3}  {}", row.count, row.display);
    }
    Ok(())
}
