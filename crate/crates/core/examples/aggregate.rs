//! Frequency table over one capture, the summary view of a result set.

use exsearch::corpus::load_corpus;
use exsearch::index::Index;
use exsearch::matching::{Evaluator, Query};
use exsearch::query::parse_boolean;
use exsearch::results::aggregate_by_capture;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let index = Index::build(load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.jsonl"))?);
    let result = Evaluator::new(&index).eval(&Query::Boolean(parse_boolean("d:e=DISEASE ?stroke")?))?;
    let table = aggregate_by_capture(&result.matches, "d");
    for row in &table.rows {
        println!("{:>4}  {}", row.count, row.display);
    }
    println!("{} matches, {} without the capture", table.total, table.excluded);
    Ok(())
}
