//! Stream every match of a query as TSV and read it back.

use std::io::Write;

use exsearch::corpus::load_corpus;
use exsearch::index::Index;
use exsearch::matching::{EvalConfig, MatchStream, Prepared, Query};
use exsearch::query::parse_sequential;
use exsearch::results::{read_tsv, write_tsv};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let index = Index::build(load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.jsonl"))?);
    let query = Query::Sequential(parse_sequential("d:e=DISEASE is a ?m:major risk factor for t:*")?);
    let stream = MatchStream::new(&index, Prepared::new(&query)?, EvalConfig::default());
    let names = stream.capture_names().to_vec();

    let mut tsv = Vec::new();
    let rows = write_tsv(&mut tsv, &names, stream, &index)?;
    std::io::stdout().write_all(&tsv)?;

    let (header, parsed) = read_tsv(tsv.as_slice())?;
    assert_eq!(header, names);
    assert_eq!(parsed.len(), rows);
    eprintln!("{rows} rows, columns per capture: name, text, token and char offsets");
    Ok(())
}
