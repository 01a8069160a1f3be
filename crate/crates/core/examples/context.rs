//! Restrict a query by document metadata, either inline after `#d` or as a
//! separate context string.

use exsearch::api::{self, QueryRequest};
use exsearch::corpus::load_corpus;
use exsearch::index::Index;
use exsearch::matching::{EvalConfig, Mode};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let index = Index::build(load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.jsonl"))?);
    let config = EvalConfig::default();
    let requests = [
        (Some("+year:[2015 TO 2020]"), "stroke"),
        (None, "stroke #d mesh:Child -mesh:Adult"),
        (Some("+title:/corona.*/"), "a:e=DISEASE"),
        (Some("+venue:virology -mesh:adult"), "coronavirus"),
    ];
    for (context, query) in requests {
        let mut request = QueryRequest::new(Mode::Boolean, query);
        request.context = context.map(str::to_string);
        request.expand_context.title = true;
        match api::run_query(&index, &request, None, &config) {
            Ok(resp) => {
                println!("{query} {}  ->  {} sentences", context.unwrap_or(""), resp.matched_sentences);
                for hit in resp.hits {
                    println!("    {} ({:?}) {}", hit.doc_id, hit.doc.year, hit.doc.title.unwrap_or_default());
                }
            }
            Err(e) => println!("{query}: {}", serde_json::to_string(&e.body())?),
        }
    }
    Ok(())
}
