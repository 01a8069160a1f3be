//! Run the HTTP service over the fixture corpus.
//!
//!     cargo run --example serve -- 127.0.0.1:8080
//!     curl -s localhost:8080/query -d '{"mode":"boolean","query":"r:e=DISEASE stroke"}' \
//!         -H 'content-type: application/json'

use std::sync::Arc;

use exsearch::corpus::load_corpus;
use exsearch::index::Index;
use exsearch::matching::EvalConfig;
use exsearch::qbe::{FixtureProvider, ParseProvider};
use exsearch::service::{serve, Service};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = env!("CARGO_MANIFEST_DIR");
    let bind = std::env::args().nth(1).unwrap_or_else(|| "127.0.0.1:8080".into());
    let provider: Arc<dyn ParseProvider> = Arc::new(FixtureProvider::load(format!("{dir}/fixtures/parses.jsonl"))?);
    let index = Index::build(load_corpus(format!("{dir}/fixtures/corpus.jsonl"))?);
    let service = Service::new(index, Some(provider), EvalConfig::default());

    let listener = tokio::net::TcpListener::bind(&bind).await?;
    println!("listening on http://{}", listener.local_addr()?);
    serve(listener, service).await?;
    Ok(())
}
