//! Build an index once, save it, and load it back with its checksum verified.

use exsearch::corpus::load_corpus;
use exsearch::index::Index;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::temp_dir().join("exsearch-example.idx");
    let built = Index::build(load_corpus(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/corpus.jsonl"))?);
    built.save(&path)?;
    let size = std::fs::metadata(&path)?.len();

    let loaded = Index::load(&path)?;
    println!("{}: {size} bytes, {} sentences, version {}", path.display(), loaded.len(), loaded.version());
    assert_eq!(built.version(), loaded.version());

    let mut bytes = std::fs::read(&path)?;
    let last = bytes.len() - 1;
    bytes[last] ^= 0xff;
    std::fs::write(&path, bytes)?;
    match Index::load(&path) {
        Ok(_) => println!("corruption went unnoticed"),
        Err(e) => println!("corrupted copy rejected: {e}"),
    }
    std::fs::remove_file(path)?;
    Ok(())
}
