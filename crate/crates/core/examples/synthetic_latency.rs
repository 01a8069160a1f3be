//! Generate a synthetic corpus and time random queries with and without the
//! inverted index.
//!
//!     cargo run --release --example synthetic_latency -- 100000

use std::time::{Duration, Instant};

use exsearch::index::Index;
use exsearch::matching::{EvalConfig, Evaluator, Query};
use exsearch::synth::{self, QueryGen, SynthConfig};
use rand::rngs::StdRng;
use rand::SeedableRng;

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20_000);
    let mut rng = StdRng::seed_from_u64(7);
    let t = Instant::now();
    let index = Index::build(synth::corpus(&mut rng, &SynthConfig::large(n)));
    println!("{} sentences generated and indexed in {:.2?}", index.len(), t.elapsed());

    let mut gen = QueryGen::new(index.corpus());
    gen.anchored = true;
    let scan = EvalConfig { use_index: false, ..EvalConfig::default() };
    for (label, make) in [
        ("boolean", &mut |g: &QueryGen, r: &mut StdRng| Query::Boolean(g.boolean(r)) as _),
        ("sequential", &mut |g: &QueryGen, r: &mut StdRng| Query::Sequential(g.sequential(r))),
        ("syntactic", &mut |g: &QueryGen, r: &mut StdRng| Query::Syntactic(g.syntactic(r))),
    ] as [(&str, &mut dyn FnMut(&QueryGen, &mut StdRng) -> Query); 3]
    {
        let (mut fast, mut slow) = (Vec::new(), Vec::new());
        for _ in 0..20 {
            let q = make(&gen, &mut rng);
            let t = Instant::now();
            Evaluator::new(&index).eval(&q)?;
            fast.push(t.elapsed());
            let t = Instant::now();
            Evaluator::with_config(&index, scan.clone()).eval(&q)?;
            slow.push(t.elapsed());
        }
        println!("{label:<11} median {:>9.2?} indexed, {:>9.2?} full scan", median(fast), median(slow));
    }
    Ok(())
}
