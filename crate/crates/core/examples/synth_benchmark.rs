//! Writes a small synthetic benchmark: grayscale and mask PGMs, ground-truth
//! JSON, featured graphs and a manifest.
//!
//!     cargo run --example synth_benchmark -- /tmp/bench 40

use agmn::synth::{make_benchmark_items, write_benchmark, SynthConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> agmn::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = args.next().map_or_else(|| std::env::temp_dir().join("agmn_bench"), Into::into);
    let count: usize = args.next().and_then(|c| c.parse().ok()).unwrap_or(30);
    let seed = 7;

    let cfg = SynthConfig::default();
    let items = make_benchmark_items(count, &cfg, &Default::default(), &mut ChaCha8Rng::seed_from_u64(seed))?;
    let manifest = write_benchmark(&out, &items, seed, &cfg)?;
    for e in manifest.samples.iter().take(5) {
        println!("{:>3} {} seed {:>20} {}", e.index, e.view, e.seed, e.graph.display());
    }
    let faithful = items.iter().filter(|i| i.faithful).count();
    println!("{count} samples in {} ({faithful} with the intended topology)", out.display());
    Ok(())
}
