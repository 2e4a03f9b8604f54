//! Template holdout plus k-fold cross-validation on a synthetic benchmark,
//! with per-class metrics and the majority-class baseline.
//!
//!     cargo run --release --example cross_validate -- 1000

use agmn::eval::{cross_validate, majority_baseline, mean_std, weighted_metrics, XvalConfig};
use agmn::graph::BaseClass;
use agmn::synth::make_benchmark;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> agmn::Result<()> {
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(150);
    let graphs = make_benchmark(60, &mut ChaCha8Rng::seed_from_u64(7))?.graphs;

    let mut cfg = XvalConfig { folds: 3, seed: 7, ..Default::default() };
    cfg.train.steps = steps;
    let res = cross_validate(&graphs, &cfg)?;

    for r in res.reports() {
        println!("fold {}: acc {:.4}  f1 {:.4}  plain {:.4}", r.fold.unwrap(), r.acc, r.f1, r.plain_acc);
    }
    let (m, sd) = mean_std(&res.reports().iter().map(|r| r.acc).collect::<Vec<_>>());
    println!("weighted acc {m:.4} ± {sd:.4}");

    let pooled = res.pooled();
    let all = weighted_metrics(&pooled);
    for c in BaseClass::ALL {
        let k = all.class(c);
        println!("{:<4} n={:<4} acc {:.3} pre {:.3} rec {:.3}", c.name(), k.support, k.acc, k.pre, k.rec);
    }
    println!("majority baseline acc {:.4}", majority_baseline(&pooled).acc);
    Ok(())
}
