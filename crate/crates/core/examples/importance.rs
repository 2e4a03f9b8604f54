//! Ranks features by the accuracy lost when each one is zeroed at test time.

use agmn::eval::{importance_report, FoldSplit, XvalConfig};
use agmn::eval::cross_validate;
use agmn::synth::make_benchmark;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> agmn::Result<()> {
    let graphs = make_benchmark(40, &mut ChaCha8Rng::seed_from_u64(5))?.graphs;
    let mut cfg = XvalConfig { folds: 2, seed: 5, ..Default::default() };
    cfg.train.steps = 150;
    let res = cross_validate(&graphs, &cfg)?;
    let f = &res.folds[0];

    let split: &FoldSplit = &res.split;
    let tests = f.normalized(&graphs, &f.test_ids)?;
    let tpls = f.normalized(&graphs, &split.templates)?;
    let rows = importance_report(&f.model.cast::<f32>(), &tests.iter().collect::<Vec<_>>(), &tpls.iter().collect::<Vec<_>>())?;
    println!("baseline acc {:.4}", rows[0].baseline_acc);
    for r in rows.iter().take(10) {
        println!("{:<32} {:+.4}", r.name, r.delta);
    }
    Ok(())
}
