//! Accuracy of a trained model as leaf segments are randomly removed from
//! the test graphs.

use agmn::eval::{attack_levels, attack_sweep, cross_validate, XvalConfig};
use agmn::synth::make_benchmark;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> agmn::Result<()> {
    let graphs = make_benchmark(40, &mut ChaCha8Rng::seed_from_u64(9))?.graphs;
    let mut cfg = XvalConfig { folds: 2, seed: 9, ..Default::default() };
    cfg.train.steps = 150;
    let res = cross_validate(&graphs, &cfg)?;
    let f = &res.folds[0];

    let raw: Vec<_> = f.test_ids.iter().map(|&i| &graphs[i]).collect();
    let tpls = f.normalized(&graphs, &res.split.templates)?;
    let rep = attack_sweep(&f.model.cast::<f32>(), &raw, &f.normalization, &tpls.iter().collect::<Vec<_>>(), &attack_levels(), &[0, 1, 2])?;
    println!("clean acc {:.4}", rep.baseline.acc);
    print!("{}", rep.to_csv());
    println!("spearman(level, acc) = {:.3}", rep.trend());
    Ok(())
}
