//! Trains a matching network on a small synthetic benchmark and saves the
//! checkpoint with its feature normalization.
//!
//!     cargo run --release --example train -- 400

use agmn::agmn::{AgmnConfig, Checkpoint};
use agmn::eval::{fit_normalization, normalize_graphs, template_holdout};
use agmn::runtime::{train, Dataset, TrainConfig};
use agmn::synth::make_benchmark;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> agmn::Result<()> {
    env_logger::init();
    let steps: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);

    let mut graphs = make_benchmark(40, &mut ChaCha8Rng::seed_from_u64(1))?.graphs;
    let (templates, rest) = template_holdout(&graphs, 0.15)?;
    let train_ids: Vec<usize> = rest.concat();
    let stats = fit_normalization(&train_ids.iter().map(|&i| &graphs[i]).collect::<Vec<_>>())?;
    normalize_graphs(&mut graphs, &stats)?;

    let d = Dataset::with_roles(graphs, train_ids, vec![], templates)?;
    let cfg = TrainConfig { steps, batch: 16, ..Default::default() };
    let model = AgmnConfig { hidden: 32, depth: 3, n_mp: 3, share_steps: true };
    let t = train(&d, &cfg, &model)?;
    for r in t.log.rows.iter().step_by((steps as usize / 10).max(1)) {
        println!("step {:>5}  lr {:.3e}  loss {:.3}", r.step, r.lr, r.loss);
    }

    let path = std::env::temp_dir().join("agmn_example_model.json");
    Checkpoint::new(&t.model, Some(stats)).with_optimizer(&t.optimizer).save(&path)?;
    println!("saved {}", path.display());
    Ok(())
}
