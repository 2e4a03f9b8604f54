//! Labels held-out graphs by voting over same-view templates and writes a
//! colour overlay of the first one.

use agmn::agmn::AgmnConfig;
use agmn::eval::{fit_normalization, normalize_graphs, overlay, template_holdout};
use agmn::image::write_ppm;
use agmn::runtime::{label_graph, train, Dataset, TrainConfig};
use agmn::synth::{make_benchmark_items, SynthConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> agmn::Result<()> {
    let items = make_benchmark_items(40, &SynthConfig::default(), &Default::default(), &mut ChaCha8Rng::seed_from_u64(2))?;
    let raw: Vec<_> = items.iter().map(|i| i.graph.clone()).collect();
    let (templates, rest) = template_holdout(&raw, 0.2)?;
    let rest: Vec<usize> = rest.concat();
    let (train_ids, test_ids) = rest.split_at(rest.len() * 3 / 4);

    let mut graphs = raw.clone();
    let stats = fit_normalization(&train_ids.iter().map(|&i| &graphs[i]).collect::<Vec<_>>())?;
    normalize_graphs(&mut graphs, &stats)?;
    let d = Dataset::with_roles(graphs, train_ids.to_vec(), test_ids.to_vec(), templates.clone())?;
    let model = AgmnConfig { hidden: 32, depth: 3, n_mp: 3, share_steps: true };
    let t = train(&d, &TrainConfig { steps: 300, batch: 16, ..Default::default() }, &model)?;

    let tpl: Vec<_> = templates.iter().map(|&i| &d.graphs[i]).collect();
    for &i in test_ids {
        let g = &d.graphs[i];
        let l = label_graph(&t.model, g, &tpl)?;
        let right = g.nodes.iter().zip(&l.labels).filter(|(n, p)| n.label.map(|x| x.base) == p.map(|x| x.base)).count();
        println!("graph {i:>2} ({}): {right}/{} segments correct", g.view, g.n());
    }

    let first = test_ids[0];
    let l = label_graph(&t.model, &d.graphs[first], &tpl)?;
    let img = &items[first].sample.gray;
    let path = std::env::temp_dir().join("agmn_overlay.ppm");
    write_ppm(&path, img.width(), img.height(), &overlay(img, &raw[first], &l.labels)?)?;
    println!("overlay written to {}", path.display());
    Ok(())
}
