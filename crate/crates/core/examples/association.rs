//! Builds the association graph of two synthetic graphs of the same view and
//! its ground-truth correspondence matrix.

use agmn::assoc::{build_association, ground_truth};
use agmn::graph::ViewTag;
use agmn::synth::{generate, sample_graph, SynthConfig};

fn main() -> agmn::Result<()> {
    let cfg = SynthConfig::default();
    let a = sample_graph(&generate(&cfg, ViewTag::Rao, 1)?, &Default::default(), &Default::default())?;
    let b = sample_graph(&generate(&cfg, ViewTag::Rao, 2)?, &Default::default(), &Default::default())?;
    let (g1, g2) = if a.n() <= b.n() { (&a, &b) } else { (&b, &a) };

    let ag = build_association(g1, g2)?;
    println!("G1: {} nodes / {} edges, G2: {} nodes / {} edges", g1.n(), g1.n_edges(), g2.n(), g2.n_edges());
    println!("association graph: {} vertices, {} edges, {} features per vertex", ag.n_vertices(), ag.edges.len(), 2 * ag.feature_dim());

    let y = ground_truth(g1, g2)?;
    for (i, n) in g1.nodes.iter().enumerate() {
        let hit = (0..y.n2).find(|&k| y.get(i, k) == 1.0);
        let other = hit.and_then(|k| g2.nodes[k].label).map_or("-".into(), |l| l.to_string());
        println!("{:<5} -> {other}", n.label.map_or("?".into(), |l| l.to_string()));
    }
    Ok(())
}
