//! Runs the graph pipeline on a synthetic angiogram and prints the segment
//! tree with ground-truth labels.

use agmn::graph::{build_individual_graph, PipelineConfig, ViewTag};
use agmn::synth::{generate, label_graph_from_truth, SynthConfig};

fn main() -> agmn::Result<()> {
    let sample = generate(&SynthConfig::default(), ViewTag::Rao, 42)?;
    let g = build_individual_graph(&sample.mask, &sample.gray, &PipelineConfig::default(), ViewTag::Rao)?;
    let g = label_graph_from_truth(&g, &sample)?;

    println!("{} segments, {} edges", g.n(), g.n_edges());
    for n in &g.nodes {
        let label = n.label.map_or("?".to_string(), |l| l.to_string());
        println!("{:>2} {:<5} {:>4} px  mean diameter {:.1} px", n.id, label, n.pixels.len(), n.mean_diameter());
    }
    for &(a, b) in &g.edges {
        println!("{a} -- {b}");
    }
    Ok(())
}
