//! Extracts the 70 per-segment features and prints a few of them for every
//! segment of one synthetic graph.

use agmn::features::{extract_features, feature_names, FeatureSpec};
use agmn::graph::{build_individual_graph, PipelineConfig, ViewTag};
use agmn::synth::{generate, label_graph_from_truth, SynthConfig};

fn main() -> agmn::Result<()> {
    let sample = generate(&SynthConfig::default(), ViewTag::Lao, 3)?;
    let g = build_individual_graph(&sample.mask, &sample.gray, &PipelineConfig::default(), ViewTag::Lao)?;
    let mut g = label_graph_from_truth(&g, &sample)?;
    extract_features(&mut g, &sample.mask, &sample.gray, &FeatureSpec::default())?;

    let names = feature_names();
    let show = ["basic_centerline_length", "basic_radius_mean", "firstorder_mean", "glcm_contrast", "topology_degree0"];
    let idx: Vec<usize> = show.iter().filter_map(|s| names.iter().position(|n| n == s)).collect();
    print!("{:<6}", "label");
    for &i in &idx {
        print!(" {:>20}", names[i]);
    }
    println!();
    for n in &g.nodes {
        let v = n.feature_values()?;
        print!("{:<6}", n.label.map_or("?".into(), |l| l.to_string()));
        for &i in &idx {
            print!(" {:>20.4}", v[i]);
        }
        println!();
    }
    Ok(())
}
