//! Command-line front end. Every command that writes a run directory also
//! writes the effective configuration to `config.json` inside it.
//!
//! Exit codes: 0 success, 1 other failure, 2 invalid or missing input,
//! 3 empty graph, 4 disconnected vessel tree, 5 non-finite training loss.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agmn::{AgmnConfig, Checkpoint};
use crate::error::{Error, Result};
use crate::eval::{
    attack_sweep, cross_validate, evaluate, fit_normalization, importance_report, majority_baseline, normalize_graphs,
    overlay, parse_levels, reports_csv, template_holdout, weighted_metrics, XvalConfig,
};
use crate::features::{extract_features, FeatureSpec, Family};
use crate::graph::{build_individual_graph, IndividualGraph, PipelineConfig, ViewTag};
use crate::image::{write_ppm, BinaryMask, GrayImage};
use crate::runtime::{label_graph, train, Dataset, TrainConfig};
use crate::synth::{load_benchmark, make_benchmark_items, write_benchmark, Manifest, SynthConfig};

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "AGMN_CONFIG";

/// Everything a run depends on. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub pipeline: PipelineConfig,
    pub features: FeatureSpec,
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub model: AgmnConfig,
    pub template_fraction: f64,
    pub folds: usize,
    /// Corruption draws per level in `attack`.
    pub attack_seeds: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            pipeline: PipelineConfig::default(),
            features: FeatureSpec::default(),
            synth: SynthConfig::default(),
            train: TrainConfig::default(),
            model: AgmnConfig::default(),
            template_fraction: 0.15,
            folds: 5,
            attack_seeds: 3,
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// The file given on the command line, else the one named by
    /// `AGMN_CONFIG`, else defaults.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        match path.map(Path::to_path_buf).or(env) {
            Some(p) => Self::from_json(&std::fs::read_to_string(&p)?),
            None => Ok(Self::default()),
        }
    }

    fn xval(&self) -> XvalConfig {
        XvalConfig {
            template_fraction: self.template_fraction,
            folds: self.folds,
            seed: self.seed,
            train: self.train,
            model: self.model,
        }
    }

    fn echo(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.json"), serde_json::to_string_pretty(self)?)?;
        Ok(())
    }
}

#[derive(Debug, Parser)]
#[command(name = "agmn", version, about = "Coronary artery labeling by association-graph matching")]
pub struct Cli {
    /// Worker threads (1 gives bit-exact reruns).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON run configuration; defaults to $AGMN_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic benchmark directory.
    Synth {
        #[arg(long, default_value_t = 120)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build a featured graph from a mask and its grayscale image.
    BuildGraph {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        gray: PathBuf,
        /// Millimetres per pixel.
        #[arg(long, default_value_t = 0.3)]
        spacing: f64,
        #[arg(long, default_value = "RAO")]
        view: ViewTag,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on the non-template graphs of a benchmark.
    Train {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Label one graph against a directory of templates.
    Label {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        /// Benchmark directory or a directory of graph JSON files.
        #[arg(long)]
        templates: PathBuf,
        /// Grayscale image for a colour overlay.
        #[arg(long)]
        gray: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a model on the non-template graphs of a benchmark.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Accuracy drop when each feature is zeroed.
    Importance {
        #[arg(long)]
        model: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Accuracy under random removal of leaf segments.
    Attack {
        #[arg(long)]
        model: PathBuf,
        /// `lo..hi` in steps of 0.025, or a comma list.
        #[arg(long, default_value = "0.05..0.20")]
        levels: String,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Template holdout plus k-fold cross-validation.
    Xval {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub steps: Option<u64>,
    #[arg(long = "template-frac")]
    pub template_frac: Option<f64>,
    #[arg(long)]
    pub folds: Option<usize>,
}

impl RunArgs {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(s) = self.steps {
            cfg.train.steps = s;
        }
        if let Some(f) = self.template_frac {
            cfg.template_fraction = f;
        }
        if let Some(k) = self.folds {
            cfg.folds = k;
        }
    }
}

/// Stable process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::InvalidInput(_) | Error::LayoutMismatch { .. } | Error::Json(_) | Error::Image(_) | Error::NoSameViewPair => 2,
        Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
        Error::EmptyGraph => 3,
        Error::Disconnected { .. } => 4,
        Error::NonFiniteLoss { .. } => 5,
        _ => 1,
    }
}

/// Parses arguments, runs the command and returns the exit code.
pub fn main_with_args<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidInput("--threads must be at least 1".into()));
        }
        // a pool may already exist when called twice in one process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let mut cfg = RunConfig::resolve(cli.config.as_deref())?;
    match &cli.command {
        Command::Synth { count, seed, out } => {
            if let Some(s) = seed {
                cfg.seed = *s;
            }
            synth(&cfg, *count, out)
        }
        Command::BuildGraph { mask, gray, spacing, view, out } => build_graph(&cfg, mask, gray, *spacing, *view, out),
        Command::Train { run } => {
            run.apply(&mut cfg);
            train_cmd(&cfg, &run.data, &run.out)
        }
        Command::Label { model, graph, templates, gray, out } => label_cmd(&cfg, model, graph, templates, gray.as_deref(), out),
        Command::Eval { model, run } => {
            run.apply(&mut cfg);
            eval_cmd(&cfg, model, &run.data, &run.out)
        }
        Command::Importance { model, run } => {
            run.apply(&mut cfg);
            importance_cmd(&cfg, model, &run.data, &run.out)
        }
        Command::Attack { model, levels, run } => {
            run.apply(&mut cfg);
            attack_cmd(&cfg, model, &parse_levels(levels)?, &run.data, &run.out)
        }
        Command::Xval { run } => {
            run.apply(&mut cfg);
            xval_cmd(&cfg, &run.data, &run.out)
        }
    }
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(v)?)?;
    Ok(())
}

fn synth(cfg: &RunConfig, count: usize, out: &Path) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let items = make_benchmark_items(count, &cfg.synth, &cfg.features, &mut rng)?;
    cfg.echo(out)?;
    let m = write_benchmark(out, &items, cfg.seed, &cfg.synth)?;
    let faithful = m.samples.iter().filter(|s| s.faithful).count();
    println!("{} samples written to {} ({faithful} with exact topology)", m.samples.len(), out.display());
    Ok(())
}

fn build_graph(cfg: &RunConfig, mask: &Path, gray: &Path, spacing: f64, view: ViewTag, out: &Path) -> Result<()> {
    let m = BinaryMask::read_pgm(mask)?;
    let g = GrayImage::read_pgm(gray, spacing)?;
    let mut graph = build_individual_graph(&m, &g, &cfg.pipeline, view)?;
    extract_features(&mut graph, &m, &g, &cfg.features)?;
    graph.provenance.source = Some(mask.display().to_string());
    graph.save(out)?;
    println!("{} segments, {} edges", graph.n(), graph.n_edges());
    Ok(())
}

/// Template and non-template graphs of a benchmark.
fn split_benchmark(cfg: &RunConfig, data: &Path) -> Result<(Vec<IndividualGraph>, Vec<usize>, Vec<usize>)> {
    let graphs = load_benchmark(data)?;
    let (templates, rest) = template_holdout(&graphs, cfg.template_fraction)?;
    let mut rest: Vec<usize> = rest.concat();
    rest.sort_unstable();
    Ok((graphs, templates, rest))
}

fn train_cmd(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let (mut graphs, templates, rest) = split_benchmark(cfg, data)?;
    let stats = fit_normalization(&rest.iter().map(|&i| &graphs[i]).collect::<Vec<_>>())?;
    normalize_graphs(&mut graphs, &stats)?;
    let d = Dataset::with_roles(graphs, rest, vec![], templates)?;
    cfg.echo(out)?;
    let tc = TrainConfig { seed: cfg.seed, ..cfg.train };
    let t = train(&d, &tc, &cfg.model)?;
    std::fs::write(out.join("train_log.csv"), t.log.to_csv())?;
    let mut ck = Checkpoint::new(&t.model, Some(stats)).with_optimizer(&t.optimizer);
    ck.train_steps = tc.steps;
    ck.save(out.join("checkpoint.json"))?;
    let last = t.log.rows.last().map_or(f64::NAN, |r| r.loss);
    println!("trained {} steps, final loss {last:.4}", tc.steps);
    Ok(())
}

/// Graph JSON files of a benchmark directory, or every `*.json` graph in a
/// plain directory (sorted by name).
fn load_templates(dir: &Path) -> Result<Vec<IndividualGraph>> {
    if dir.join("manifest.json").exists() {
        return load_benchmark(dir);
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(IndividualGraph::load).collect()
}

fn load_model(path: &Path) -> Result<(Checkpoint, crate::agmn::Agmn<f32>)> {
    let ck = Checkpoint::load(path)?;
    let m = ck.model::<f32>()?;
    if ck.normalization.is_none() {
        return Err(Error::InvalidInput(format!("{} has no feature normalization", path.display())));
    }
    Ok((ck, m))
}

fn label_cmd(cfg: &RunConfig, model: &Path, graph: &Path, templates: &Path, gray: Option<&Path>, out: &Path) -> Result<()> {
    let (ck, m) = load_model(model)?;
    let stats = ck.normalization.as_ref().unwrap();
    let raw = IndividualGraph::load(graph)?;
    let mut test = vec![raw.clone()];
    normalize_graphs(&mut test, stats)?;
    let mut tpls = load_templates(templates)?;
    normalize_graphs(&mut tpls, stats)?;
    let l = label_graph(&m, &test[0], &tpls.iter().collect::<Vec<_>>())?;
    cfg.echo(out)?;
    std::fs::write(out.join("labels.json"), l.to_json()?)?;
    if let Some(gp) = gray {
        let img = GrayImage::read_pgm(gp, raw.pixel_spacing)?;
        write_ppm(out.join("overlay.ppm"), img.width(), img.height(), &overlay(&img, &raw, &l.labels)?)?;
    }
    let unassigned = l.labels.iter().filter(|x| x.is_none()).count();
    println!("{} segments labeled against {} templates ({unassigned} unassigned)", l.labels.len(), l.templates_used);
    Ok(())
}

/// Normalized test and template graphs of a benchmark for a checkpoint.
fn prepared(cfg: &RunConfig, ck: &Checkpoint, data: &Path) -> Result<(Vec<IndividualGraph>, Vec<usize>, Vec<usize>)> {
    let (mut graphs, templates, rest) = split_benchmark(cfg, data)?;
    normalize_graphs(&mut graphs, ck.normalization.as_ref().unwrap())?;
    Ok((graphs, templates, rest))
}

fn eval_cmd(cfg: &RunConfig, model: &Path, data: &Path, out: &Path) -> Result<()> {
    let (ck, m) = load_model(model)?;
    let (graphs, templates, rest) = prepared(cfg, &ck, data)?;
    let tests: Vec<&IndividualGraph> = rest.iter().map(|&i| &graphs[i]).collect();
    let tpls: Vec<&IndividualGraph> = templates.iter().map(|&i| &graphs[i]).collect();
    let (cs, _) = evaluate(&m, &tests, &tpls)?;
    let report = weighted_metrics(&cs);
    cfg.echo(out)?;
    std::fs::write(out.join("metrics.csv"), reports_csv(std::slice::from_ref(&report)))?;
    let baseline = majority_baseline(&cs);
    write_json(&out.join("metrics.json"), &serde_json::json!({ "report": report, "confusion": cs, "majority_baseline": baseline }))?;
    println!("acc {:.4} pre {:.4} rec {:.4} f1 {:.4} (plain accuracy {:.4})", report.acc, report.pre, report.rec, report.f1, report.plain_acc);
    Ok(())
}

fn importance_cmd(cfg: &RunConfig, model: &Path, data: &Path, out: &Path) -> Result<()> {
    let (ck, m) = load_model(model)?;
    let (graphs, templates, rest) = prepared(cfg, &ck, data)?;
    let tests: Vec<&IndividualGraph> = rest.iter().map(|&i| &graphs[i]).collect();
    let tpls: Vec<&IndividualGraph> = templates.iter().map(|&i| &graphs[i]).collect();
    let rows = importance_report(&m, &tests, &tpls)?;
    let mut fam = Vec::new();
    for f in Family::ALL {
        let idx: Vec<usize> = f.range().collect();
        fam.push((f, crate::eval::feature_importance(&m, &tests, &tpls, &idx)?));
    }
    cfg.echo(out)?;
    let mut csv = String::from("rank,index,name,baseline_acc,acc,delta\n");
    for (r, row) in rows.iter().enumerate() {
        csv.push_str(&format!("{},{},{},{:.6},{:.6},{:.6}\n", r + 1, row.indices[0], row.name, row.baseline_acc, row.acc, row.delta));
    }
    std::fs::write(out.join("importance.csv"), csv)?;
    let mut csv = String::from("family,baseline_acc,acc,delta\n");
    for (f, row) in &fam {
        csv.push_str(&format!("{f:?},{:.6},{:.6},{:.6}\n", row.baseline_acc, row.acc, row.delta));
    }
    std::fs::write(out.join("importance_families.csv"), csv)?;
    for row in rows.iter().take(5) {
        println!("{:<28} {:+.4}", row.name, row.delta);
    }
    Ok(())
}

fn attack_cmd(cfg: &RunConfig, model: &Path, levels: &[f64], data: &Path, out: &Path) -> Result<()> {
    let (ck, m) = load_model(model)?;
    let (graphs, templates, rest) = split_benchmark(cfg, data)?;
    let stats = ck.normalization.as_ref().unwrap();
    let mut tpl_graphs: Vec<IndividualGraph> = templates.iter().map(|&i| graphs[i].clone()).collect();
    normalize_graphs(&mut tpl_graphs, stats)?;
    let raw: Vec<&IndividualGraph> = rest.iter().map(|&i| &graphs[i]).collect();
    let seeds: Vec<u64> = (0..cfg.attack_seeds as u64).map(|k| cfg.seed.wrapping_add(k)).collect();
    let rep = attack_sweep(&m, &raw, stats, &tpl_graphs.iter().collect::<Vec<_>>(), levels, &seeds)?;
    cfg.echo(out)?;
    std::fs::write(out.join("attack.csv"), rep.to_csv())?;
    write_json(&out.join("attack.json"), &rep)?;
    print!("{}", rep.to_csv());
    Ok(())
}

fn xval_cmd(cfg: &RunConfig, data: &Path, out: &Path) -> Result<()> {
    let graphs = load_benchmark(data)?;
    let manifest = Manifest::load(data)?;
    let res = cross_validate(&graphs, &cfg.xval())?;
    cfg.echo(out)?;
    let reports = res.reports();
    std::fs::write(out.join("metrics.csv"), reports_csv(&reports))?;
    let pooled = res.pooled();
    write_json(
        &out.join("metrics.json"),
        &serde_json::json!({
            "benchmark_seed": manifest.seed,
            "split": res.split,
            "folds": reports,
            "confusion": res.folds.iter().map(|f| &f.confusion).collect::<Vec<_>>(),
            "pooled": weighted_metrics(&pooled),
            "majority_baseline": majority_baseline(&pooled),
        }),
    )?;
    for f in &res.folds {
        let dir = out.join(format!("fold_{}", f.fold));
        std::fs::create_dir_all(&dir)?;
        let mut ck = Checkpoint::new(&f.model, Some(f.normalization.clone()));
        ck.train_steps = cfg.train.steps;
        ck.save(dir.join("checkpoint.json"))?;
        std::fs::write(dir.join("train_log.csv"), f.log.to_csv())?;
    }
    let acc: Vec<f64> = reports.iter().map(|r| r.acc).collect();
    let (m, s) = crate::eval::mean_std(&acc);
    println!("weighted acc {m:.4} ± {s:.4} over {} folds", reports.len());
    Ok(())
}
