//! Training loop, template voting and the exhaustive matcher.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agmn::{vote, Agmn, AgmnConfig, AgmnGrads, PairBatch};
use crate::assoc::{build_association, ground_truth, AssociationGraph, MatchMatrix};
use crate::error::{Error, Result};
use crate::graph::{ArteryLabel, IndividualGraph, ViewTag};
use crate::nn::{Adam, AdamConfig, LrSchedule, Real};

/// Labeled graphs with train / test / template roles given as indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graphs: Vec<IndividualGraph>,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub templates: Vec<usize>,
}

impl Dataset {
    /// Every graph starts in the training role.
    pub fn new(graphs: Vec<IndividualGraph>) -> Result<Self> {
        let train = (0..graphs.len()).collect();
        let d = Self { graphs, train, test: vec![], templates: vec![] };
        d.validate()?;
        Ok(d)
    }

    pub fn with_roles(graphs: Vec<IndividualGraph>, train: Vec<usize>, test: Vec<usize>, templates: Vec<usize>) -> Result<Self> {
        let d = Self { graphs, train, test, templates };
        d.validate()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let mut role = vec![false; self.graphs.len()];
        for &i in self.train.iter().chain(&self.test).chain(&self.templates) {
            if i >= self.graphs.len() {
                return Err(Error::InvalidInput(format!("graph index {i} out of range")));
            }
            if std::mem::replace(&mut role[i], true) {
                return Err(Error::InvalidInput(format!("graph {i} has more than one role")));
            }
        }
        for g in &self.graphs {
            g.validate()?;
        }
        for &i in &self.templates {
            if self.graphs[i].nodes.iter().any(|n| n.label.is_none()) {
                return Err(Error::Labeling(format!("template graph {i} is not fully labeled")));
            }
        }
        Ok(())
    }

    pub fn view_count(&self, view: ViewTag) -> usize {
        self.graphs.iter().filter(|g| g.view == view).count()
    }
}

/// Uniform draws from a fixed list of ordered pairs `(small, large)`.
#[derive(Debug, Clone)]
pub struct PairSampler {
    pairs: Vec<(usize, usize)>,
}

impl PairSampler {
    /// All unordered same-view pairs among `ids`.
    pub fn same_view(graphs: &[IndividualGraph], ids: &[usize]) -> Result<Self> {
        let mut pairs = Vec::new();
        for (k, &i) in ids.iter().enumerate() {
            for &j in &ids[k + 1..] {
                if graphs[i].view == graphs[j].view {
                    pairs.push(orient(graphs, i, j));
                }
            }
        }
        if pairs.is_empty() {
            return Err(Error::NoSameViewPair);
        }
        Ok(Self { pairs })
    }

    /// A given list of pairs, each oriented so the first has fewer nodes.
    pub fn fixed(graphs: &[IndividualGraph], pairs: &[(usize, usize)]) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::NoSameViewPair);
        }
        let mut out = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            if i >= graphs.len() || j >= graphs.len() || i == j {
                return Err(Error::InvalidInput(format!("bad pair ({i}, {j})")));
            }
            if graphs[i].view != graphs[j].view {
                return Err(Error::InvalidInput(format!("pair ({i}, {j}) mixes views")));
            }
            out.push(orient(graphs, i, j));
        }
        Ok(Self { pairs: out })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, usize) {
        self.pairs[rng.random_range(0..self.pairs.len())]
    }
}

fn orient(graphs: &[IndividualGraph], i: usize, j: usize) -> (usize, usize) {
    if graphs[i].n() <= graphs[j].n() {
        (i, j)
    } else {
        (j, i)
    }
}

/// One same-view training pair, smaller graph first.
pub fn sample_pair<'a, R: Rng + ?Sized>(d: &'a Dataset, rng: &mut R) -> Result<(&'a IndividualGraph, &'a IndividualGraph)> {
    let (i, j) = PairSampler::same_view(&d.graphs, &d.train)?.sample(rng);
    Ok((&d.graphs[i], &d.graphs[j]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub steps: u64,
    pub batch: usize,
    pub schedule: LrSchedule,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Weight on the positive term of the loss.
    pub pos_weight: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 5000,
            batch: 32,
            schedule: LrSchedule::default(),
            adam: AdamConfig::default(),
            seed: 0,
            pos_weight: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.steps == 0 || self.batch == 0 || !(self.pos_weight > 0.0) {
            return Err(Error::InvalidInput(format!("bad training config {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,lr,loss\n");
        for r in &self.rows {
            writeln!(s, "{},{:e},{}", r.step, r.lr, r.loss).unwrap();
        }
        s
    }

    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.loss).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Trained {
    pub model: Agmn<f64>,
    pub optimizer: Adam<f64>,
    pub log: TrainLog,
}

/// Pairs per gradient chunk. Chunks are reduced in index order, so the
/// result does not depend on the number of threads.
const CHUNK: usize = 8;

/// Trains on the same-view pairs of `d.train`.
pub fn train(d: &Dataset, cfg: &TrainConfig, model_cfg: &AgmnConfig) -> Result<Trained> {
    let sampler = PairSampler::same_view(&d.graphs, &d.train)?;
    train_with(&d.graphs, &sampler, cfg, model_cfg)
}

/// Trains an f32 model on pairs drawn from `sampler`; graphs must carry
/// normalized features and sub-class labels.
pub fn train_with(graphs: &[IndividualGraph], sampler: &PairSampler, cfg: &TrainConfig, model_cfg: &AgmnConfig) -> Result<Trained> {
    cfg.validate()?;
    model_cfg.validate()?;
    let dim = graphs[sampler.pairs[0].0]
        .feature_dim()
        .ok_or_else(|| Error::InvalidInput("training graphs carry no features".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = Agmn::<f32>::new(*model_cfg, dim, &mut rng)?;
    let shapes: Vec<usize> = model.tensors().iter().map(|t| t.len()).collect();
    let mut adam = Adam::<f32>::new(cfg.adam, &shapes);
    let n_chunks = cfg.batch.div_ceil(CHUNK);
    let mut grads: Vec<AgmnGrads<f32>> = (0..n_chunks).map(|_| AgmnGrads::zeros_like(&model)).collect();
    let scale = 1.0 / cfg.batch as f64;
    let mut log = TrainLog::default();

    for step in 0..cfg.steps {
        let picks: Vec<(usize, usize)> = (0..cfg.batch).map(|_| sampler.sample(&mut rng)).collect();
        let model_ref = &model;
        let sums: Vec<Result<f64>> = picks
            .par_chunks(CHUNK)
            .zip(grads.par_iter_mut())
            .map(|(chunk, g)| {
                for t in g.tensors_mut() {
                    t.fill(0.0);
                }
                let mut ags = Vec::with_capacity(chunk.len());
                let mut truths = Vec::with_capacity(chunk.len());
                for &(i, j) in chunk {
                    ags.push(build_association(&graphs[i], &graphs[j])?);
                    truths.push(ground_truth(&graphs[i], &graphs[j])?);
                }
                let refs: Vec<&AssociationGraph> = ags.iter().collect();
                let b = PairBatch::new(&refs)?;
                Ok(model_ref.accumulate_loss_grad(&b, &truths, cfg.pos_weight, scale, g)?.0)
            })
            .collect();
        let mut total = 0.0;
        for s in sums {
            total += s?;
        }
        let (first, rest) = grads.split_first_mut().unwrap();
        for g in rest.iter() {
            first.add_assign(g);
        }
        let loss = total * scale;
        if !loss.is_finite() || !first.is_finite() {
            log::error!("non-finite loss at step {step}");
            return Err(Error::NonFiniteLoss { step: step as usize });
        }
        let lr = cfg.schedule.lr_at(step);
        let views = first.tensors();
        adam.step(model.tensors_mut(), &views, lr)?;
        log.rows.push(LogRow { step, lr, loss });
        if step % 500 == 0 {
            log::debug!("step {step} lr {lr:e} loss {loss:.4}");
        }
    }
    Ok(Trained { model: model.cast(), optimizer: adam.cast(), log })
}

/// Votes one test node received: label → (count, summed probability).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelVoteTally {
    pub votes: BTreeMap<ArteryLabel, (usize, f64)>,
}

impl LabelVoteTally {
    pub fn add(&mut self, label: ArteryLabel, prob: f64) {
        let e = self.votes.entry(label).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += prob;
    }

    /// Most votes, then larger summed probability, then the smaller label.
    pub fn winner(&self) -> Option<ArteryLabel> {
        let mut best: Option<(ArteryLabel, usize, f64)> = None;
        for (&l, &(c, p)) in &self.votes {
            match best {
                Some((_, bc, bp)) if c < bc || (c == bc && p <= bp) => {}
                _ => best = Some((l, c, p)),
            }
        }
        best.map(|b| b.0)
    }

    pub fn total(&self) -> usize {
        self.votes.values().map(|v| v.0).sum()
    }
}

/// Per-node result of labeling a test graph; `None` is UNASSIGNED.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Labeling {
    pub labels: Vec<Option<ArteryLabel>>,
    pub tallies: Vec<LabelVoteTally>,
    pub templates_used: usize,
}

impl Labeling {
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Node {
            id: usize,
            label: Option<String>,
            votes: BTreeMap<String, (usize, f64)>,
        }
        let nodes: Vec<Node> = self
            .labels
            .iter()
            .zip(&self.tallies)
            .enumerate()
            .map(|(id, (l, t))| Node {
                id,
                label: l.map(|l| l.to_string()),
                votes: t.votes.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            })
            .collect();
        let v = serde_json::json!({ "templates_used": self.templates_used, "nodes": nodes });
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

/// Labels `test` by matching it against every same-view template and
/// tallying sub-label votes.
pub fn label_graph<T: Real>(model: &Agmn<T>, test: &IndividualGraph, templates: &[&IndividualGraph]) -> Result<Labeling> {
    if templates.is_empty() {
        return Err(Error::InvalidInput("empty template set".into()));
    }
    let same: Vec<&IndividualGraph> = templates.iter().copied().filter(|t| t.view == test.view).collect();
    if same.is_empty() {
        return Err(Error::InvalidInput(format!("no {} template", test.view)));
    }
    let mut tallies = vec![LabelVoteTally::default(); test.n()];
    if test.n() == 0 {
        return Ok(Labeling { labels: vec![], tallies, templates_used: same.len() });
    }
    let mut ags = Vec::with_capacity(same.len());
    for t in &same {
        if t.nodes.iter().any(|n| n.label.is_none()) {
            return Err(Error::Labeling("template graph is not fully labeled".into()));
        }
        ags.push(if test.n() <= t.n() { build_association(test, t)? } else { build_association(t, test)? });
    }
    // one forward pass per group of templates keeps the products wide
    let groups: Vec<Result<Vec<MatchMatrix>>> = ags
        .par_chunks(CHUNK)
        .map(|chunk| {
            let refs: Vec<&AssociationGraph> = chunk.iter().collect();
            let b = PairBatch::new(&refs)?;
            Ok(model.forward_batch(&b)?.prob_matrices(&b))
        })
        .collect();
    let mut probs = Vec::with_capacity(ags.len());
    for g in groups {
        probs.extend(g?);
    }
    for (t, p) in same.iter().zip(&probs) {
        let v = vote(p);
        let test_small = test.n() <= t.n();
        for r in 0..v.n1 {
            for c in 0..v.n2 {
                if v.get(r, c) != 1.0 {
                    continue;
                }
                let (test_node, tpl_node) = if test_small { (r, c) } else { (c, r) };
                tallies[test_node].add(t.nodes[tpl_node].label.unwrap(), p.get(r, c));
            }
        }
    }
    let labels = tallies.iter().map(|t| t.winner()).collect();
    Ok(Labeling { labels, tallies, templates_used: same.len() })
}

/// Rows allowed in [`brute_force_match`].
pub const BRUTE_FORCE_MAX_ROWS: usize = 8;

/// One-to-one assignment of every row to a distinct column maximizing the
/// summed probability. Ties keep the first assignment found in
/// lexicographic column order.
pub fn brute_force_match(prob: &MatchMatrix) -> Result<MatchMatrix> {
    let (n1, n2) = (prob.n1, prob.n2);
    if n1 > BRUTE_FORCE_MAX_ROWS {
        return Err(Error::TooLarge(format!("{n1} rows exceed the exhaustive limit of {BRUTE_FORCE_MAX_ROWS}")));
    }
    if n1 > n2 {
        return Err(Error::Dimension(format!("{n1} rows cannot be matched into {n2} columns")));
    }
    // suffix sums of row maxima bound what the remaining rows can add
    let mut bound = vec![0.0; n1 + 1];
    for i in (0..n1).rev() {
        bound[i] = bound[i + 1] + prob.row(i).iter().copied().fold(f64::NEG_INFINITY, f64::max);
    }
    struct Search<'a> {
        prob: &'a MatchMatrix,
        bound: Vec<f64>,
        used: Vec<bool>,
        cur: Vec<usize>,
        best: Vec<usize>,
        best_val: f64,
    }
    fn go(s: &mut Search, i: usize, val: f64) {
        if i == s.prob.n1 {
            if val > s.best_val {
                s.best_val = val;
                s.best.clone_from(&s.cur);
            }
            return;
        }
        if val + s.bound[i] <= s.best_val {
            return;
        }
        for a in 0..s.prob.n2 {
            if s.used[a] {
                continue;
            }
            s.used[a] = true;
            s.cur.push(a);
            go(s, i + 1, val + s.prob.get(i, a));
            s.cur.pop();
            s.used[a] = false;
        }
    }
    let mut s = Search { prob, bound, used: vec![false; n2], cur: vec![], best: vec![], best_val: f64::NEG_INFINITY };
    go(&mut s, 0, 0.0);
    let mut out = MatchMatrix::zeros(n1, n2);
    for (i, &a) in s.best.iter().enumerate() {
        out.set(i, a, 1.0);
    }
    Ok(out)
}
