//! Classification metrics, cross-validation, feature importance and the
//! leaf-removal robustness sweep.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::agmn::{Agmn, AgmnConfig};
use crate::error::{Error, Result};
use crate::features::{feature_names, topology_features, Family, FeatureVector, NormalizationStats};
use crate::graph::{corrupt, group_subclasses, ArteryLabel, BaseClass, IndividualGraph, ViewTag};
use crate::image::GrayImage;
use crate::nn::Real;
use crate::runtime::{label_graph, train, Dataset, Labeling, TrainConfig, TrainLog};

const C: usize = BaseClass::ALL.len();

/// One-vs-rest counts per base class. Column `C` of `matrix` holds
/// UNASSIGNED predictions.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionStats {
    pub tp: [usize; C],
    pub tn: [usize; C],
    pub fp: [usize; C],
    #[serde(rename = "fn")]
    pub fn_: [usize; C],
    pub n: usize,
    /// Truth class by predicted class.
    pub matrix: [[usize; C + 1]; C],
}

impl ConfusionStats {
    pub fn support(&self, c: usize) -> usize {
        self.tp[c] + self.fn_[c]
    }

    pub fn correct(&self) -> usize {
        self.tp.iter().sum()
    }

    /// Sums counts of two disjoint evaluations.
    pub fn merge(&mut self, o: &ConfusionStats) {
        for c in 0..C {
            self.tp[c] += o.tp[c];
            self.tn[c] += o.tn[c];
            self.fp[c] += o.fp[c];
            self.fn_[c] += o.fn_[c];
            for k in 0..=C {
                self.matrix[c][k] += o.matrix[c][k];
            }
        }
        self.n += o.n;
    }
}

/// Counts on base classes. An UNASSIGNED prediction is a false negative
/// for the true class and a false positive for none.
pub fn confusion(truth: &[ArteryLabel], predicted: &[Option<ArteryLabel>]) -> Result<ConfusionStats> {
    if truth.len() != predicted.len() {
        return Err(Error::Dimension(format!("{} truths but {} predictions", truth.len(), predicted.len())));
    }
    let mut cs = ConfusionStats { n: truth.len(), ..Default::default() };
    for (t, p) in truth.iter().zip(predicted) {
        let tc = group_subclasses(*t).index();
        match p.map(|p| group_subclasses(p).index()) {
            Some(pc) if pc == tc => {
                cs.tp[tc] += 1;
                cs.matrix[tc][pc] += 1;
            }
            Some(pc) => {
                cs.fn_[tc] += 1;
                cs.fp[pc] += 1;
                cs.matrix[tc][pc] += 1;
            }
            None => {
                cs.fn_[tc] += 1;
                cs.matrix[tc][C] += 1;
            }
        }
    }
    for c in 0..C {
        cs.tn[c] = cs.n - cs.tp[c] - cs.fp[c] - cs.fn_[c];
    }
    Ok(cs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: BaseClass,
    pub support: usize,
    /// One-vs-rest accuracy (TP+TN)/n.
    pub acc: f64,
    pub pre: f64,
    pub rec: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fold: Option<usize>,
    pub n: usize,
    pub per_class: Vec<ClassMetrics>,
    /// Support-weighted one-vs-rest accuracy.
    pub acc: f64,
    pub pre: f64,
    pub rec: f64,
    pub f1: f64,
    /// Correct segments over all segments.
    pub plain_acc: f64,
}

impl MetricsReport {
    pub fn class(&self, c: BaseClass) -> &ClassMetrics {
        &self.per_class[c.index()]
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Per-class metrics and their support-weighted averages. Any ratio with
/// a zero denominator is 0.
pub fn weighted_metrics(cs: &ConfusionStats) -> MetricsReport {
    let mut per_class = Vec::with_capacity(C);
    let (mut acc, mut pre, mut rec, mut f1) = (0.0, 0.0, 0.0, 0.0);
    for (c, &class) in BaseClass::ALL.iter().enumerate() {
        let support = cs.support(c);
        let a = ratio(cs.tp[c] + cs.tn[c], cs.tp[c] + cs.tn[c] + cs.fp[c] + cs.fn_[c]);
        let p = ratio(cs.tp[c], cs.tp[c] + cs.fp[c]);
        let r = ratio(cs.tp[c], cs.tp[c] + cs.fn_[c]);
        let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
        let w = ratio(support, cs.n);
        acc += w * a;
        pre += w * p;
        rec += w * r;
        f1 += w * f;
        per_class.push(ClassMetrics { class, support, acc: a, pre: p, rec: r, f1: f });
    }
    MetricsReport { fold: None, n: cs.n, per_class, acc, pre, rec, f1, plain_acc: ratio(cs.correct(), cs.n) }
}

/// Predicting the most frequent class everywhere, scored the same way.
pub fn majority_baseline(cs: &ConfusionStats) -> MetricsReport {
    let support: Vec<usize> = (0..C).map(|c| cs.support(c)).collect();
    let major = (0..C).max_by_key(|&c| (support[c], std::cmp::Reverse(c))).unwrap_or(0);
    let mut b = ConfusionStats { n: cs.n, ..Default::default() };
    for c in 0..C {
        b.matrix[c][major] = support[c];
        if c == major {
            b.tp[c] = support[c];
        } else {
            b.fn_[c] = support[c];
            b.fp[major] += support[c];
        }
    }
    for c in 0..C {
        b.tn[c] = b.n - b.tp[c] - b.fp[c] - b.fn_[c];
    }
    weighted_metrics(&b)
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (0.0, 0.0);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    (m, s)
}

/// `ceil(fraction * n)` templates.
pub fn template_count(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Holdout of templates and stratified folds over the rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub templates: Vec<usize>,
    pub folds: Vec<Vec<usize>>,
}

/// First graphs of each view in dataset order, `ceil(fraction * n)` in
/// total, split across views by largest remainder. Returns the template
/// ids and the remaining ids per view.
pub fn template_holdout(graphs: &[IndividualGraph], fraction: f64) -> Result<(Vec<usize>, Vec<Vec<usize>>)> {
    if !(0.0..1.0).contains(&fraction) {
        return Err(Error::InvalidInput(format!("template fraction {fraction} outside [0, 1)")));
    }
    let by_view: Vec<Vec<usize>> =
        VIEWS.iter().map(|&v| (0..graphs.len()).filter(|&i| graphs[i].view == v).collect()).collect();
    let n = graphs.len();
    let n_tp = template_count(n, fraction);
    let quota: Vec<f64> = by_view.iter().map(|ids| n_tp as f64 * ids.len() as f64 / n.max(1) as f64).collect();
    let mut k_v: Vec<usize> = quota.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..VIEWS.len()).collect();
    order.sort_by(|&a, &b| (quota[b] - quota[b].floor()).total_cmp(&(quota[a] - quota[a].floor())).then(a.cmp(&b)));
    for &v in order.iter().take(n_tp - k_v.iter().sum::<usize>()) {
        k_v[v] += 1;
    }
    let mut templates = Vec::new();
    let mut rest = Vec::new();
    for (v, ids) in by_view.iter().enumerate() {
        if !ids.is_empty() && k_v[v] == 0 {
            return Err(Error::InvalidInput(format!("no {} template at fraction {fraction}", VIEWS[v])));
        }
        templates.extend_from_slice(&ids[..k_v[v]]);
        rest.push(ids[k_v[v]..].to_vec());
    }
    templates.sort_unstable();
    Ok((templates, rest))
}

const VIEWS: [ViewTag; 2] = [ViewTag::Lao, ViewTag::Rao];

impl FoldSplit {
    /// Templates come from [`template_holdout`]; the rest is shuffled per
    /// view and dealt round-robin into `k` folds.
    pub fn new(graphs: &[IndividualGraph], template_fraction: f64, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::InvalidInput(format!("{k} folds")));
        }
        let (templates, rest) = template_holdout(graphs, template_fraction)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut folds = vec![Vec::new(); k];
        let mut next = 0;
        for (v, ids) in rest.into_iter().enumerate() {
            let present = graphs.iter().any(|g| g.view == VIEWS[v]);
            if present && ids.len() < k {
                return Err(Error::InvalidInput(format!("{} {} graphs left for {k} folds", ids.len(), VIEWS[v])));
            }
            let mut ids = ids;
            ids.shuffle(&mut rng);
            for id in ids {
                folds[next].push(id);
                next = (next + 1) % k;
            }
        }
        for f in folds.iter_mut() {
            f.sort_unstable();
        }
        Ok(Self { templates, folds })
    }

    /// Train and test ids for fold `f`.
    pub fn fold(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train: Vec<usize> = self.folds.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, ids)| ids.clone()).collect();
        train.sort_unstable();
        (train, self.folds[f].clone())
    }
}

/// Z-scores every feature vector in place.
pub fn normalize_graphs(graphs: &mut [IndividualGraph], stats: &NormalizationStats) -> Result<()> {
    for g in graphs.iter_mut() {
        for n in g.nodes.iter_mut() {
            let fv = n.features.as_ref().ok_or_else(|| Error::InvalidInput(format!("node {} has no features", n.id)))?;
            n.features = Some(stats.apply(fv)?);
        }
    }
    Ok(())
}

/// Normalization fitted on the segments of the given graphs.
pub fn fit_normalization(graphs: &[&IndividualGraph]) -> Result<NormalizationStats> {
    let mut rows: Vec<&FeatureVector> = Vec::new();
    for g in graphs {
        for n in &g.nodes {
            rows.push(n.features.as_ref().ok_or_else(|| Error::InvalidInput(format!("node {} has no features", n.id)))?);
        }
    }
    NormalizationStats::fit(rows)
}

fn truth_labels(g: &IndividualGraph) -> Result<Vec<ArteryLabel>> {
    g.nodes
        .iter()
        .map(|n| n.label.ok_or_else(|| Error::Labeling(format!("test node {} has no label", n.id))))
        .collect()
}

/// Labels every test graph and pools the confusion counts.
pub fn evaluate<T: Real>(model: &Agmn<T>, tests: &[&IndividualGraph], templates: &[&IndividualGraph]) -> Result<(ConfusionStats, Vec<Labeling>)> {
    let results: Vec<Result<(ConfusionStats, Labeling)>> = tests
        .par_iter()
        .map(|g| {
            let l = label_graph(model, g, templates)?;
            Ok((confusion(&truth_labels(g)?, &l.labels)?, l))
        })
        .collect();
    let mut cs = ConfusionStats::default();
    let mut out = Vec::with_capacity(tests.len());
    for r in results {
        let (c, l) = r?;
        cs.merge(&c);
        out.push(l);
    }
    Ok((cs, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XvalConfig {
    pub template_fraction: f64,
    pub folds: usize,
    pub seed: u64,
    pub train: TrainConfig,
    pub model: AgmnConfig,
}

impl Default for XvalConfig {
    fn default() -> Self {
        Self { template_fraction: 0.15, folds: 5, seed: 0, train: TrainConfig::default(), model: AgmnConfig::default() }
    }
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub train_ids: Vec<usize>,
    pub test_ids: Vec<usize>,
    pub normalization: NormalizationStats,
    pub model: Agmn<f64>,
    pub log: TrainLog,
    pub confusion: ConfusionStats,
    pub report: MetricsReport,
    pub labelings: Vec<Labeling>,
}

impl FoldResult {
    /// Fold graphs normalized with this fold's statistics.
    pub fn normalized(&self, graphs: &[IndividualGraph], ids: &[usize]) -> Result<Vec<IndividualGraph>> {
        let mut out: Vec<IndividualGraph> = ids.iter().map(|&i| graphs[i].clone()).collect();
        normalize_graphs(&mut out, &self.normalization)?;
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct XvalResult {
    pub split: FoldSplit,
    pub folds: Vec<FoldResult>,
}

impl XvalResult {
    pub fn reports(&self) -> Vec<MetricsReport> {
        self.folds.iter().map(|f| f.report.clone()).collect()
    }

    /// Counts pooled over every fold.
    pub fn pooled(&self) -> ConfusionStats {
        let mut cs = ConfusionStats::default();
        for f in &self.folds {
            cs.merge(&f.confusion);
        }
        cs
    }
}

/// Per-fold training seeds derived from the run seed.
pub fn fold_seeds(seed: u64, k: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..k).map(|_| rng.random()).collect()
}

/// Template holdout, then `k`-fold cross-validation over the rest. Input
/// graphs carry raw features; each fold fits its own normalization on its
/// training graphs.
pub fn cross_validate(graphs: &[IndividualGraph], cfg: &XvalConfig) -> Result<XvalResult> {
    let split = FoldSplit::new(graphs, cfg.template_fraction, cfg.folds, cfg.seed)?;
    let seeds = fold_seeds(cfg.seed, cfg.folds);
    let folds: Vec<Result<FoldResult>> = (0..cfg.folds)
        .into_par_iter()
        .map(|f| {
            let (train_ids, test_ids) = split.fold(f);
            let stats = fit_normalization(&train_ids.iter().map(|&i| &graphs[i]).collect::<Vec<_>>())?;
            let mut normed = graphs.to_vec();
            normalize_graphs(&mut normed, &stats)?;
            let d = Dataset::with_roles(normed, train_ids.clone(), test_ids.clone(), split.templates.clone())?;
            let tc = TrainConfig { seed: seeds[f], ..cfg.train };
            let trained = train(&d, &tc, &cfg.model)?;
            let fast = trained.model.cast::<f32>();
            let tests: Vec<&IndividualGraph> = test_ids.iter().map(|&i| &d.graphs[i]).collect();
            let tpls: Vec<&IndividualGraph> = split.templates.iter().map(|&i| &d.graphs[i]).collect();
            let (cs, labelings) = evaluate(&fast, &tests, &tpls)?;
            let mut report = weighted_metrics(&cs);
            report.fold = Some(f);
            log::info!("fold {f}: acc {:.4} plain {:.4}", report.acc, report.plain_acc);
            Ok(FoldResult {
                fold: f,
                train_ids,
                test_ids,
                normalization: stats,
                model: trained.model,
                log: trained.log,
                confusion: cs,
                report,
                labelings,
            })
        })
        .collect();
    Ok(XvalResult { split, folds: folds.into_iter().collect::<Result<_>>()? })
}

/// Copies of the graphs with the given feature slots set to zero.
pub fn zero_features(graphs: &[&IndividualGraph], indices: &[usize]) -> Result<Vec<IndividualGraph>> {
    let mut out: Vec<IndividualGraph> = graphs.iter().map(|&g| g.clone()).collect();
    for g in out.iter_mut() {
        for n in g.nodes.iter_mut() {
            let fv = n.features.as_mut().ok_or_else(|| Error::InvalidInput(format!("node {} has no features", n.id)))?;
            for &k in indices {
                *fv.values.get_mut(k).ok_or_else(|| Error::InvalidInput(format!("feature index {k} outside the layout")))? = 0.0;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub indices: Vec<usize>,
    pub name: String,
    pub baseline_acc: f64,
    pub acc: f64,
    /// Baseline minus corrupted accuracy.
    pub delta: f64,
}

/// Accuracy lost when the given (normalized) feature slots are zeroed in
/// every test and template vector.
pub fn feature_importance<T: Real>(
    model: &Agmn<T>,
    tests: &[&IndividualGraph],
    templates: &[&IndividualGraph],
    indices: &[usize],
) -> Result<ImportanceRow> {
    let base = weighted_metrics(&evaluate(model, tests, templates)?.0);
    importance_against(model, tests, templates, indices, base.acc)
}

fn importance_against<T: Real>(
    model: &Agmn<T>,
    tests: &[&IndividualGraph],
    templates: &[&IndividualGraph],
    indices: &[usize],
    baseline_acc: f64,
) -> Result<ImportanceRow> {
    let names = feature_names();
    let zt = zero_features(tests, indices)?;
    let zp = zero_features(templates, indices)?;
    let acc = weighted_metrics(&evaluate(model, &zt.iter().collect::<Vec<_>>(), &zp.iter().collect::<Vec<_>>())?.0).acc;
    let name = indices.iter().map(|&k| names.get(k).cloned().unwrap_or_else(|| k.to_string())).collect::<Vec<_>>().join("+");
    Ok(ImportanceRow { indices: indices.to_vec(), name, baseline_acc, acc, delta: baseline_acc - acc })
}

/// One row per feature slot, largest drop first (ties by slot).
pub fn importance_report<T: Real>(model: &Agmn<T>, tests: &[&IndividualGraph], templates: &[&IndividualGraph]) -> Result<Vec<ImportanceRow>> {
    let dim = tests
        .first()
        .and_then(|g| g.feature_dim())
        .ok_or_else(|| Error::InvalidInput("no featured test graph".into()))?;
    let base = weighted_metrics(&evaluate(model, tests, templates)?.0).acc;
    let mut rows = (0..dim).map(|k| importance_against(model, tests, templates, &[k], base)).collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.delta.total_cmp(&a.delta).then(a.indices.cmp(&b.indices)));
    Ok(rows)
}

/// The seven removal levels 5%, 7.5%, ..., 20%.
pub fn attack_levels() -> Vec<f64> {
    (0..7).map(|k| (20.0 + 10.0 * k as f64) / 400.0).collect()
}

/// Parses `lo..hi` (step 0.025) or a comma list.
pub fn parse_levels(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidInput(format!("bad level list {s:?}"));
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: f64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad())?;
        if !(0.0..=1.0).contains(&lo) || !(lo..=1.0).contains(&hi) {
            return Err(bad());
        }
        let steps = ((hi - lo) / 0.025 + 1e-9).floor() as usize;
        return Ok((0..=steps).map(|k| ((lo * 1000.0).round() + 25.0 * k as f64) / 1000.0).collect());
    }
    let v: Vec<f64> = s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
    if v.is_empty() || v.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(bad());
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackRow {
    pub level: f64,
    /// Weighted accuracy per seed (or per fold and seed once combined).
    pub acc: Vec<f64>,
    pub plain_acc: Vec<f64>,
    pub f1: Vec<f64>,
}

impl AttackRow {
    pub fn acc_mean(&self) -> f64 {
        mean_std(&self.acc).0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub baseline: MetricsReport,
    pub rows: Vec<AttackRow>,
}

impl AttackReport {
    /// Appends another sweep over the same levels (e.g. another fold).
    pub fn extend(&mut self, other: &AttackReport) -> Result<()> {
        if self.rows.len() != other.rows.len() || self.rows.iter().zip(&other.rows).any(|(a, b)| a.level != b.level) {
            return Err(Error::InvalidInput("attack sweeps use different levels".into()));
        }
        for (a, b) in self.rows.iter_mut().zip(&other.rows) {
            a.acc.extend_from_slice(&b.acc);
            a.plain_acc.extend_from_slice(&b.plain_acc);
            a.f1.extend_from_slice(&b.f1);
        }
        Ok(())
    }

    /// Spearman correlation of mean accuracy with the level.
    pub fn trend(&self) -> f64 {
        let x: Vec<f64> = self.rows.iter().map(|r| r.level).collect();
        let y: Vec<f64> = self.rows.iter().map(|r| r.acc_mean()).collect();
        spearman(&x, &y)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("level,acc_mean,acc_std,plain_acc_mean,plain_acc_std,f1_mean,f1_std,runs\n");
        for r in &self.rows {
            let (am, asd) = mean_std(&r.acc);
            let (pm, psd) = mean_std(&r.plain_acc);
            let (fm, fsd) = mean_std(&r.f1);
            writeln!(s, "{},{am:.6},{asd:.6},{pm:.6},{psd:.6},{fm:.6},{fsd:.6},{}", r.level, r.acc.len()).unwrap();
        }
        s
    }
}

/// Rewrites the two key-point-degree slots from the current terminals
/// when the graph carries them (both slots zero means the family is off).
fn refresh_topology(g: &mut IndividualGraph) {
    let r = Family::Topology.range();
    for n in g.nodes.iter_mut() {
        let deg = n.terminals.map(|t| t.degree);
        if let Some(fv) = n.features.as_mut() {
            if fv.values.len() >= r.end && fv.values[r.clone()].iter().any(|&v| v != 0.0) {
                fv.values[r.clone()].copy_from_slice(&topology_features(deg));
            }
        }
    }
}

/// Removes leaf segments from raw test graphs at each level, normalizes,
/// relabels against the (normalized) templates and scores. One run per
/// seed; each (seed, level) uses its own random stream.
pub fn attack_sweep<T: Real>(
    model: &Agmn<T>,
    raw_tests: &[&IndividualGraph],
    stats: &NormalizationStats,
    templates: &[&IndividualGraph],
    levels: &[f64],
    seeds: &[u64],
) -> Result<AttackReport> {
    let mut clean: Vec<IndividualGraph> = raw_tests.iter().map(|&g| g.clone()).collect();
    normalize_graphs(&mut clean, stats)?;
    let baseline = weighted_metrics(&evaluate(model, &clean.iter().collect::<Vec<_>>(), templates)?.0);
    let mut rows = Vec::with_capacity(levels.len());
    for (li, &level) in levels.iter().enumerate() {
        let mut row = AttackRow { level, acc: vec![], plain_acc: vec![], f1: vec![] };
        for &seed in seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(li as u64);
            let mut hit: Vec<IndividualGraph> = raw_tests
                .iter()
                .map(|g| {
                    let mut c = corrupt(g, level, &mut rng);
                    if c.n() != g.n() {
                        refresh_topology(&mut c);
                    }
                    c
                })
                .collect();
            normalize_graphs(&mut hit, stats)?;
            let r = weighted_metrics(&evaluate(model, &hit.iter().collect::<Vec<_>>(), templates)?.0);
            row.acc.push(r.acc);
            row.plain_acc.push(r.plain_acc);
            row.f1.push(r.f1);
        }
        rows.push(row);
    }
    Ok(AttackReport { baseline, rows })
}

/// Ranks starting at 1; tied values share their average rank.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Pearson correlation of average ranks; 0 when either side is constant.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let (mx, _) = mean_std(&rx);
    let (my, _) = mean_std(&ry);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

/// CSV with one row per class plus the weighted row, for each report, and
/// mean/std rows across reports.
pub fn reports_csv(reports: &[MetricsReport]) -> String {
    let mut s = String::from("fold,class,support,acc,pre,rec,f1,plain_acc\n");
    let fold = |r: &MetricsReport| r.fold.map_or("all".to_string(), |f| f.to_string());
    for r in reports {
        for c in &r.per_class {
            writeln!(s, "{},{},{},{:.6},{:.6},{:.6},{:.6},", fold(r), c.class, c.support, c.acc, c.pre, c.rec, c.f1).unwrap();
        }
        writeln!(s, "{},weighted,{},{:.6},{:.6},{:.6},{:.6},{:.6}", fold(r), r.n, r.acc, r.pre, r.rec, r.f1, r.plain_acc).unwrap();
    }
    if reports.len() > 1 {
        let col = |f: fn(&MetricsReport) -> f64| mean_std(&reports.iter().map(f).collect::<Vec<_>>());
        let stats = [col(|r| r.acc), col(|r| r.pre), col(|r| r.rec), col(|r| r.f1), col(|r| r.plain_acc)];
        writeln!(s, "mean,weighted,,{:.6},{:.6},{:.6},{:.6},{:.6}", stats[0].0, stats[1].0, stats[2].0, stats[3].0, stats[4].0).unwrap();
        writeln!(s, "std,weighted,,{:.6},{:.6},{:.6},{:.6},{:.6}", stats[0].1, stats[1].1, stats[2].1, stats[3].1, stats[4].1).unwrap();
    }
    s
}

/// Overlay colour for a base class; UNASSIGNED is white.
pub fn class_color(label: Option<ArteryLabel>) -> [u8; 3] {
    match label.map(|l| l.base) {
        Some(BaseClass::LMA) => [230, 40, 40],
        Some(BaseClass::LAD) => [40, 120, 240],
        Some(BaseClass::LCX) => [40, 200, 70],
        Some(BaseClass::D) => [240, 200, 30],
        Some(BaseClass::OM) => [200, 60, 220],
        None => [255, 255, 255],
    }
}

/// The gray image with each segment's centerline drawn in its class colour.
pub fn overlay(gray: &GrayImage, g: &IndividualGraph, labels: &[Option<ArteryLabel>]) -> Result<Vec<[u8; 3]>> {
    if labels.len() != g.n() {
        return Err(Error::Dimension(format!("{} labels for {} segments", labels.len(), g.n())));
    }
    if (gray.width(), gray.height()) != (g.width, g.height) {
        return Err(Error::Dimension("overlay image and graph sizes differ".into()));
    }
    let (w, h) = (gray.width(), gray.height());
    let mut rgb: Vec<[u8; 3]> = gray.data().iter().map(|&v| [v, v, v]).collect();
    for (node, &l) in g.nodes.iter().zip(labels) {
        let col = class_color(l);
        for p in node.centerline() {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (x, y) = (p.x as i64 + dx, p.y as i64 + dy);
                    if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                        rgb[y as usize * w + x as usize] = col;
                    }
                }
            }
        }
    }
    Ok(rgb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l(s: &str) -> ArteryLabel {
        s.parse().unwrap()
    }

    #[test]
    fn all_correct() {
        let t = [l("LMA1"), l("LAD1"), l("LAD2"), l("D1")];
        let p: Vec<Option<ArteryLabel>> = t.iter().map(|&x| Some(x)).collect();
        let cs = confusion(&t, &p).unwrap();
        assert!(cs.fp.iter().chain(&cs.fn_).all(|&x| x == 0));
        let r = weighted_metrics(&cs);
        assert_eq!((r.acc, r.pre, r.rec, r.f1, r.plain_acc), (1.0, 1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn single_swap() {
        let t = [l("LMA1"), l("LAD1"), l("LCX1")];
        let p = [Some(l("LMA1")), Some(l("LCX2")), Some(l("LCX1"))];
        let cs = confusion(&t, &p).unwrap();
        assert_eq!(cs.fn_[BaseClass::LAD.index()], 1);
        assert_eq!(cs.fp[BaseClass::LCX.index()], 1);
        assert_eq!(cs.tp[BaseClass::LCX.index()], 1);
    }

    #[test]
    fn unassigned_is_fn_only() {
        let cs = confusion(&[l("OM1"), l("LAD1")], &[None, Some(l("LAD1"))]).unwrap();
        assert_eq!(cs.fn_[BaseClass::OM.index()], 1);
        assert_eq!(cs.fp.iter().sum::<usize>(), 0);
        assert_eq!(cs.matrix[BaseClass::OM.index()][C], 1);
        assert!(confusion(&[l("OM1")], &[]).is_err());
    }

    #[test]
    fn two_class_hand_values() {
        // LAD x3 (one predicted LCX), LCX x1
        let t = [l("LAD1"), l("LAD2"), l("LAD3"), l("LCX1")];
        let p = [Some(l("LAD1")), Some(l("LAD2")), Some(l("LCX1")), Some(l("LCX1"))];
        let r = weighted_metrics(&confusion(&t, &p).unwrap());
        // LAD: tp2 fn1 fp0 tn1; LCX: tp1 fn0 fp1 tn2
        let (acc_lad, acc_lcx) = (3.0 / 4.0, 3.0 / 4.0);
        let (pre_lad, pre_lcx) = (1.0, 0.5);
        let (rec_lad, rec_lcx) = (2.0 / 3.0, 1.0);
        let f1 = |p: f64, r: f64| 2.0 * p * r / (p + r);
        assert!((r.acc - (0.75 * acc_lad + 0.25 * acc_lcx)).abs() < 1e-15);
        assert!((r.pre - (0.75 * pre_lad + 0.25 * pre_lcx)).abs() < 1e-15);
        assert!((r.rec - (0.75 * rec_lad + 0.25 * rec_lcx)).abs() < 1e-15);
        assert!((r.f1 - (0.75 * f1(pre_lad, rec_lad) + 0.25 * f1(pre_lcx, rec_lcx))).abs() < 1e-15);
        assert_eq!(r.plain_acc, 0.75);
    }

    #[test]
    fn zero_predicted_positives() {
        let r = weighted_metrics(&confusion(&[l("D1"), l("LAD1")], &[Some(l("LAD1")), Some(l("LAD1"))]).unwrap());
        assert_eq!(r.class(BaseClass::D).pre, 0.0);
        assert_eq!(r.class(BaseClass::D).f1, 0.0);
    }

    #[test]
    fn majority_baseline_scores() {
        let t = [l("LAD1"), l("LAD2"), l("LAD3"), l("LCX1")];
        let cs = confusion(&t, &[None, None, None, None]).unwrap();
        let b = majority_baseline(&cs);
        assert_eq!(b.plain_acc, 0.75);
        assert!((b.rec - 0.75).abs() < 1e-15);
    }

    #[test]
    fn template_counts() {
        assert_eq!(template_count(263, 0.15), 40);
        assert_eq!(template_count(263, 0.10), 27);
        assert_eq!(template_count(120, 0.15), 18);
        let n_tr: f64 = (263.0 - 40.0) * 0.8;
        assert_eq!(n_tr.round(), 178.0);
    }

    #[test]
    fn ranks_and_spearman() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 8.0, 7.0, 1.0]) + 1.0).abs() < 1e-15);
        assert!((spearman(&x, &[1.0, 2.0, 3.0, 9.0]) - 1.0).abs() < 1e-15);
        assert_eq!(spearman(&x, &[5.0; 4]), 0.0);
    }

    #[test]
    fn level_lists() {
        let v = attack_levels();
        assert_eq!(v, vec![0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2]);
        assert_eq!(parse_levels("0.05..0.20").unwrap(), v);
        assert_eq!(parse_levels("0,0.1").unwrap(), vec![0.0, 0.1]);
        assert!(parse_levels("x..y").is_err());
    }

    #[test]
    fn mean_std_population() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
    }
}
