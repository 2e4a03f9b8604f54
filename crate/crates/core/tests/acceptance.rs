//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any fails. Pass criterion numbers as arguments to run a
//! subset (`cargo test --test acceptance -- 1 7`).
//!
//! Criterion 4 compares against `tests/data/xval_reference.json`; run with
//! `AGMN_BLESS=1` to rewrite it.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use agmn::agmn::{relu_pattern, vote, weighted_loss, Agmn, AgmnConfig, PairBatch};
use agmn::assoc::{build_association, ground_truth, AssociationGraph, MatchMatrix};
use agmn::eval::{
    attack_levels, attack_sweep, confusion, cross_validate, majority_baseline, mean_std, weighted_metrics, AttackReport, XvalConfig,
    XvalResult,
};
use agmn::features::glcm::{glcm_features, NAMES};
use agmn::graph::keypoint::{KpEdge, KpNode};
use agmn::graph::{delete_cycles, keypoint_graph, merge_degree_two, merge_splitting_points, prune_small, ArteryLabel, BaseClass};
use agmn::graph::{IndividualGraph, KeyPointGraph, PipelineConfig, ViewTag};
use agmn::image::BinaryMask;
use agmn::nn::LrSchedule;
use agmn::runtime::{brute_force_match, train_with, PairSampler, TrainConfig};
use agmn::skeleton::{compute_radii, detect_keypoints, skeletonize, split_segments, Pixel};
use agmn::synth::make_benchmark;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(t: Instant, limit: Duration) -> (bool, String) {
    let e = t.elapsed();
    (e < limit, format!("{:.1}s/{}s", e.as_secs_f64(), limit.as_secs()))
}

/// Small synthetic benchmark shared by criteria 1 and 3.
fn small_bench() -> &'static Vec<IndividualGraph> {
    static B: OnceLock<Vec<IndividualGraph>> = OnceLock::new();
    B.get_or_init(|| make_benchmark(40, &mut ChaCha8Rng::seed_from_u64(11)).unwrap().graphs)
}

fn crit1() -> Outcome {
    let t = Instant::now();
    let graphs = small_bench();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut bad = 0;
    for _ in 0..200 {
        let (mut p, mut q) = (rng.random_range(0..graphs.len()), rng.random_range(0..graphs.len()));
        if graphs[p].n() > graphs[q].n() {
            std::mem::swap(&mut p, &mut q);
        }
        let (g1, g2) = (&graphs[p], &graphs[q]);
        let ag = build_association(g1, g2).unwrap();
        let e1: std::collections::HashSet<(usize, usize)> = g1.edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        let e2: std::collections::HashSet<(usize, usize)> = g2.edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        let counts_ok = ag.n_vertices() == g1.n() * g2.n() && ag.edges.len() == 2 * g1.n_edges() * g2.n_edges();
        let ends_ok = ag.edges.iter().all(|e| {
            let (u, v) = ag.endpoints(e);
            let (i, a, j, b) = (u / g2.n(), u % g2.n(), v / g2.n(), v % g2.n());
            e1.contains(&(i.min(j), i.max(j))) && e2.contains(&(a.min(b), a.max(b)))
        });
        let unique: std::collections::HashSet<(usize, usize, usize, usize)> = ag.edges.iter().map(|e| (e.i, e.j, e.a, e.b)).collect();
        if !(counts_ok && ends_ok && unique.len() == ag.edges.len()) {
            bad += 1;
        }
    }
    let (fast, time) = within(t, Duration::from_secs(10));
    outcome(bad == 0 && fast, format!("{bad}/200 pairs wrong, {time}"))
}

fn random_tree(n: usize, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    (1..n).map(|k| (rng.random_range(0..k), k)).collect()
}

fn random_rows(n: usize, d: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

fn random_truth(n1: usize, n2: usize, rng: &mut ChaCha8Rng) -> MatchMatrix {
    let mut cols: Vec<usize> = (0..n2).collect();
    for k in (1..n2).rev() {
        cols.swap(k, rng.random_range(0..=k));
    }
    let mut m = MatchMatrix::zeros(n1, n2);
    for (i, &c) in cols.iter().enumerate().take(n1) {
        if rng.random_range(0..4) > 0 {
            m.set(i, c, 1.0);
        }
    }
    m
}

/// Largest relative error between analytic and central-difference
/// gradients, and how many coordinates were skipped because the
/// perturbation switched a ReLU.
fn fd_check(m: &mut Agmn<f64>, ag: &AssociationGraph, y: &MatchMatrix) -> (f64, usize, usize) {
    let batch = PairBatch::new(&[ag]).unwrap();
    let (_, g, _) = m.loss_and_grad(&batch, std::slice::from_ref(y), 1.0).unwrap();
    let analytic: Vec<Vec<f64>> = g.tensors().iter().map(|t| t.to_vec()).collect();
    let f = |m: &Agmn<f64>| weighted_loss(&m.predict(ag).unwrap(), y, 1.0).unwrap();
    let eps = 1e-5;
    let (mut worst, mut skipped, mut total) = (0.0f64, 0, 0);
    for (ti, grad) in analytic.iter().enumerate() {
        for (k, &gk) in grad.iter().enumerate() {
            total += 1;
            let orig = m.tensors()[ti][k];
            m.tensors_mut()[ti][k] = orig + eps;
            let up = f(m);
            let pat_up = relu_pattern(&m.forward_batch(&batch).unwrap());
            m.tensors_mut()[ti][k] = orig - eps;
            let down = f(m);
            let pat_down = relu_pattern(&m.forward_batch(&batch).unwrap());
            m.tensors_mut()[ti][k] = orig;
            if pat_up != pat_down {
                skipped += 1;
                continue;
            }
            let fd = (up - down) / (2.0 * eps);
            worst = worst.max((gk - fd).abs() / gk.abs().max(fd.abs()).max(1e-6));
        }
    }
    (worst, skipped, total)
}

fn crit2() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut worst, mut skipped, mut total) = (0.0f64, 0, 0);
    for share in [true, false] {
        for _ in 0..20 {
            let n2 = rng.random_range(1..=4);
            let n1 = rng.random_range(1..=n2);
            let d = 3;
            let (e1, e2) = (random_tree(n1, &mut rng), random_tree(n2, &mut rng));
            let ag = AssociationGraph::from_parts(random_rows(n1, d, &mut rng), &e1, random_rows(n2, d, &mut rng), &e2).unwrap();
            let y = random_truth(n1, n2, &mut rng);
            let cfg = AgmnConfig { hidden: 6, depth: 2, n_mp: 2, share_steps: share };
            let mut m = Agmn::<f64>::new(cfg, d, &mut rng).unwrap();
            for p in m.tensors_mut() {
                // biases start at zero; jitter them so units sit away from kinks
                if p.len() <= cfg.hidden {
                    p.iter_mut().for_each(|b| *b = rng.random_range(-0.1..0.1));
                }
            }
            let (w, s, n) = fd_check(&mut m, &ag, &y);
            worst = worst.max(w);
            skipped += s;
            total += n;
        }
    }
    let (fast, time) = within(t, Duration::from_secs(120));
    let few_skipped = skipped * 20 < total;
    outcome(worst < 1e-4 && few_skipped && fast, format!("max rel err {worst:.2e}, {skipped}/{total} kink coords skipped, {time}"))
}

fn crit3() -> Outcome {
    let t = Instant::now();
    let rao: Vec<&IndividualGraph> = small_bench().iter().filter(|g| g.view == ViewTag::Rao).take(6).collect();
    let mut graphs: Vec<IndividualGraph> = rao.iter().map(|&g| g.clone()).collect();
    let stats = agmn::eval::fit_normalization(&graphs.iter().collect::<Vec<_>>()).unwrap();
    agmn::eval::normalize_graphs(&mut graphs, &stats).unwrap();
    let sampler = PairSampler::fixed(&graphs, &[(0, 1), (2, 3), (4, 5)]).unwrap();
    let cfg = TrainConfig { steps: 2000, batch: 3, seed: 3, ..Default::default() };
    let trained = train_with(&graphs, &sampler, &cfg, &AgmnConfig::default()).unwrap();
    let (mut right, mut rows) = (0, 0);
    for &(i, j) in sampler.pairs() {
        let ag = build_association(&graphs[i], &graphs[j]).unwrap();
        let v = vote(&trained.model.predict(&ag).unwrap());
        let y = ground_truth(&graphs[i], &graphs[j]).unwrap();
        for r in 0..y.n1 {
            if y.row(r).contains(&1.0) {
                rows += 1;
                right += (v.row(r) == y.row(r)) as usize;
            }
        }
    }
    let (fast, time) = within(t, Duration::from_secs(120));
    outcome(right == rows && fast, format!("{right}/{rows} matched rows voted correctly after 2000 steps, {time}"))
}

const XVAL_SEED: u64 = 7;
const XVAL_STEPS: u64 = 5000;

struct Xval {
    graphs: Vec<IndividualGraph>,
    result: XvalResult,
    elapsed: Duration,
}

fn xval() -> &'static Xval {
    static X: OnceLock<Xval> = OnceLock::new();
    X.get_or_init(|| {
        let t = Instant::now();
        let graphs = make_benchmark(120, &mut ChaCha8Rng::seed_from_u64(XVAL_SEED)).unwrap().graphs;
        let mut cfg = XvalConfig { seed: XVAL_SEED, ..Default::default() };
        cfg.train.steps = XVAL_STEPS;
        let result = cross_validate(&graphs, &cfg).unwrap();
        Xval { graphs, result, elapsed: t.elapsed() }
    })
}

fn reference_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/xval_reference.json")
}

fn crit4() -> Outcome {
    let x = xval();
    let reports = x.result.reports();
    let (acc, acc_sd) = mean_std(&reports.iter().map(|r| r.acc).collect::<Vec<_>>());
    let base: Vec<f64> = x.result.folds.iter().map(|f| majority_baseline(&f.confusion).acc).collect();
    let (base, _) = mean_std(&base);
    let rec = |c: BaseClass| mean_std(&reports.iter().map(|r| r.class(c).rec).collect::<Vec<_>>()).0;
    let lma = rec(BaseClass::LMA);
    let lma_top = BaseClass::ALL.iter().all(|&c| rec(c) <= lma);

    let path = reference_path();
    let blessing = std::env::var_os("AGMN_BLESS").is_some_and(|v| v == "1");
    if blessing {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        let doc = serde_json::json!({
            "benchmark_seed": XVAL_SEED,
            "xval_seed": XVAL_SEED,
            "steps": XVAL_STEPS,
            "acc_mean": acc,
            "acc_std": acc_sd,
            "fold_acc": reports.iter().map(|r| r.acc).collect::<Vec<_>>(),
            "majority_baseline_acc": base,
        });
        std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    }
    let reference = std::fs::read_to_string(&path)
        .ok()
        .and_then(|s| serde_json::from_str::<serde_json::Value>(&s).ok())
        .and_then(|v| v["acc_mean"].as_f64());
    let near_ref = reference.is_some_and(|r| acc >= r - 0.02);
    let margin = acc - base;
    let (fast, time) = within(Instant::now() - x.elapsed, Duration::from_secs(30 * 60));
    let per_class: Vec<String> = BaseClass::ALL.iter().map(|&c| format!("{} {:.3}", c.name(), rec(c))).collect();
    outcome(
        margin >= 0.25 && lma_top && near_ref && fast,
        format!(
            "acc {acc:.4}±{acc_sd:.4} vs majority {base:.4} (+{:.1} pts), reference {}, recall [{}], {time}",
            margin * 100.0,
            reference.map_or("missing".into(), |r| format!("{r:.4}")),
            per_class.join(", ")
        ),
    )
}

/// Direct per-item evaluation of the weighted metrics, one class at a time.
fn metric_oracle(truth: &[BaseClass], pred: &[Option<BaseClass>]) -> [f64; 5] {
    let n = truth.len() as f64;
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let mut out = [0.0; 5];
    for c in BaseClass::ALL {
        let (mut tp, mut tn, mut fp, mut fneg) = (0.0, 0.0, 0.0, 0.0);
        for (t, p) in truth.iter().zip(pred) {
            let is_t = *t == c;
            let is_p = *p == Some(c);
            match (is_t, is_p) {
                (true, true) => tp += 1.0,
                (false, false) => tn += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fneg += 1.0,
            }
        }
        let w = (tp + fneg) / n;
        let pre = div(tp, tp + fp);
        let rec = div(tp, tp + fneg);
        let f1 = div(2.0 * pre * rec, pre + rec);
        out[0] += w * (tp + tn) / (tp + tn + fp + fneg);
        out[1] += w * pre;
        out[2] += w * rec;
        out[3] += w * f1;
    }
    out[4] = truth.iter().zip(pred).filter(|(t, p)| Some(**t) == **p).count() as f64 / n;
    out
}

fn crit5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n = rng.random_range(1..120);
        // skewed class frequencies, some absent classes
        let weights: Vec<f64> = (0..5).map(|_| if rng.random::<f64>() < 0.2 { 0.0 } else { rng.random::<f64>() + 0.05 }).collect();
        let pick = |rng: &mut ChaCha8Rng| {
            let total: f64 = weights.iter().sum::<f64>().max(1e-9);
            let mut u = rng.random::<f64>() * total;
            for (k, w) in weights.iter().enumerate() {
                if u < *w {
                    return BaseClass::ALL[k];
                }
                u -= w;
            }
            BaseClass::ALL[rng.random_range(0..5)]
        };
        let truth: Vec<BaseClass> = (0..n).map(|_| pick(&mut rng)).collect();
        let pred: Vec<Option<BaseClass>> = truth
            .iter()
            .map(|&t| match rng.random_range(0..10) {
                0 => None,
                1..=3 => Some(BaseClass::ALL[rng.random_range(0..5)]),
                _ => Some(t),
            })
            .collect();
        let tl: Vec<ArteryLabel> = truth.iter().map(|&c| ArteryLabel::new(c, rng.random_range(0..3))).collect();
        let pl: Vec<Option<ArteryLabel>> = pred.iter().map(|p| p.map(|c| ArteryLabel::new(c, rng.random_range(0..3)))).collect();
        let r = weighted_metrics(&confusion(&tl, &pl).unwrap());
        let want = metric_oracle(&truth, &pred);
        for (got, want) in [r.acc, r.pre, r.rec, r.f1, r.plain_acc].iter().zip(want) {
            worst = worst.max((got - want).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max abs diff {worst:.1e} over 50 label sets"))
}

fn disk_line(m: &mut BinaryMask, a: (f64, f64), b: (f64, f64), r: f64) {
    let (w, h) = (m.width(), m.height());
    for y in 0..h {
        for x in 0..w {
            let (px, py) = (x as f64, y as f64);
            let (dx, dy) = (b.0 - a.0, b.1 - a.1);
            let t = (((px - a.0) * dx + (py - a.1) * dy) / (dx * dx + dy * dy)).clamp(0.0, 1.0);
            let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
            if (px - cx).powi(2) + (py - cy).powi(2) <= r * r {
                m.set(x, y, true);
            }
        }
    }
}

fn kp_edge(a: usize, b: usize, from: Pixel, to: Pixel, r: f64) -> KpEdge {
    let n = from.dist(to).round() as usize;
    let pixels: Vec<Pixel> = (1..n)
        .map(|k| {
            let t = k as f64 / n as f64;
            Pixel::new(
                (from.x as f64 + t * (to.x as f64 - from.x as f64)).round() as usize,
                (from.y as f64 + t * (to.y as f64 - from.y as f64)).round() as usize,
            )
        })
        .collect();
    let radii = vec![r; pixels.len()];
    if a <= b {
        KpEdge { pixels, radii, ends: [a, b] }
    } else {
        KpEdge { pixels: pixels.into_iter().rev().collect(), radii, ends: [b, a] }
    }
}

/// Two bifurcations `gap` pixels apart, each with two leaves.
fn double_y(gap: usize) -> KeyPointGraph {
    let pos = [Pixel::new(100, 100), Pixel::new(100 + gap, 100), Pixel::new(60, 60), Pixel::new(60, 140), Pixel::new(160, 60), Pixel::new(160, 140)];
    let nodes = pos.iter().map(|&p| KpNode { position: p, radius: 3.0 }).collect();
    let ends = [(0, 1), (0, 2), (0, 3), (1, 4), (1, 5)];
    let edges = ends.iter().map(|&(a, b)| kp_edge(a, b, pos[a], pos[b], 3.0)).collect();
    KeyPointGraph { width: 256, height: 256, nodes, edges }
}

fn crit6() -> Outcome {
    let cfg = PipelineConfig::default();
    let spacing = 0.3;
    let mut notes = vec![];

    // loop whose lower arc is thinner than the upper one
    let mut m = BinaryMask::new(240, 200);
    disk_line(&mut m, (10.0, 100.0), (60.0, 100.0), 5.0);
    disk_line(&mut m, (60.0, 100.0), (100.0, 55.0), 5.0);
    disk_line(&mut m, (100.0, 55.0), (140.0, 100.0), 5.0);
    disk_line(&mut m, (60.0, 100.0), (100.0, 145.0), 3.5);
    disk_line(&mut m, (100.0, 145.0), (140.0, 100.0), 3.5);
    disk_line(&mut m, (140.0, 100.0), (230.0, 100.0), 5.0);
    let g = keypoint_graph(&m, &cfg, spacing).unwrap();
    let thin_gone = g.edges.iter().flat_map(|e| &e.pixels).all(|p| p.y <= 105);
    let cycle_ok = g.is_acyclic() && g.edges.len() == 1 && thin_gone;
    notes.push(format!("cycle -> {} segment(s), thin arc removed {thin_gone}", g.edges.len()));

    let near = merge_splitting_points(&double_y(5), &cfg);
    let far = merge_splitting_points(&double_y(9), &cfg);
    let merged_ok = near.nodes.len() == 5 && near.edges.len() == 4 && near.degrees().contains(&4) && far == double_y(9);
    notes.push(format!("5px -> {} bifurcation(s), 9px -> {}", near.degrees().iter().filter(|&&d| d >= 3).count(), far.degrees().iter().filter(|&&d| d >= 3).count()));

    // straight vessel with a short side stub that pruning removes
    let mut m = BinaryMask::new(220, 100);
    disk_line(&mut m, (10.0, 50.0), (210.0, 50.0), 5.0);
    disk_line(&mut m, (110.0, 50.0), (110.0, 62.0), 4.0);
    let skel = compute_radii(&m, &skeletonize(&m)).unwrap();
    let kps = detect_keypoints(&skel);
    let split = split_segments(&skel, &kps);
    let kept = prune_small(&split.segments, &cfg, spacing).unwrap();
    let before = delete_cycles(&merge_splitting_points(&KeyPointGraph::from_segments(&skel, &kps, &kept), &cfg));
    let after = merge_degree_two(&before);
    let deg2_ok = before.degrees().contains(&2) && after.edges.len() == 1 && after.nodes.len() == 2;
    notes.push(format!("degree-2 chain {} -> {} segment(s)", before.edges.len(), after.edges.len()));

    let defaults_ok = cfg.t_d_mm == 1.8 && cfg.t_c_px == 15 && cfg.t_sp_px == 8.0;
    notes.push(format!("defaults {} mm / {} px / {} px", cfg.t_d_mm, cfg.t_c_px, cfg.t_sp_px));
    outcome(cycle_ok && merged_ok && deg2_ok && defaults_ok, notes.join("; "))
}

fn crit7() -> Outcome {
    let s = LrSchedule::default();
    let got = [s.lr_at(0), s.lr_at(2000), s.lr_at(4000)];
    let want = [1e-4, 1e-4 * 0.98, 1e-4 * 0.98 * 0.98];
    let ok = got == want && got[0] == 1e-4 && (got[1] - 9.8e-5).abs() <= f64::EPSILON * 9.8e-5 && (got[2] - 9.604e-5).abs() <= 2.0 * f64::EPSILON * 9.604e-5;
    outcome(ok, format!("{:e} {:e} {:e}", got[0], got[1], got[2]))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Enumerates every ordered pixel pair at each offset, tallies a symmetric
/// matrix and evaluates each statistic from its double-sum definition.
fn glcm_oracle(pixels: &[Pixel], values: &[f64], ng: usize, offsets: &[(i64, i64)]) -> [f64; 24] {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let level = |v: f64| -> usize {
        if max == min {
            1
        } else {
            (((v - min) / (max - min) * ng as f64).floor() as usize).min(ng - 1) + 1
        }
    };
    let xl = |v: f64| if v > 0.0 { v * v.log2() } else { 0.0 };
    let mut sums = [0.0; 24];
    let mut used = 0;
    for &(dx, dy) in offsets {
        let mut c = vec![vec![0.0f64; ng + 1]; ng + 1];
        for (a, pa) in pixels.iter().enumerate() {
            for (b, pb) in pixels.iter().enumerate() {
                let d = (pb.x as i64 - pa.x as i64, pb.y as i64 - pa.y as i64);
                if d == (dx, dy) || d == (-dx, -dy) {
                    c[level(values[a])][level(values[b])] += 1.0;
                }
            }
        }
        let tot: f64 = c.iter().flatten().sum();
        if tot == 0.0 {
            continue;
        }
        used += 1;
        let p = |i: usize, j: usize| c[i][j] / tot;
        let r = 1..=ng;
        let px: Vec<f64> = (0..=ng).map(|i| if i == 0 { 0.0 } else { r.clone().map(|j| p(i, j)).sum() }).collect();
        let py: Vec<f64> = (0..=ng).map(|j| if j == 0 { 0.0 } else { r.clone().map(|i| p(i, j)).sum() }).collect();
        let mux: f64 = r.clone().map(|i| i as f64 * px[i]).sum();
        let muy: f64 = r.clone().map(|j| j as f64 * py[j]).sum();
        let sx = r.clone().map(|i| (i as f64 - mux).powi(2) * px[i]).sum::<f64>().sqrt();
        let sy = r.clone().map(|j| (j as f64 - muy).powi(2) * py[j]).sum::<f64>().sqrt();
        let mut f = [0.0; 24];
        let (mut hxy, mut hxy1, mut hxy2) = (0.0, 0.0, 0.0);
        for i in r.clone() {
            for j in r.clone() {
                let (fi, fj, v) = (i as f64, j as f64, p(i, j));
                f[0] += fi * fj * v;
                f[2] += (fi + fj - mux - muy).powi(4) * v;
                f[3] += (fi + fj - mux - muy).powi(3) * v;
                f[4] += (fi + fj - mux - muy).powi(2) * v;
                f[5] += (fi - fj).powi(2) * v;
                f[10] += v * v;
                hxy -= xl(v);
                if v > 0.0 {
                    hxy1 -= v * (px[i] * py[j]).log2();
                }
                hxy2 -= xl(px[i] * py[j]);
                f[14] += v / (1.0 + (fi - fj).powi(2));
                f[16] += v / (1.0 + (fi - fj).powi(2) / (ng * ng) as f64);
                f[17] += v / (1.0 + (fi - fj).abs());
                f[18] += v / (1.0 + (fi - fj).abs() / ng as f64);
                if i != j {
                    f[19] += v / (fi - fj).powi(2);
                }
                f[20] = f64::max(f[20], v);
                f[23] += (fi - mux).powi(2) * v;
            }
        }
        f[1] = mux;
        f[6] = if sx * sy > 0.0 { (f[0] - mux * muy) / (sx * sy) } else { 1.0 };
        let pd = |k: usize| -> f64 { r.clone().flat_map(|i| r.clone().map(move |j| (i, j))).filter(|&(i, j)| i.abs_diff(j) == k).map(|(i, j)| p(i, j)).sum() };
        let ps = |k: usize| -> f64 { r.clone().flat_map(|i| r.clone().map(move |j| (i, j))).filter(|&(i, j)| i + j == k).map(|(i, j)| p(i, j)).sum() };
        f[7] = (0..ng).map(|k| k as f64 * pd(k)).sum();
        f[8] = -(0..ng).map(|k| xl(pd(k))).sum::<f64>();
        f[9] = (0..ng).map(|k| (k as f64 - f[7]).powi(2) * pd(k)).sum();
        f[11] = hxy;
        let hx = -r.clone().map(|i| xl(px[i])).sum::<f64>();
        let hy = -r.clone().map(|j| xl(py[j])).sum::<f64>();
        f[12] = if hx.max(hy) > 0.0 { (hxy - hxy1) / hx.max(hy) } else { 0.0 };
        f[13] = if hxy > hxy2 { 0.0 } else { (1.0 - (-2.0 * (hxy2 - hxy)).exp()).max(0.0).sqrt() };
        f[21] = (2..=2 * ng).map(|k| k as f64 * ps(k)).sum();
        f[22] = -(2..=2 * ng).map(|k| xl(ps(k))).sum::<f64>();
        // Q = D^-1 P D^-1 P is similar to S^2 with S = D^-1/2 P D^-1/2, so the
        // second largest eigenvalue of Q is the second largest lambda(S)^2
        let occ: Vec<usize> = r.clone().filter(|&i| px[i] > 0.0).collect();
        f[15] = if occ.len() < 2 {
            1.0
        } else {
            let s: Vec<Vec<f64>> = occ.iter().map(|&i| occ.iter().map(|&j| p(i, j) / (px[i] * py[j]).sqrt()).collect()).collect();
            let mut sq: Vec<f64> = jacobi_eigenvalues(s).iter().map(|l| l * l).collect();
            sq.sort_by(|a, b| b.total_cmp(a));
            sq[1].sqrt().min(1.0)
        };
        for k in 0..24 {
            sums[k] += f[k];
        }
    }
    if used > 0 {
        sums.iter_mut().for_each(|v| *v /= used as f64);
    }
    sums
}

fn crit8() -> Outcome {
    const OFFSETS: [(i64, i64); 4] = [(1, 0), (1, -1), (0, 1), (1, 1)];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst, mut worst_name) = (0.0f64, "");
    for _ in 0..25 {
        let (w, h) = (rng.random_range(1..=16), rng.random_range(1..=16));
        let mut px = vec![];
        for y in 0..h {
            for x in 0..w {
                if rng.random::<f64>() < 0.8 {
                    px.push(Pixel::new(x, y));
                }
            }
        }
        if px.is_empty() {
            px.push(Pixel::new(0, 0));
        }
        let v: Vec<f64> = px.iter().map(|_| rng.random_range(0..256) as f64).collect();
        let got = glcm_features(&px, &v, 32, &OFFSETS);
        let want = glcm_oracle(&px, &v, 32, &OFFSETS);
        for k in 0..24 {
            let err = (got[k] - want[k]).abs() / want[k].abs().max(1.0);
            if err > worst {
                worst = err;
                worst_name = NAMES[k];
            }
        }
    }
    outcome(worst <= 1e-9, format!("max scaled diff {worst:.1e} ({worst_name}) over 25 patches"))
}

fn crit9() -> Outcome {
    let x = xval();
    let levels = attack_levels();
    let seeds = [0u64, 1, 2];
    let mut combined: Option<AttackReport> = None;
    let mut clean = vec![];
    for f in &x.result.folds {
        let tests: Vec<&IndividualGraph> = f.test_ids.iter().map(|&i| &x.graphs[i]).collect();
        let tpl = f.normalized(&x.graphs, &x.result.split.templates).unwrap();
        let model = f.model.cast::<f32>();
        let rep = attack_sweep(&model, &tests, &f.normalization, &tpl.iter().collect::<Vec<_>>(), &levels, &seeds).unwrap();
        clean.push(rep.baseline.acc);
        match combined.as_mut() {
            None => combined = Some(rep),
            Some(c) => c.extend(&rep).unwrap(),
        }
    }
    let rep = combined.unwrap();
    let (clean, _) = mean_std(&clean);
    let rho = rep.trend();
    let at20 = rep.rows.last().map(|r| r.acc_mean()).unwrap();
    let curve: Vec<String> = rep.rows.iter().map(|r| format!("{:.3}", r.acc_mean())).collect();
    let ok = levels.len() == 7 && rho <= 0.0 && clean - at20 <= 0.15;
    outcome(ok, format!("spearman {rho:.3}, clean {clean:.4}, 20% {at20:.4}, curve [{}]", curve.join(" ")))
}

fn crit10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut bad = 0;
    for _ in 0..100 {
        let n1 = rng.random_range(1..=5);
        let n2 = rng.random_range(n1..=6);
        let rows: Vec<Vec<f64>> = (0..n1).map(|_| (0..n2).map(|_| rng.random::<f64>()).collect()).collect();
        let prob = MatchMatrix::from_rows(&rows).unwrap();
        let m = brute_force_match(&prob).unwrap();
        let cols: Vec<Option<usize>> = (0..n1).map(|i| (0..n2).find(|&a| m.get(i, a) == 1.0)).collect();
        let injective = cols.iter().all(Option::is_some) && {
            let mut c: Vec<usize> = cols.iter().flatten().copied().collect();
            c.sort_unstable();
            c.dedup();
            c.len() == n1
        } && m.count_ones() == n1;
        let got: f64 = cols.iter().enumerate().map(|(i, c)| c.map_or(0.0, |a| rows[i][a])).sum();
        let mut best = f64::NEG_INFINITY;
        let mut pick = vec![0usize; n1];
        enumerate(&rows, 0, &mut pick, &mut vec![false; n2], &mut best);
        if !(injective && got == best) {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("{bad}/100 matrices off the enumerated optimum"))
}

fn enumerate(rows: &[Vec<f64>], i: usize, pick: &mut Vec<usize>, used: &mut Vec<bool>, best: &mut f64) {
    if i == rows.len() {
        let s: f64 = pick.iter().enumerate().map(|(r, &a)| rows[r][a]).sum();
        *best = best.max(s);
        return;
    }
    for a in 0..used.len() {
        if !used[a] {
            used[a] = true;
            pick[i] = a;
            enumerate(rows, i + 1, pick, used, best);
            used[a] = false;
        }
    }
}

fn crit11() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_agmn");
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bench");
    let run = |args: &[&str]| Command::new(bin).args(args).env_remove("AGMN_CONFIG").output().unwrap();
    let s = run(&["synth", "--count", "24", "--seed", "11", "--out", data.to_str().unwrap()]);
    if !s.status.success() {
        return outcome(false, format!("synth failed: {}", String::from_utf8_lossy(&s.stderr)));
    }
    let mut outs = vec![];
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let args = ["--threads", "1", "xval", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "3", "--steps", "60", "--folds", "3"];
        let r = run(&args);
        if !r.status.success() {
            return outcome(false, format!("xval failed: {}", String::from_utf8_lossy(&r.stderr)));
        }
        outs.push(out);
    }
    let files = ["metrics.csv", "metrics.json", "config.json", "fold_0/checkpoint.json", "fold_1/train_log.csv", "fold_2/checkpoint.json"];
    let differing: Vec<&str> =
        files.iter().copied().filter(|f| std::fs::read(outs[0].join(f)).ok() != std::fs::read(outs[1].join(f)).ok() || !outs[0].join(f).exists()).collect();
    outcome(differing.is_empty(), if differing.is_empty() { "two runs byte-identical".into() } else { format!("differ: {differing:?}") })
}

fn main() {
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, &str, fn() -> Outcome); 11] = [
        (1, "association graph counts", crit1),
        (2, "gradient check", crit2),
        (3, "overfit three pairs", crit3),
        (4, "synthetic cross-validation", crit4),
        (5, "weighted metrics oracle", crit5),
        (6, "graph cleanup rules", crit6),
        (7, "learning-rate schedule", crit7),
        (8, "GLCM oracle", crit8),
        (9, "corruption robustness", crit9),
        (10, "brute-force matcher", crit10),
        (11, "xval reproducibility", crit11),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        failed += !o.pass as usize;
        println!("criterion {n:>2} {name:<28} {} ({:.1}s) {}", if o.pass { "PASS" } else { "FAIL" }, t.elapsed().as_secs_f64(), o.detail);
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
