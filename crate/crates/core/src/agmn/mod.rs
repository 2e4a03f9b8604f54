//! Association-graph matching network.
//!
//! A batch of association graphs is processed as one disjoint union: every
//! MLP acts row-wise, so stacking the vertices (and edges) of all pairs
//! gives large, cache-friendly products. First layers whose input is a
//! concatenation are split into column blocks so that per-node projections
//! are computed once and gathered instead of materializing the
//! concatenated rows.

mod checkpoint;

pub use checkpoint::{Checkpoint, CHECKPOINT_SCHEMA_VERSION};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::assoc::{AssociationGraph, MatchMatrix};
use crate::error::{Error, Result};
use crate::nn::{gemm, Activation, MatRef, Matrix, Mlp, MlpCache, MlpGrads, Real};

/// Lower/upper clamp applied to probabilities before any logarithm.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgmnConfig {
    /// Width of every latent and hidden layer.
    pub hidden: usize,
    /// Affine layers per MLP.
    pub depth: usize,
    /// Message-passing steps.
    pub n_mp: usize,
    /// Reuse one edge/vertex MLP pair across all steps.
    pub share_steps: bool,
}

impl Default for AgmnConfig {
    fn default() -> Self {
        Self { hidden: 64, depth: 4, n_mp: 4, share_steps: true }
    }
}

impl AgmnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.depth == 0 {
            return Err(Error::InvalidInput(format!("bad model shape {self:?}")));
        }
        Ok(())
    }

    fn dims(&self, input: usize, output: usize) -> Vec<usize> {
        let mut d = vec![input];
        d.extend(std::iter::repeat_n(self.hidden, self.depth - 1));
        d.push(output);
        d
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agmn<T> {
    pub config: AgmnConfig,
    pub feature_dim: usize,
    pub emb_v: Mlp<T>,
    pub emb_e: Mlp<T>,
    pub phi_e: Vec<Mlp<T>>,
    pub phi_v: Vec<Mlp<T>>,
    pub phi_d: Mlp<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgmnGrads<T> {
    pub emb_v: MlpGrads<T>,
    pub emb_e: MlpGrads<T>,
    pub phi_e: Vec<MlpGrads<T>>,
    pub phi_v: Vec<MlpGrads<T>>,
    pub phi_d: MlpGrads<T>,
}

impl<T: Real> AgmnGrads<T> {
    pub fn zeros_like(m: &Agmn<T>) -> Self {
        Self {
            emb_v: MlpGrads::zeros_like(&m.emb_v),
            emb_e: MlpGrads::zeros_like(&m.emb_e),
            phi_e: m.phi_e.iter().map(MlpGrads::zeros_like).collect(),
            phi_v: m.phi_v.iter().map(MlpGrads::zeros_like).collect(),
            phi_d: MlpGrads::zeros_like(&m.phi_d),
        }
    }

    /// Same order as [`Agmn::tensors`].
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = self.emb_v.tensors();
        out.extend(self.emb_e.tensors());
        for g in self.phi_e.iter().chain(&self.phi_v) {
            out.extend(g.tensors());
        }
        out.extend(self.phi_d.tensors());
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.emb_v.tensors_mut();
        out.extend(self.emb_e.tensors_mut());
        for g in self.phi_e.iter_mut().chain(self.phi_v.iter_mut()) {
            out.extend(g.tensors_mut());
        }
        out.extend(self.phi_d.tensors_mut());
        out
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|x| x.is_finite()))
    }

    /// Same tensor count and sizes as the model's parameters.
    pub fn matches(&self, m: &Agmn<T>) -> bool {
        let (a, b) = (self.tensors(), m.tensors());
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.len() == y.len())
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &AgmnGrads<T>) {
        for (d, s) in self.tensors_mut().into_iter().zip(other.tensors()) {
            d.iter_mut().zip(s).for_each(|(x, &y)| *x += y);
        }
    }
}

/// Stacked association graphs. Vertex and edge indices are global.
#[derive(Debug, Clone)]
pub struct PairBatch<T> {
    feature_dim: usize,
    x1: Matrix<T>,
    x2: Matrix<T>,
    v_i: Vec<usize>,
    v_a: Vec<usize>,
    e_i: Vec<usize>,
    e_j: Vec<usize>,
    e_a: Vec<usize>,
    e_b: Vec<usize>,
    e_u: Vec<usize>,
    e_v: Vec<usize>,
    /// `(first vertex, n1, n2)` of every pair.
    spans: Vec<(usize, usize, usize)>,
}

impl<T: Real> PairBatch<T> {
    pub fn new(graphs: &[&AssociationGraph]) -> Result<Self> {
        let d = graphs.first().ok_or_else(|| Error::InvalidInput("empty batch".into()))?.feature_dim();
        let mut b = PairBatch {
            feature_dim: d,
            x1: Matrix::zeros(0, d),
            x2: Matrix::zeros(0, d),
            v_i: vec![],
            v_a: vec![],
            e_i: vec![],
            e_j: vec![],
            e_a: vec![],
            e_b: vec![],
            e_u: vec![],
            e_v: vec![],
            spans: vec![],
        };
        let (mut rows1, mut rows2) = (Vec::new(), Vec::new());
        for ag in graphs {
            if ag.feature_dim() != d {
                return Err(Error::Dimension(format!("feature width {} vs {d}", ag.feature_dim())));
            }
            let (o1, o2, ov) = (rows1.len(), rows2.len(), b.v_i.len());
            rows1.extend(ag.x1.iter().map(|r| r.iter().map(|&x| T::of(x)).collect::<Vec<T>>()));
            rows2.extend(ag.x2.iter().map(|r| r.iter().map(|&x| T::of(x)).collect::<Vec<T>>()));
            for i in 0..ag.n1 {
                for a in 0..ag.n2 {
                    b.v_i.push(o1 + i);
                    b.v_a.push(o2 + a);
                }
            }
            for e in &ag.edges {
                let (u, v) = ag.endpoints(e);
                b.e_i.push(o1 + e.i);
                b.e_j.push(o1 + e.j);
                b.e_a.push(o2 + e.a);
                b.e_b.push(o2 + e.b);
                b.e_u.push(ov + u);
                b.e_v.push(ov + v);
            }
            b.spans.push((ov, ag.n1, ag.n2));
        }
        b.x1 = Matrix::from_rows(&rows1)?;
        b.x2 = Matrix::from_rows(&rows2)?;
        Ok(b)
    }

    pub fn n_pairs(&self) -> usize {
        self.spans.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.v_i.len()
    }

    pub fn n_edges(&self) -> usize {
        self.e_u.len()
    }

    pub fn spans(&self) -> &[(usize, usize, usize)] {
        &self.spans
    }
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct AgmnActs<T> {
    emb_v: MlpCache<T>,
    emb_e: Option<MlpCache<T>>,
    steps: Vec<StepActs<T>>,
    dec: MlpCache<T>,
}

#[derive(Debug, Clone)]
struct StepActs<T> {
    edge: MlpCache<T>,
    /// Summed incident edge latents fed to the vertex update.
    sum: Matrix<T>,
    vertex: MlpCache<T>,
}

impl<T: Real> AgmnActs<T> {
    /// Vertex probabilities, one per global vertex.
    pub fn probs(&self) -> &[T] {
        self.dec.output().as_slice()
    }

    fn vertex_latent(&self, t: usize) -> &Matrix<T> {
        if t == 0 {
            self.emb_v.output()
        } else {
            self.steps[t - 1].vertex.output()
        }
    }

    fn edge_latent(&self, t: usize) -> &Matrix<T> {
        if t == 0 {
            self.emb_e.as_ref().expect("edge embedding present when steps run").output()
        } else {
            self.steps[t - 1].edge.output()
        }
    }

    /// Latents after `t` message-passing steps: (vertices, edges).
    pub fn latents(&self, t: usize) -> (&Matrix<T>, Option<&Matrix<T>>) {
        let e = if t == 0 { self.emb_e.as_ref().map(|c| c.output()) } else { Some(self.edge_latent(t)) };
        (self.vertex_latent(t), e)
    }

    /// Probability matrices split per pair.
    pub fn prob_matrices(&self, batch: &PairBatch<T>) -> Vec<MatchMatrix> {
        let p = self.probs();
        batch
            .spans
            .iter()
            .map(|&(o, n1, n2)| MatchMatrix { n1, n2, data: p[o..o + n1 * n2].iter().map(|x| x.as_f64()).collect() })
            .collect()
    }
}

impl<T: Real> Agmn<T> {
    pub fn new<R: Rng + ?Sized>(config: AgmnConfig, feature_dim: usize, rng: &mut R) -> Result<Self> {
        config.validate()?;
        if feature_dim == 0 {
            return Err(Error::InvalidInput("feature dimension must be positive".into()));
        }
        let h = config.hidden;
        let emb_v = Mlp::new(&config.dims(2 * feature_dim, h), Activation::Identity, rng)?;
        let emb_e = Mlp::new(&config.dims(4 * feature_dim, h), Activation::Identity, rng)?;
        let copies = if config.n_mp == 0 {
            0
        } else if config.share_steps {
            1
        } else {
            config.n_mp
        };
        let mut phi_e = Vec::with_capacity(copies);
        let mut phi_v = Vec::with_capacity(copies);
        for _ in 0..copies {
            phi_e.push(Mlp::new(&config.dims(3 * h, h), Activation::Identity, rng)?);
            phi_v.push(Mlp::new(&config.dims(2 * h, h), Activation::Identity, rng)?);
        }
        let phi_d = Mlp::new(&config.dims(h, 1), Activation::Sigmoid, rng)?;
        Ok(Self { config, feature_dim, emb_v, emb_e, phi_e, phi_v, phi_d })
    }

    /// Checks that stored MLP shapes agree with the configuration.
    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let (h, d, l) = (self.config.hidden, self.feature_dim, self.config.depth);
        let copies = if self.config.n_mp == 0 {
            0
        } else if self.config.share_steps {
            1
        } else {
            self.config.n_mp
        };
        let ok = |m: &Mlp<T>, i: usize, o: usize| m.depth() == l && m.input_dim() == i && m.output_dim() == o;
        let shapes = ok(&self.emb_v, 2 * d, h)
            && ok(&self.emb_e, 4 * d, h)
            && self.phi_e.len() == copies
            && self.phi_v.len() == copies
            && self.phi_e.iter().all(|m| ok(m, 3 * h, h))
            && self.phi_v.iter().all(|m| ok(m, 2 * h, h))
            && ok(&self.phi_d, h, 1)
            && self.phi_d.output == Activation::Sigmoid;
        if !shapes {
            return Err(Error::Dimension("model parameters do not match the configuration".into()));
        }
        Ok(())
    }

    fn step_index(&self, t: usize) -> usize {
        if self.config.share_steps {
            0
        } else {
            t
        }
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Parameter tensors in a fixed order.
    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = self.emb_v.tensors();
        out.extend(self.emb_e.tensors());
        for m in self.phi_e.iter().chain(&self.phi_v) {
            out.extend(m.tensors());
        }
        out.extend(self.phi_d.tensors());
        out
    }

    /// Mutable parameter tensors; invalidates outstanding activations.
    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = self.emb_v.tensors_mut();
        out.extend(self.emb_e.tensors_mut());
        for m in self.phi_e.iter_mut().chain(self.phi_v.iter_mut()) {
            out.extend(m.tensors_mut());
        }
        out.extend(self.phi_d.tensors_mut());
        out
    }

    pub fn cast<U: Real>(&self) -> Agmn<U> {
        Agmn {
            config: self.config,
            feature_dim: self.feature_dim,
            emb_v: self.emb_v.cast(),
            emb_e: self.emb_e.cast(),
            phi_e: self.phi_e.iter().map(|m| m.cast()).collect(),
            phi_v: self.phi_v.iter().map(|m| m.cast()).collect(),
            phi_d: self.phi_d.cast(),
        }
    }

    pub fn forward_batch(&self, b: &PairBatch<T>) -> Result<AgmnActs<T>> {
        let d = self.feature_dim;
        if b.feature_dim != d {
            return Err(Error::Dimension(format!("batch features {} vs model {d}", b.feature_dim)));
        }
        let h = self.config.hidden;
        let (nv, ne) = (b.n_vertices(), b.n_edges());

        // vertex embedding: rows [x_i, x_a]
        let p1 = project(&b.x1, &self.emb_v, 0, d);
        let p2 = project(&b.x2, &self.emb_v, d, 2 * d);
        let mut z = Matrix::zeros(nv, h);
        for u in 0..nv {
            add_rows(z.row_mut(u), &[p1.row(b.v_i[u]), p2.row(b.v_a[u])]);
        }
        let emb_v = self.emb_v.forward_preact(z);

        // edge embedding: rows [x_i, x_j, x_a, x_b]
        let emb_e = if self.config.n_mp > 0 {
            let m = &self.emb_e;
            let q1 = project(&b.x1, m, 0, d);
            let q2 = project(&b.x1, m, d, 2 * d);
            let q3 = project(&b.x2, m, 2 * d, 3 * d);
            let q4 = project(&b.x2, m, 3 * d, 4 * d);
            let mut z = Matrix::zeros(ne, h);
            for k in 0..ne {
                add_rows(z.row_mut(k), &[q1.row(b.e_i[k]), q2.row(b.e_j[k]), q3.row(b.e_a[k]), q4.row(b.e_b[k])]);
            }
            Some(self.emb_e.forward_preact(z))
        } else {
            None
        };

        let mut acts = AgmnActs { emb_v, emb_e, steps: Vec::with_capacity(self.config.n_mp), dec: MlpCache::empty() };
        for t in 0..self.config.n_mp {
            let k = self.step_index(t);
            let (x, e) = (acts.vertex_latent(t), acts.edge_latent(t));

            // edges first: [e, x_u, x_v]
            let m = &self.phi_e[k];
            let mut z = Matrix::zeros(ne, h);
            gemm(T::one(), e.view(), first_rows(m, 0, h), T::zero(), z.view_mut());
            let ru = project(x, m, h, 2 * h);
            let rv = project(x, m, 2 * h, 3 * h);
            for j in 0..ne {
                add_rows(z.row_mut(j), &[ru.row(b.e_u[j]), rv.row(b.e_v[j])]);
            }
            let edge = m.forward_preact(z);

            // then vertices: [sum of incident edges, x]
            let e1 = edge.output();
            let mut sum = Matrix::zeros(nv, h);
            for j in 0..ne {
                add_rows(sum.row_mut(b.e_u[j]), &[e1.row(j)]);
                add_rows(sum.row_mut(b.e_v[j]), &[e1.row(j)]);
            }
            let m = &self.phi_v[k];
            let mut z = Matrix::zeros(nv, h);
            gemm(T::one(), sum.view(), first_rows(m, 0, h), T::zero(), z.view_mut());
            gemm(T::one(), x.view(), first_rows(m, h, 2 * h), T::one(), z.view_mut());
            let vertex = self.phi_v[k].forward_preact(z);
            acts.steps.push(StepActs { edge, sum, vertex });
        }
        acts.dec = self.phi_d.forward(acts.vertex_latent(self.config.n_mp))?;
        Ok(acts)
    }

    /// Gradients of a scalar loss given `dprob = dL/dŷ` per global vertex.
    pub fn backward_batch(&self, b: &PairBatch<T>, acts: &AgmnActs<T>, dprob: &[T]) -> Result<AgmnGrads<T>> {
        let mut g = AgmnGrads::zeros_like(self);
        self.backward_into(b, acts, dprob, &mut g)?;
        Ok(g)
    }

    /// Like [`Agmn::backward_batch`] but adds into existing gradients.
    pub fn backward_into(&self, b: &PairBatch<T>, acts: &AgmnActs<T>, dprob: &[T], g: &mut AgmnGrads<T>) -> Result<()> {
        let (nv, ne, h, d) = (b.n_vertices(), b.n_edges(), self.config.hidden, self.feature_dim);
        if dprob.len() != nv || acts.probs().len() != nv || acts.steps.len() != self.config.n_mp {
            return Err(Error::InvalidInput("activations do not belong to this batch and model".into()));
        }
        if !g.matches(self) {
            return Err(Error::Dimension("gradient buffers do not match the model".into()));
        }
        let mut dx = self.phi_d.backward(&acts.dec, Matrix::from_vec(nv, 1, dprob.to_vec())?, &mut g.phi_d)?;
        let mut de_next: Option<Matrix<T>> = None;

        for t in (0..self.config.n_mp).rev() {
            let k = self.step_index(t);
            let st = &acts.steps[t];
            let (x, e) = (acts.vertex_latent(t), acts.edge_latent(t));

            let dzv = self.phi_v[k].backward_preact(&st.vertex, dx, &mut g.phi_v[k])?;
            let wv = &self.phi_v[k].layers()[0].w;
            gemm(T::one(), dzv.view().t(), st.sum.view(), T::one(), g.phi_v[k].dw[0].view_mut().col_block(0, h));
            gemm(T::one(), dzv.view().t(), x.view(), T::one(), g.phi_v[k].dw[0].view_mut().col_block(h, 2 * h));
            let mut ds = Matrix::zeros(nv, h);
            gemm(T::one(), dzv.view(), wv.view().col_block(0, h), T::zero(), ds.view_mut());
            let mut dxt = Matrix::zeros(nv, h);
            gemm(T::one(), dzv.view(), wv.view().col_block(h, 2 * h), T::zero(), dxt.view_mut());

            let mut de1 = de_next.take().unwrap_or_else(|| Matrix::zeros(ne, h));
            for j in 0..ne {
                add_rows(de1.row_mut(j), &[ds.row(b.e_u[j]), ds.row(b.e_v[j])]);
            }
            let dze = self.phi_e[k].backward_preact(&st.edge, de1, &mut g.phi_e[k])?;
            let we = &self.phi_e[k].layers()[0].w;
            gemm(T::one(), dze.view().t(), e.view(), T::one(), g.phi_e[k].dw[0].view_mut().col_block(0, h));
            let (mut dru, mut drv) = (Matrix::zeros(nv, h), Matrix::zeros(nv, h));
            for j in 0..ne {
                add_rows(dru.row_mut(b.e_u[j]), &[dze.row(j)]);
                add_rows(drv.row_mut(b.e_v[j]), &[dze.row(j)]);
            }
            gemm(T::one(), dru.view().t(), x.view(), T::one(), g.phi_e[k].dw[0].view_mut().col_block(h, 2 * h));
            gemm(T::one(), drv.view().t(), x.view(), T::one(), g.phi_e[k].dw[0].view_mut().col_block(2 * h, 3 * h));
            gemm(T::one(), dru.view(), we.view().col_block(h, 2 * h), T::one(), dxt.view_mut());
            gemm(T::one(), drv.view(), we.view().col_block(2 * h, 3 * h), T::one(), dxt.view_mut());
            let mut de = Matrix::zeros(ne, h);
            gemm(T::one(), dze.view(), we.view().col_block(0, h), T::zero(), de.view_mut());
            de_next = Some(de);
            dx = dxt;
        }

        let dz = self.emb_v.backward_preact(&acts.emb_v, dx, &mut g.emb_v)?;
        let (mut dp1, mut dp2) = (Matrix::zeros(b.x1.rows(), h), Matrix::zeros(b.x2.rows(), h));
        for u in 0..nv {
            add_rows(dp1.row_mut(b.v_i[u]), &[dz.row(u)]);
            add_rows(dp2.row_mut(b.v_a[u]), &[dz.row(u)]);
        }
        accumulate_block(&mut g.emb_v.dw[0], &dp1, &b.x1, 0, d);
        accumulate_block(&mut g.emb_v.dw[0], &dp2, &b.x2, d, 2 * d);

        if let (Some(cache), Some(de)) = (&acts.emb_e, de_next) {
            let dz = self.emb_e.backward_preact(cache, de, &mut g.emb_e)?;
            let mut dq: Vec<Matrix<T>> = (0..4)
                .map(|q| Matrix::zeros(if q < 2 { b.x1.rows() } else { b.x2.rows() }, h))
                .collect();
            for k in 0..ne {
                let src = dz.row(k);
                add_rows(dq[0].row_mut(b.e_i[k]), &[src]);
                add_rows(dq[1].row_mut(b.e_j[k]), &[src]);
                add_rows(dq[2].row_mut(b.e_a[k]), &[src]);
                add_rows(dq[3].row_mut(b.e_b[k]), &[src]);
            }
            accumulate_block(&mut g.emb_e.dw[0], &dq[0], &b.x1, 0, d);
            accumulate_block(&mut g.emb_e.dw[0], &dq[1], &b.x1, d, 2 * d);
            accumulate_block(&mut g.emb_e.dw[0], &dq[2], &b.x2, 2 * d, 3 * d);
            accumulate_block(&mut g.emb_e.dw[0], &dq[3], &b.x2, 3 * d, 4 * d);
        }
        Ok(())
    }

    /// Probability matrix for one association graph.
    pub fn forward(&self, ag: &AssociationGraph) -> Result<(MatchMatrix, AgmnActs<T>)> {
        let b = PairBatch::new(&[ag])?;
        let acts = self.forward_batch(&b)?;
        let p = acts.prob_matrices(&b).pop().unwrap();
        Ok((p, acts))
    }

    pub fn predict(&self, ag: &AssociationGraph) -> Result<MatchMatrix> {
        Ok(self.forward(ag)?.0)
    }

    /// Mean per-pair loss of a batch and its gradients.
    pub fn loss_and_grad(
        &self,
        b: &PairBatch<T>,
        truths: &[MatchMatrix],
        pos_weight: f64,
    ) -> Result<(f64, AgmnGrads<T>, AgmnActs<T>)> {
        let scale = 1.0 / b.n_pairs() as f64;
        let mut g = AgmnGrads::zeros_like(self);
        let (total, acts) = self.accumulate_loss_grad(b, truths, pos_weight, scale, &mut g)?;
        Ok((total * scale, g, acts))
    }

    /// Adds `scale * d(sum of pair losses)` into `g` and returns the
    /// unscaled loss sum.
    pub fn accumulate_loss_grad(
        &self,
        b: &PairBatch<T>,
        truths: &[MatchMatrix],
        pos_weight: f64,
        scale: f64,
        g: &mut AgmnGrads<T>,
    ) -> Result<(f64, AgmnActs<T>)> {
        if truths.len() != b.n_pairs() {
            return Err(Error::Dimension(format!("{} truths for {} pairs", truths.len(), b.n_pairs())));
        }
        for (&(_, n1, n2), y) in b.spans.iter().zip(truths) {
            if (y.n1, y.n2) != (n1, n2) {
                return Err(Error::Dimension("truth shape differs from its pair".into()));
            }
        }
        let acts = self.forward_batch(b)?;
        let probs = acts.probs();
        let mut total = 0.0;
        let mut dprob = vec![T::zero(); probs.len()];
        for (&(o, _, _), y) in b.spans.iter().zip(truths) {
            for (q, &yv) in y.data.iter().enumerate() {
                let p = probs[o + q].as_f64();
                total += bce(p, yv, pos_weight);
                dprob[o + q] = T::of(scale * bce_grad(p, yv, pos_weight));
            }
        }
        self.backward_into(b, &acts, &dprob, g)?;
        Ok((total, acts))
    }
}

/// On/off state of every hidden ReLU unit. Finite-difference checks use
/// it to detect perturbations that straddle a kink.
pub fn relu_pattern<T: Real>(acts: &AgmnActs<T>) -> Vec<bool> {
    let mut out = Vec::new();
    let mut push = |c: &MlpCache<T>| {
        for m in c.hidden() {
            out.extend(m.as_slice().iter().map(|&v| v > T::zero()));
        }
    };
    push(&acts.emb_v);
    if let Some(c) = &acts.emb_e {
        push(c);
    }
    for s in &acts.steps {
        push(&s.edge);
        push(&s.vertex);
    }
    push(&acts.dec);
    out
}

/// Rows `r0..r1` of the first layer's `Wᵀ`.
fn first_rows<T: Real>(m: &Mlp<T>, r0: usize, r1: usize) -> MatRef<'_, T> {
    m.weight_t(0).view().t().col_block(r0, r1).t()
}

/// `x · W[:, c0..c1]ᵀ` for the first layer of `m`.
fn project<T: Real>(x: &Matrix<T>, m: &Mlp<T>, c0: usize, c1: usize) -> Matrix<T> {
    let mut out = Matrix::zeros(x.rows(), m.layers()[0].fan_out());
    gemm(T::one(), x.view(), first_rows(m, c0, c1), T::zero(), out.view_mut());
    out
}

/// `dW[:, c0..c1] += dpᵀ · x`.
fn accumulate_block<T: Real>(dw: &mut Matrix<T>, dp: &Matrix<T>, x: &Matrix<T>, c0: usize, c1: usize) {
    gemm(T::one(), dp.view().t(), x.view(), T::one(), dw.view_mut().col_block(c0, c1));
}

#[inline]
fn add_rows<T: Real>(dst: &mut [T], srcs: &[&[T]]) {
    for s in srcs {
        for (d, &v) in dst.iter_mut().zip(*s) {
            *d += v;
        }
    }
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

/// Binary cross entropy of one entry; `pos_weight` scales the positive term.
pub fn bce(p: f64, y: f64, pos_weight: f64) -> f64 {
    let c = clamp_prob(p);
    -(pos_weight * y * c.ln() + (1.0 - y) * (1.0 - c).ln())
}

/// Derivative of [`bce`] with respect to the unclamped probability.
pub fn bce_grad(p: f64, y: f64, pos_weight: f64) -> f64 {
    if !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
        return 0.0;
    }
    -(pos_weight * y / p) + (1.0 - y) / (1.0 - p)
}

/// Permutation loss summed over all entries.
pub fn loss(prob: &MatchMatrix, truth: &MatchMatrix) -> Result<f64> {
    weighted_loss(prob, truth, 1.0)
}

pub fn weighted_loss(prob: &MatchMatrix, truth: &MatchMatrix, pos_weight: f64) -> Result<f64> {
    if (prob.n1, prob.n2) != (truth.n1, truth.n2) {
        return Err(Error::Dimension(format!(
            "probabilities are {}x{}, truth is {}x{}",
            prob.n1, prob.n2, truth.n1, truth.n2
        )));
    }
    Ok(prob.data.iter().zip(&truth.data).map(|(&p, &y)| bce(p, y, pos_weight)).sum())
}

/// One-hot rows at the row maximum; ties go to the lowest column.
pub fn vote(prob: &MatchMatrix) -> MatchMatrix {
    let mut out = MatchMatrix::zeros(prob.n1, prob.n2);
    for i in 0..prob.n1 {
        let row = prob.row(i);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        if prob.n2 > 0 {
            out.set(i, best, 1.0);
        }
    }
    out
}
