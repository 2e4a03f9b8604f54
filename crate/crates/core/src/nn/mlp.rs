use rand::Rng;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{gemm, glorot_bound, Matrix, Real};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Sigmoid,
}

impl Activation {
    fn apply<T: Real>(self, m: &mut Matrix<T>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => m.as_mut_slice().iter_mut().for_each(|x| *x = x.max(T::zero())),
            Activation::Sigmoid => {
                m.as_mut_slice().iter_mut().for_each(|x| *x = T::one() / (T::one() + (-*x).exp()))
            }
        }
    }

    /// Multiplies `d` by the derivative, expressed through the activation output `y`.
    fn chain<T: Real>(self, y: &Matrix<T>, d: &mut Matrix<T>) {
        match self {
            Activation::Identity => {}
            Activation::Relu => d
                .as_mut_slice()
                .iter_mut()
                .zip(y.as_slice())
                .for_each(|(g, &v)| *g = if v > T::zero() { *g } else { T::zero() }),
            Activation::Sigmoid => {
                d.as_mut_slice().iter_mut().zip(y.as_slice()).for_each(|(g, &v)| *g *= v * (T::one() - v))
            }
        }
    }
}

/// Affine layer `z = x Wᵀ + b` with `W` stored `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense<T> {
    pub w: Matrix<T>,
    pub b: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn glorot<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let bound = glorot_bound(fan_in, fan_out);
        let w = Matrix::from_fn(fan_out, fan_in, |_, _| T::of(rng.random_range(-bound..=bound)));
        Self { w, b: vec![T::zero(); fan_out] }
    }

    pub fn fan_in(&self) -> usize {
        self.w.cols()
    }

    pub fn fan_out(&self) -> usize {
        self.w.rows()
    }
}

/// Multi-layer perceptron: ReLU between layers, configurable output activation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    layers: Vec<Dense<T>>,
    pub output: Activation,
    /// Bumped whenever parameters are handed out for mutation.
    #[serde(skip)]
    generation: u64,
    #[serde(skip, default = "TransposeCache::default")]
    wt: TransposeCache<T>,
}

/// Lazily built `Wᵀ` of every layer, so products `x Wᵀ` read contiguous rows.
#[derive(Debug, Clone)]
struct TransposeCache<T>(OnceLock<Vec<Matrix<T>>>);

impl<T> Default for TransposeCache<T> {
    fn default() -> Self {
        Self(OnceLock::new())
    }
}

impl<T> PartialEq for TransposeCache<T> {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

/// Activations retained by a forward pass.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    generation: u64,
    input: Option<Matrix<T>>,
    /// Output of every layer after its activation.
    acts: Vec<Matrix<T>>,
}

impl<T: Real> MlpCache<T> {
    pub fn output(&self) -> &Matrix<T> {
        self.acts.last().expect("at least one layer")
    }

    /// Post-ReLU outputs of the hidden layers.
    pub fn hidden(&self) -> &[Matrix<T>] {
        &self.acts[..self.acts.len().saturating_sub(1)]
    }

    pub(crate) fn empty() -> Self {
        Self { generation: u64::MAX, input: None, acts: vec![] }
    }
}

/// Parameter gradients shaped like an [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrads<T> {
    pub dw: Vec<Matrix<T>>,
    pub db: Vec<Vec<T>>,
}

impl<T: Real> MlpGrads<T> {
    pub fn zeros_like(m: &Mlp<T>) -> Self {
        Self {
            dw: m.layers.iter().map(|l| Matrix::zeros(l.w.rows(), l.w.cols())).collect(),
            db: m.layers.iter().map(|l| vec![T::zero(); l.b.len()]).collect(),
        }
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = Vec::with_capacity(2 * self.dw.len());
        for (w, b) in self.dw.iter().zip(&self.db) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::with_capacity(2 * self.dw.len());
        for (w, b) in self.dw.iter_mut().zip(self.db.iter_mut()) {
            out.push(w.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }

    pub fn fill_zero(&mut self) {
        self.tensors_mut().into_iter().for_each(|t| t.iter_mut().for_each(|x| *x = T::zero()));
    }
}

impl<T: Real> Mlp<T> {
    /// `dims = [input, hidden.., output]`; one affine layer per consecutive pair.
    pub fn new<R: Rng + ?Sized>(dims: &[usize], output: Activation, rng: &mut R) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidInput(format!("bad layer widths {dims:?}")));
        }
        let layers = dims.windows(2).map(|w| Dense::glorot(w[0], w[1], rng)).collect();
        Ok(Self { layers, output, generation: 0, wt: TransposeCache::default() })
    }

    pub fn from_layers(layers: Vec<Dense<T>>, output: Activation) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidInput("an MLP needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.b.len() != l.fan_out() {
                return Err(Error::Dimension(format!("layer {i}: bias length {} vs {} outputs", l.b.len(), l.fan_out())));
            }
            if i > 0 && layers[i - 1].fan_out() != l.fan_in() {
                return Err(Error::Dimension(format!("layer {i} does not chain")));
            }
        }
        Ok(Self { layers, output, generation: 0, wt: TransposeCache::default() })
    }

    pub fn layers(&self) -> &[Dense<T>] {
        &self.layers
    }

    /// Mutable layers; invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> &mut [Dense<T>] {
        self.generation += 1;
        self.wt = TransposeCache::default();
        &mut self.layers
    }

    /// `Wᵀ` of layer `l`, shape `fan_in x fan_out`.
    pub fn weight_t(&self, l: usize) -> &Matrix<T> {
        &self.wt.0.get_or_init(|| {
            self.layers.iter().map(|d| Matrix::from_fn(d.w.cols(), d.w.rows(), |r, c| d.w.get(c, r))).collect()
        })[l]
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().fan_out()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.as_slice().len() + l.b.len()).sum()
    }

    fn activation(&self, l: usize) -> Activation {
        if l + 1 == self.layers.len() {
            self.output
        } else {
            Activation::Relu
        }
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers.iter().flat_map(|l| [l.w.as_slice(), l.b.as_slice()]).collect()
    }

    /// Mutable parameter slices; invalidates outstanding caches.
    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.layers_mut().iter_mut().flat_map(|l| [l.w.as_mut_slice(), l.b.as_mut_slice()]).collect()
    }

    /// Batched forward pass; rows of `x` are samples.
    pub fn forward(&self, x: &Matrix<T>) -> Result<MlpCache<T>> {
        if x.cols() != self.input_dim() {
            return Err(Error::Dimension(format!("input width {} vs {}", x.cols(), self.input_dim())));
        }
        let mut z0 = Matrix::zeros(x.rows(), self.layers[0].fan_out());
        gemm(T::one(), x.view(), self.weight_t(0).view(), T::zero(), z0.view_mut());
        let mut cache = self.forward_preact(z0);
        cache.input = Some(x.clone());
        Ok(cache)
    }

    /// Forward pass for a single input vector.
    pub fn forward_vec(&self, x: &[T]) -> Result<(Vec<T>, MlpCache<T>)> {
        let cache = self.forward(&Matrix::from_vec(1, x.len(), x.to_vec())?)?;
        Ok((cache.output().row(0).to_vec(), cache))
    }

    /// Continues a forward pass from the first layer's product `x W0ᵀ`
    /// (bias not yet added). Callers that assemble that product from
    /// blocks avoid materializing concatenated inputs.
    pub fn forward_preact(&self, mut z0: Matrix<T>) -> MlpCache<T> {
        assert_eq!(z0.cols(), self.layers[0].fan_out(), "first-layer width");
        let mut acts = Vec::with_capacity(self.layers.len());
        bias_act(&mut z0, &self.layers[0].b, self.activation(0));
        acts.push(z0);
        for l in 1..self.layers.len() {
            let layer = &self.layers[l];
            let mut z = Matrix::zeros(acts[l - 1].rows(), layer.fan_out());
            gemm(T::one(), acts[l - 1].view(), self.weight_t(l).view(), T::zero(), z.view_mut());
            bias_act(&mut z, &layer.b, self.activation(l));
            acts.push(z);
        }
        MlpCache { generation: self.generation, input: None, acts }
    }

    /// Accumulates gradients of every parameter except the first weight
    /// matrix and returns the gradient with respect to the first layer's
    /// pre-activation.
    pub fn backward_preact(&self, cache: &MlpCache<T>, dy: Matrix<T>, grads: &mut MlpGrads<T>) -> Result<Matrix<T>> {
        if cache.generation != self.generation || cache.acts.len() != self.layers.len() {
            return Err(Error::InvalidInput("stale MLP cache".into()));
        }
        if dy.shape() != cache.output().shape() {
            return Err(Error::Dimension(format!("output gradient {:?} vs {:?}", dy.shape(), cache.output().shape())));
        }
        let mut d = dy;
        for l in (0..self.layers.len()).rev() {
            self.activation(l).chain(&cache.acts[l], &mut d);
            col_sums_into(&d, &mut grads.db[l]);
            if l == 0 {
                break;
            }
            gemm(T::one(), d.view().t(), cache.acts[l - 1].view(), T::one(), grads.dw[l].view_mut());
            d = d.matmul(&self.layers[l].w);
        }
        Ok(d)
    }

    /// Full backward pass; returns the input gradient.
    pub fn backward(&self, cache: &MlpCache<T>, dy: Matrix<T>, grads: &mut MlpGrads<T>) -> Result<Matrix<T>> {
        let input = cache.input.as_ref().ok_or_else(|| Error::InvalidInput("cache has no stored input".into()))?;
        let dz0 = self.backward_preact(cache, dy, grads)?;
        gemm(T::one(), dz0.view().t(), input.view(), T::one(), grads.dw[0].view_mut());
        Ok(dz0.matmul(&self.layers[0].w))
    }

    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            layers: self.layers.iter().map(|l| Dense { w: l.w.cast(), b: l.b.iter().map(|x| U::of(x.as_f64())).collect() }).collect(),
            output: self.output,
            generation: 0,
            wt: TransposeCache::default(),
        }
    }
}

/// Adds the bias to every row and applies the activation in one pass.
fn bias_act<T: Real>(z: &mut Matrix<T>, b: &[T], act: Activation) {
    let w = b.len();
    if w == 0 {
        return;
    }
    for row in z.as_mut_slice().chunks_exact_mut(w) {
        match act {
            Activation::Relu => row.iter_mut().zip(b).for_each(|(x, &v)| *x = (*x + v).max(T::zero())),
            _ => row.iter_mut().zip(b).for_each(|(x, &v)| *x += v),
        }
    }
    if act == Activation::Sigmoid {
        act.apply(z);
    }
}

fn col_sums_into<T: Real>(m: &Matrix<T>, out: &mut [T]) {
    if out.is_empty() {
        return;
    }
    for row in m.as_slice().chunks_exact(out.len()) {
        out.iter_mut().zip(row).for_each(|(o, &v)| *o += v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_mlp(dims: &[usize], out: Activation, seed: u64) -> Mlp<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Mlp::new(dims, out, &mut rng).unwrap();
        // nonzero biases so every code path is exercised
        for l in m.layers_mut().iter_mut() {
            l.b.iter_mut().for_each(|b| *b = rng.random_range(-0.5..0.5));
        }
        m
    }

    /// Straight loops, no shared helpers.
    fn oracle_forward(m: &Mlp<f64>, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for (l, layer) in m.layers.iter().enumerate() {
            let mut z = vec![0.0; layer.fan_out()];
            for o in 0..layer.fan_out() {
                z[o] = layer.b[o];
                for i in 0..layer.fan_in() {
                    z[o] += layer.w.get(o, i) * a[i];
                }
            }
            let last = l + 1 == m.layers.len();
            a = z
                .into_iter()
                .map(|v| match (last, m.output) {
                    (false, _) => v.max(0.0),
                    (true, Activation::Sigmoid) => 1.0 / (1.0 + (-v).exp()),
                    (true, Activation::Relu) => v.max(0.0),
                    (true, Activation::Identity) => v,
                })
                .collect();
        }
        a
    }

    #[test]
    fn zero_weights_give_bias() {
        let mut m = random_mlp(&[3, 4, 2], Activation::Identity, 1);
        for l in m.layers_mut().iter_mut() {
            l.w.fill(0.0);
        }
        m.layers_mut()[1].b = vec![0.25, -1.5];
        let (y, _) = m.forward_vec(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(y, vec![0.25, -1.5]);
    }

    #[test]
    fn identity_layer() {
        let w = Matrix::from_fn(3, 3, |r, c| if r == c { 1.0 } else { 0.0 });
        let m = Mlp::from_layers(vec![Dense { w, b: vec![0.0; 3] }], Activation::Identity).unwrap();
        let (y, _) = m.forward_vec(&[0.5, -2.0, 7.0]).unwrap();
        assert_eq!(y, vec![0.5, -2.0, 7.0]);
    }

    #[test]
    fn forward_matches_oracle() {
        let m = random_mlp(&[5, 6, 3], Activation::Sigmoid, 7);
        let x = [0.3, -1.2, 0.8, 2.0, -0.1];
        let (y, _) = m.forward_vec(&x).unwrap();
        for (a, b) in y.iter().zip(oracle_forward(&m, &x)) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(m.forward_vec(&[1.0]).is_err());
    }

    #[test]
    fn zero_output_gradient() {
        let m = random_mlp(&[4, 5, 2], Activation::Identity, 3);
        let x = Matrix::from_fn(3, 4, |r, c| (r + c) as f64 * 0.1 - 0.2);
        let cache = m.forward(&x).unwrap();
        let mut g = MlpGrads::zeros_like(&m);
        let dx = m.backward(&cache, Matrix::zeros(3, 2), &mut g).unwrap();
        assert!(dx.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn linear_weight_gradient_is_outer_product() {
        let m = random_mlp(&[3, 2], Activation::Identity, 5);
        let x = [1.0, -2.0, 0.5];
        let (_, cache) = m.forward_vec(&x).unwrap();
        let dy = [0.7, -0.3];
        let mut g = MlpGrads::zeros_like(&m);
        m.backward(&cache, Matrix::from_vec(1, 2, dy.to_vec()).unwrap(), &mut g).unwrap();
        for o in 0..2 {
            for i in 0..3 {
                assert_eq!(g.dw[0].get(o, i), dy[o] * x[i]);
            }
        }
        assert_eq!(g.db[0], dy.to_vec());
    }

    #[test]
    fn stale_cache_rejected() {
        let mut m = random_mlp(&[2, 2], Activation::Identity, 5);
        let (_, cache) = m.forward_vec(&[1.0, 1.0]).unwrap();
        m.tensors_mut();
        let mut g = MlpGrads::zeros_like(&m);
        assert!(m.backward(&cache, Matrix::zeros(1, 2), &mut g).is_err());
    }

    /// Scalar objective `sum(dy ⊙ f(x))` evaluated by the oracle.
    fn objective(m: &Mlp<f64>, xs: &[Vec<f64>], dy: &[Vec<f64>]) -> f64 {
        xs.iter().zip(dy).map(|(x, d)| oracle_forward(m, x).iter().zip(d).map(|(a, b)| a * b).sum::<f64>()).sum()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    fn check_gradients(seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let depth = rng.random_range(1..=3);
        let mut dims = vec![rng.random_range(1..=6)];
        for _ in 0..depth {
            dims.push(rng.random_range(1..=6));
        }
        let out = if rng.random::<bool>() { Activation::Sigmoid } else { Activation::Identity };
        let mut m = random_mlp(&dims, out, seed);
        let rows = rng.random_range(1..=3);
        let xs: Vec<Vec<f64>> = (0..rows).map(|_| (0..dims[0]).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let dys: Vec<Vec<f64>> =
            (0..rows).map(|_| (0..*dims.last().unwrap()).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();

        let cache = m.forward(&Matrix::from_rows(&xs).unwrap()).unwrap();
        let mut g = MlpGrads::zeros_like(&m);
        let dx = m.backward(&cache, Matrix::from_rows(&dys).unwrap(), &mut g).unwrap();

        let eps = 1e-5;
        let analytic: Vec<Vec<f64>> = g.tensors().iter().map(|t| t.to_vec()).collect();
        for (ti, grad) in analytic.iter().enumerate() {
            for k in 0..grad.len() {
                let orig = m.tensors()[ti][k];
                m.tensors_mut()[ti][k] = orig + eps;
                let up = objective(&m, &xs, &dys);
                m.tensors_mut()[ti][k] = orig - eps;
                let down = objective(&m, &xs, &dys);
                m.tensors_mut()[ti][k] = orig;
                let fd = (up - down) / (2.0 * eps);
                assert!(rel_err(grad[k], fd) < 1e-4, "seed {seed} tensor {ti}[{k}]: {} vs {fd}", grad[k]);
            }
        }
        for r in 0..rows {
            for c in 0..dims[0] {
                let mut xp = xs.clone();
                xp[r][c] += eps;
                let mut xm = xs.clone();
                xm[r][c] -= eps;
                let fd = (objective(&m, &xp, &dys) - objective(&m, &xm, &dys)) / (2.0 * eps);
                assert!(rel_err(dx.get(r, c), fd) < 1e-4, "seed {seed} dx[{r},{c}]");
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        for seed in 0..100 {
            check_gradients(seed);
        }
    }

    #[test]
    fn deterministic() {
        let m = random_mlp(&[6, 8, 8, 1], Activation::Sigmoid, 11);
        let x = Matrix::from_fn(10, 6, |r, c| ((r * 7 + c) as f64).sin());
        let run = || {
            let cache = m.forward(&x).unwrap();
            let mut g = MlpGrads::zeros_like(&m);
            let dx = m.backward(&cache, cache.output().map(|v| v - 0.5), &mut g).unwrap();
            (cache.output().clone(), dx, g)
        };
        assert_eq!(run(), run());
    }

    proptest! {
        #[test]
        fn preact_route_matches_forward(seed in 0u64..1000) {
            let m = random_mlp(&[4, 5, 3], Activation::Relu, seed);
            let x = Matrix::from_fn(3, 4, |r, c| ((seed as usize + r * 4 + c) as f64).cos());
            let full = m.forward(&x).unwrap();
            let split = m.forward_preact(x.matmul_t(&m.layers[0].w));
            prop_assert_eq!(full.output(), split.output());
        }
    }
}
