//! Two-hidden-layer ReLU policy with reverse-mode gradients.
//!
//! Parameters live in one flat buffer laid out as `W1 b1 W2 b2 W3 b3`, each
//! weight matrix row-major with shape `(fan_out, fan_in)`. Gradients use the
//! same layout so optimizers and checkpoints can treat both as plain slices.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    dims: [usize; 4],
    data: Vec<f64>,
}

/// Offsets of one affine layer inside the flat buffer.
#[derive(Debug, Clone, Copy)]
struct LayerView {
    fan_in: usize,
    fan_out: usize,
    w: usize,
    b: usize,
}

fn layer_views(dims: &[usize; 4]) -> [LayerView; 3] {
    let mut offset = 0;
    let mut views = [LayerView {
        fan_in: 0,
        fan_out: 0,
        w: 0,
        b: 0,
    }; 3];
    for (l, view) in views.iter_mut().enumerate() {
        let (fan_in, fan_out) = (dims[l], dims[l + 1]);
        *view = LayerView {
            fan_in,
            fan_out,
            w: offset,
            b: offset + fan_in * fan_out,
        };
        offset += fan_in * fan_out + fan_out;
    }
    views
}

pub fn parameter_count(dims: &[usize; 4]) -> usize {
    (0..3).map(|l| dims[l] * dims[l + 1] + dims[l + 1]).sum()
}

impl PolicyParams {
    pub fn zeros(dims: [usize; 4]) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::param("dims", "layer sizes must be positive"));
        }
        Ok(Self {
            dims,
            data: vec![0.0; parameter_count(&dims)],
        })
    }

    pub fn from_flat(dims: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        if data.len() != p.data.len() {
            return Err(Error::DimensionMismatch {
                expected: p.data.len(),
                actual: data.len(),
            });
        }
        p.data = data;
        Ok(p)
    }

    /// Glorot/Xavier uniform weights, zero biases.
    pub fn xavier_init<R: Rng + ?Sized>(dims: [usize; 4], rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(dims)?;
        for view in layer_views(&dims) {
            let limit = (6.0 / (view.fan_in + view.fan_out) as f64).sqrt();
            for w in &mut p.data[view.w..view.b] {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(p)
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        self.dims[3]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Weights of layer `l` (0-based), row-major `(fan_out, fan_in)`.
    pub fn weights(&self, l: usize) -> &[f64] {
        let v = layer_views(&self.dims)[l];
        &self.data[v.w..v.b]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let v = layer_views(&self.dims)[l];
        &mut self.data[v.w..v.b]
    }

    pub fn bias(&self, l: usize) -> &[f64] {
        let v = layer_views(&self.dims)[l];
        &self.data[v.b..v.b + v.fan_out]
    }

    pub fn bias_mut(&mut self, l: usize) -> &mut [f64] {
        let v = layer_views(&self.dims)[l];
        &mut self.data[v.b..v.b + v.fan_out]
    }

    /// `u = W3 relu(W2 relu(W1 s + b1) + b2) + b3`, recording a tape.
    pub fn forward(&self, state: &[f64]) -> Result<(Vec<f64>, GradientTape<'_>)> {
        if state.len() != self.dims[0] {
            return Err(Error::DimensionMismatch {
                expected: self.dims[0],
                actual: state.len(),
            });
        }
        let views = layer_views(&self.dims);
        let z1 = self.affine(views[0], state);
        let a1 = relu(&z1);
        let z2 = self.affine(views[1], &a1);
        let a2 = relu(&z2);
        let u = self.affine(views[2], &a2);
        Ok((
            u,
            GradientTape {
                params: self,
                input: state.to_vec(),
                z1,
                a1,
                z2,
                a2,
            },
        ))
    }

    /// Forward pass without a tape.
    pub fn evaluate(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.forward(state).map(|(u, _)| u)
    }

    fn affine(&self, v: LayerView, x: &[f64]) -> Vec<f64> {
        let w = &self.data[v.w..v.b];
        let b = &self.data[v.b..v.b + v.fan_out];
        w.chunks_exact(v.fan_in)
            .zip(b)
            .map(|(row, bi)| bi + row.iter().zip(x).map(|(a, c)| a * c).sum::<f64>())
            .collect()
    }

    fn activation_pattern(&self, state: &[f64]) -> Vec<bool> {
        let views = layer_views(&self.dims);
        let z1 = self.affine(views[0], state);
        let z2 = self.affine(views[1], &relu(&z1));
        z1.iter().chain(&z2).map(|&z| z > 0.0).collect()
    }
}

fn relu(z: &[f64]) -> Vec<f64> {
    z.iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect()
}

/// Activations of one forward pass. Consumed by [`GradientTape::backward`].
#[derive(Debug)]
pub struct GradientTape<'a> {
    params: &'a PolicyParams,
    input: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
}

/// Gradient with the same flat layout as [`PolicyParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGrad {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl PolicyGrad {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            dims,
            data: vec![0.0; parameter_count(&dims)],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn add_assign(&mut self, other: &PolicyGrad) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.data {
            *a *= c;
        }
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl GradientTape<'_> {
    /// Reverse pass for a scalar whose gradient w.r.t. the outputs is
    /// `upstream`. Returns parameter and input gradients.
    pub fn backward(self, upstream: &[f64]) -> Result<(PolicyGrad, Vec<f64>)> {
        let mut grad = PolicyGrad::zeros(self.params.dims);
        let input_grad = self.backward_into(upstream, &mut grad)?;
        Ok((grad, input_grad))
    }

    /// Like [`backward`](Self::backward) but accumulates into `grad`.
    pub fn backward_into(self, upstream: &[f64], grad: &mut PolicyGrad) -> Result<Vec<f64>> {
        let p = self.params;
        if upstream.len() != p.dims[3] {
            return Err(Error::DimensionMismatch {
                expected: p.dims[3],
                actual: upstream.len(),
            });
        }
        if grad.dims != p.dims {
            return Err(Error::param("grad", "gradient buffer has different dims"));
        }
        let views = layer_views(&p.dims);
        let d_a2 = accumulate_layer(p, views[2], &self.a2, upstream, grad);
        let d_z2 = relu_back(&self.z2, &d_a2);
        let d_a1 = accumulate_layer(p, views[1], &self.a1, &d_z2, grad);
        let d_z1 = relu_back(&self.z1, &d_a1);
        Ok(accumulate_layer(p, views[0], &self.input, &d_z1, grad))
    }
}

/// Accumulates `dW += delta x^T`, `db += delta`; returns `W^T delta`.
fn accumulate_layer(
    p: &PolicyParams,
    v: LayerView,
    x: &[f64],
    delta: &[f64],
    grad: &mut PolicyGrad,
) -> Vec<f64> {
    let w = &p.data[v.w..v.b];
    let mut back = vec![0.0; v.fan_in];
    for (o, &d) in delta.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        grad.data[v.b + o] += d;
        let row = o * v.fan_in;
        let gw = &mut grad.data[v.w + row..v.w + row + v.fan_in];
        for ((g, xi), (wi, bk)) in gw.iter_mut().zip(x).zip(w[row..row + v.fan_in].iter().zip(back.iter_mut())) {
            *g += d * xi;
            *bk += d * wi;
        }
    }
    back
}

fn relu_back(z: &[f64], upstream: &[f64]) -> Vec<f64> {
    z.iter()
        .zip(upstream)
        .map(|(&zi, &g)| if zi > 0.0 { g } else { 0.0 })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiniteDiffReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Coordinates whose perturbation flips a ReLU and so has no classical derivative.
    pub skipped: usize,
}

/// Denominator floor for relative errors of near-zero gradient entries.
pub const FD_REL_FLOOR: f64 = 1e-2;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FD_REL_FLOOR)
}

/// Compares [`GradientTape::backward`] for the probe loss `<probe, u>` against
/// central differences with step `h`.
pub fn finite_diff_check(
    params: &PolicyParams,
    state: &[f64],
    probe: &[f64],
    h: f64,
) -> Result<FiniteDiffReport> {
    let (_, tape) = params.forward(state)?;
    let (grad, _) = tape.backward(probe)?;
    let base_pattern = params.activation_pattern(state);
    let loss = |p: &PolicyParams| -> f64 {
        p.evaluate(state)
            .unwrap()
            .iter()
            .zip(probe)
            .map(|(a, b)| a * b)
            .sum()
    };
    let mut work = params.clone();
    let mut report = FiniteDiffReport {
        max_rel_error: 0.0,
        checked: 0,
        skipped: 0,
    };
    for k in 0..params.len() {
        let orig = work.data[k];
        work.data[k] = orig + h;
        let plus = loss(&work);
        let plus_pattern = work.activation_pattern(state);
        work.data[k] = orig - h;
        let minus = loss(&work);
        let minus_pattern = work.activation_pattern(state);
        work.data[k] = orig;
        if plus_pattern != base_pattern || minus_pattern != base_pattern {
            report.skipped += 1;
            continue;
        }
        let numeric = (plus - minus) / (2.0 * h);
        report.max_rel_error = report.max_rel_error.max(relative_error(grad.data[k], numeric));
        report.checked += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn hand_net() -> PolicyParams {
        PolicyParams::from_flat([1, 1, 1, 1], vec![2.0, -1.0, 1.0, 0.0, 3.0, 0.5]).unwrap()
    }

    fn random_net(dims: [usize; 4], seed: u64) -> PolicyParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = PolicyParams::xavier_init(dims, &mut rng).unwrap();
        for l in 0..3 {
            for b in p.bias_mut(l) {
                *b = rng.random_range(-0.5..0.5);
            }
        }
        p
    }

    #[test]
    fn xavier_statistics() {
        let dims = [64, 64, 64, 3];
        let mut samples = Vec::new();
        let mut seed = 0;
        while samples.len() < 100_000 {
            let p = PolicyParams::xavier_init(dims, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            samples.extend_from_slice(p.weights(0));
            for l in 0..3 {
                assert!(p.bias(l).iter().all(|&b| b == 0.0));
            }
            seed += 1;
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / n;
        let target = 2.0 / 128.0;
        assert!((var - target).abs() / target < 0.05, "{var}");
    }

    #[test]
    fn xavier_is_deterministic() {
        let a = PolicyParams::xavier_init([8, 8, 8, 2], &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = PolicyParams::xavier_init([8, 8, 8, 2], &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn parameter_count_matches_layout() {
        assert_eq!(parameter_count(&[64, 64, 64, 8]), 64 * 64 + 64 + 64 * 64 + 64 + 64 * 8 + 8);
    }

    #[test]
    fn zero_params_give_zero_output() {
        let p = PolicyParams::zeros([5, 5, 5, 2]).unwrap();
        assert_eq!(p.evaluate(&[1.0, -2.0, 3.0, 0.5, 9.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn hand_evaluation() {
        let p = hand_net();
        assert_eq!(p.evaluate(&[1.0]).unwrap(), vec![3.5]);
        assert_eq!(p.evaluate(&[0.0]).unwrap(), vec![0.5]);
        assert!(p.evaluate(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn hand_backward() {
        let p = hand_net();
        let (_, tape) = p.forward(&[1.0]).unwrap();
        let (g, gi) = tape.backward(&[1.0]).unwrap();
        // layout: W1 b1 W2 b2 W3 b3
        assert_eq!(g.as_slice()[4], 1.0);
        assert_eq!(g.as_slice()[5], 1.0);
        // du/ds = 3 * 1 * 1 * 2
        assert_eq!(gi, vec![6.0]);

        let (_, tape) = p.forward(&[1.0]).unwrap();
        let (g, gi) = tape.backward(&[0.0]).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(gi, vec![0.0]);
    }

    #[test]
    fn random_net_matches_finite_differences() {
        for seed in 0..5 {
            let p = random_net([4, 4, 4, 2], seed);
            let s = [0.3, -0.7, 1.1, 0.2];
            let r = finite_diff_check(&p, &s, &[1.0, -0.5], 1e-5).unwrap();
            assert!(r.max_rel_error <= 1e-4, "{r:?}");
            assert!(r.checked > 0);
        }
    }

    #[test]
    fn linear_regime_is_exact() {
        // all weights positive and inputs positive: every ReLU active
        let mut p = PolicyParams::zeros([3, 3, 3, 2]).unwrap();
        for (k, w) in p.as_mut_slice().iter_mut().enumerate() {
            *w = 0.1 + 0.05 * (k % 7) as f64;
        }
        let r = finite_diff_check(&p, &[0.5, 1.0, 1.5], &[1.0, 2.0], 1e-5).unwrap();
        assert_eq!(r.skipped, 0);
        assert!(r.max_rel_error <= 1e-8, "{r:?}");
    }

    #[test]
    fn dead_relu_coordinate_is_skipped() {
        // pre-activation of the only hidden unit is exactly 0 at s = [0.5]
        let p = PolicyParams::from_flat([1, 1, 1, 1], vec![2.0, -1.0, 1.0, 0.0, 3.0, 0.5]).unwrap();
        let r = finite_diff_check(&p, &[0.5], &[1.0], 1e-5).unwrap();
        assert!(r.skipped > 0);
        assert!(r.max_rel_error <= 1e-8);
    }

    #[test]
    fn bias_free_net_is_cubically_homogeneous() {
        let mut p = random_net([5, 6, 6, 3], 11);
        for l in 0..3 {
            p.bias_mut(l).fill(0.0);
        }
        let s = [0.2, -0.4, 0.9, 0.1, -1.0];
        let u = p.evaluate(&s).unwrap();
        let mut q = p.clone();
        q.as_mut_slice().iter_mut().for_each(|w| *w *= 2.0);
        let u2 = q.evaluate(&s).unwrap();
        for (a, b) in u.iter().zip(&u2) {
            assert!((8.0 * a - b).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn backward_is_linear_in_upstream(
            g in prop::collection::vec(-3.0f64..3.0, 2),
            a in -4.0f64..4.0,
        ) {
            let p = random_net([4, 5, 5, 2], 9);
            let s = [0.1, 0.5, -0.3, 0.8];
            let (_, t1) = p.forward(&s).unwrap();
            let (g1, i1) = t1.backward(&g).unwrap();
            let scaled: Vec<f64> = g.iter().map(|v| a * v).collect();
            let (_, t2) = p.forward(&s).unwrap();
            let (g2, i2) = t2.backward(&scaled).unwrap();
            for (x, y) in g1.as_slice().iter().zip(g2.as_slice()) {
                prop_assert!((a * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
            for (x, y) in i1.iter().zip(&i2) {
                prop_assert!((a * x - y).abs() <= 1e-12 * (1.0 + y.abs()));
            }
        }
    }
}
