//! Dense feed-forward networks with hand-written backpropagation, plus the
//! SGD, Adam and RMSProp updates and WGAN-style weight clipping.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Sigmoid,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Linear => z,
        }
    }

    /// Derivative with respect to the pre-activation.
    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
            Activation::Linear => 1.0,
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "linear" => Ok(Activation::Linear),
            _ => Err(Error::UnknownName {
                kind: "activation",
                name: s.to_string(),
            }),
        }
    }
}

/// Logistic function, evaluated without overflow for large `|z|`.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Uniform Glorot initialization on `[-√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out))]`.
pub fn init_xavier<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Array2<f64> {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
    Array2::from_shape_simple_fn((fan_in, fan_out), || dist.sample(rng))
}

/// `y = act(x W + b)` with `W` stored as `input_width × output_width`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn input_width(&self) -> usize {
        self.weights.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.weights.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Per-layer inputs and pre-activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub inputs: Vec<Array2<f64>>,
    pub pre_activations: Vec<Array2<f64>>,
}

impl ForwardCache {
    /// Pre-activation of the last layer.
    pub fn output_pre_activation(&self) -> &Array2<f64> {
        self.pre_activations.last().expect("non-empty network")
    }
}

/// Gradients with the same shapes as the network's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<(Array2<f64>, Array1<f64>)>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| (Array2::zeros(l.weights.raw_dim()), Array1::zeros(l.bias.raw_dim())))
                .collect(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|(w, b)| w.iter().chain(b.iter()))
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            w.scaled_add(scale, ow);
            b.scaled_add(scale, ob);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|(w, b)| w.iter().chain(b.iter()).all(|v| v.is_finite()))
    }
}

impl Mlp {
    /// Xavier weights, zero biases. `layers` lists `(output_width, activation)`
    /// after the input.
    pub fn new<R: Rng + ?Sized>(
        input_width: usize,
        layers: &[(usize, Activation)],
        rng: &mut R,
    ) -> Result<Self> {
        if input_width == 0 || layers.is_empty() || layers.iter().any(|(w, _)| *w == 0) {
            return Err(Error::InvalidArgument(
                "network widths must be positive and at least one layer is needed".into(),
            ));
        }
        let mut fan_in = input_width;
        let layers = layers
            .iter()
            .map(|&(out, activation)| {
                let weights = init_xavier(fan_in, out, rng);
                fan_in = out;
                Dense {
                    weights,
                    bias: Array1::zeros(out),
                    activation,
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            check_len("layer width", pair[0].output_width(), pair[1].input_width())?;
        }
        for l in &layers {
            check_len("bias width", l.output_width(), l.bias.len())?;
        }
        Ok(Self { layers })
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].input_width()
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map(Dense::output_width).unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    pub fn forward(&self, batch: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        check_len("input width", self.input_width(), batch.ncols())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut x = batch.to_owned();
        for layer in &self.layers {
            let mut z = x.dot(&layer.weights);
            z += &layer.bias;
            let act = layer.activation;
            let a = z.mapv(|v| act.apply(v));
            inputs.push(x);
            pre_activations.push(z);
            x = a;
        }
        Ok((
            x,
            ForwardCache {
                inputs,
                pre_activations,
            },
        ))
    }

    /// Forward pass without keeping the cache.
    pub fn predict(&self, batch: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(batch)?.0)
    }

    /// Reverse-mode gradients of `Σ_rows Σ_cols output_grads ⊙ output`.
    /// Returns the parameter gradients and the gradient with respect to the
    /// input batch.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grads: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        let z = cache.output_pre_activation();
        if z.dim() != output_grads.dim() {
            return Err(Error::Dimension {
                what: "output gradient",
                expected: z.len(),
                got: output_grads.len(),
            });
        }
        let act = self.layers.last().expect("non-empty").activation;
        let mut pre = output_grads.to_owned();
        Zip::from(&mut pre).and(z).for_each(|g, &zv| *g *= act.derivative(zv));
        self.backward_from_pre_activation(cache, pre.view())
    }

    /// Like [`backward`](Self::backward) but starting from the gradient with
    /// respect to the last layer's pre-activation. Used where the loss is
    /// written directly in terms of logits to stay finite under saturation.
    pub fn backward_from_pre_activation(
        &self,
        cache: &ForwardCache,
        pre_grads: ArrayView2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::Dimension {
                what: "forward cache",
                expected: self.layers.len(),
                got: cache.inputs.len(),
            });
        }
        if cache.output_pre_activation().dim() != pre_grads.dim() {
            return Err(Error::Dimension {
                what: "pre-activation gradient",
                expected: cache.output_pre_activation().len(),
                got: pre_grads.len(),
            });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = pre_grads.to_owned();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let x = &cache.inputs[idx];
            let dw = x.t().dot(&delta);
            let db = delta.sum_axis(Axis(0));
            let mut dx = delta.dot(&layer.weights.t());
            if idx > 0 {
                let below = self.layers[idx - 1].activation;
                Zip::from(&mut dx)
                    .and(&cache.pre_activations[idx - 1])
                    .for_each(|g, &zv| *g *= below.derivative(zv));
            }
            grads.push((dw, db));
            delta = dx;
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, delta))
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
            .collect()
    }

    pub fn set_flat_params(&mut self, params: &[f64]) -> Result<()> {
        check_len("parameter vector", self.param_count(), params.len())?;
        let mut it = params.iter();
        for l in &mut self.layers {
            for v in l.weights.iter_mut().chain(l.bias.iter_mut()) {
                *v = *it.next().expect("length checked");
            }
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd {
        lr: f64,
    },
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps_hat: f64,
    },
    RmsProp {
        lr: f64,
        decay: f64,
        momentum: f64,
        eps_hat: f64,
    },
}

impl OptimizerKind {
    pub fn adam(lr: f64) -> Self {
        OptimizerKind::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
        }
    }

    pub fn rmsprop(lr: f64) -> Self {
        OptimizerKind::RmsProp {
            lr,
            decay: 0.9,
            momentum: 0.0,
            eps_hat: 1e-10,
        }
    }

    pub fn lr(&self) -> f64 {
        match *self {
            OptimizerKind::Sgd { lr }
            | OptimizerKind::Adam { lr, .. }
            | OptimizerKind::RmsProp { lr, .. } => lr,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.lr();
        // lr = 0 is allowed as a frozen network
        if !(lr >= 0.0) || !lr.is_finite() {
            return Err(Error::InvalidArgument(format!("learning rate must be >= 0, got {lr}")));
        }
        Ok(())
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OptimizerKind::Sgd { lr } => write!(f, "sgd(lr={lr})"),
            OptimizerKind::Adam { lr, .. } => write!(f, "adam(lr={lr})"),
            OptimizerKind::RmsProp { lr, .. } => write!(f, "rmsprop(lr={lr})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascend,
    Descend,
}

/// Optimizer state with one accumulator pair per parameter tensor.
#[derive(Debug, Clone)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    pub steps: usize,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, mlp: &Mlp) -> Self {
        let shapes: Vec<usize> = mlp
            .layers
            .iter()
            .flat_map(|l| [l.weights.len(), l.bias.len()])
            .collect();
        Self {
            kind,
            first: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            second: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            steps: 0,
        }
    }

    pub fn step(&mut self, mlp: &mut Mlp, grads: &Gradients, direction: Direction) -> Result<()> {
        check_len("gradient layers", mlp.layers.len(), grads.layers.len())?;
        check_len("optimizer tensors", 2 * mlp.layers.len(), self.first.len())?;
        for (l, (gw, gb)) in mlp.layers.iter().zip(&grads.layers) {
            if l.weights.dim() != gw.dim() || l.bias.dim() != gb.dim() {
                return Err(Error::Dimension {
                    what: "gradient tensor",
                    expected: l.weights.len() + l.bias.len(),
                    got: gw.len() + gb.len(),
                });
            }
        }
        self.steps += 1;
        let sign = match direction {
            Direction::Descend => 1.0,
            Direction::Ascend => -1.0,
        };
        let t = self.steps as f64;
        let kind = self.kind;
        let mut slot = 0;
        for (layer, (gw, gb)) in mlp.layers.iter_mut().zip(&grads.layers) {
            // a transposed product can come back in column-major order
            let gw = gw.as_standard_layout();
            let params = [
                (
                    layer.weights.as_slice_mut().expect("contiguous"),
                    gw.as_slice().expect("contiguous"),
                ),
                (
                    layer.bias.as_slice_mut().expect("contiguous"),
                    gb.as_slice().expect("contiguous"),
                ),
            ];
            for (theta, g) in params {
                let m = &mut self.first[slot];
                let v = &mut self.second[slot];
                slot += 1;
                match kind {
                    OptimizerKind::Sgd { lr } => {
                        for (p, g) in theta.iter_mut().zip(g) {
                            *p -= lr * sign * g;
                        }
                    }
                    OptimizerKind::Adam {
                        lr,
                        beta1,
                        beta2,
                        eps_hat,
                    } => {
                        let c1 = 1.0 - beta1.powf(t);
                        let c2 = 1.0 - beta2.powf(t);
                        for (((p, g), m), v) in theta.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                            let g = sign * g;
                            *m = beta1 * *m + (1.0 - beta1) * g;
                            *v = beta2 * *v + (1.0 - beta2) * g * g;
                            let m_hat = *m / c1;
                            let v_hat = *v / c2;
                            *p -= lr * m_hat / (v_hat.sqrt() + eps_hat);
                        }
                    }
                    OptimizerKind::RmsProp {
                        lr,
                        decay,
                        momentum,
                        eps_hat,
                    } => {
                        // m holds the momentum buffer, v the mean square
                        for (((p, g), mom), ms) in theta.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                            let g = sign * g;
                            *ms = decay * *ms + (1.0 - decay) * g * g;
                            *mom = momentum * *mom + lr * g / (*ms + eps_hat).sqrt();
                            *p -= *mom;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Closed interval every weight and bias is clamped into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipSpec {
    pub lo: f64,
    pub hi: f64,
}

impl ClipSpec {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::InvalidArgument(format!("clip bounds need lo < hi, got [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn symmetric(c: f64) -> Result<Self> {
        Self::new(-c, c)
    }
}

pub fn clip_params(mlp: &mut Mlp, clip: &ClipSpec) {
    for l in &mut mlp.layers {
        l.weights.mapv_inplace(|v| v.clamp(clip.lo, clip.hi));
        l.bias.mapv_inplace(|v| v.clamp(clip.lo, clip.hi));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn scalar_net(w: f64, b: f64, act: Activation) -> Mlp {
        Mlp::from_layers(vec![Dense {
            weights: array![[w]],
            bias: array![b],
            activation: act,
        }])
        .unwrap()
    }

    #[test]
    fn xavier_bounds_and_determinism() {
        let mut r = rng(1);
        for _ in 0..100 {
            let w = init_xavier(1, 1, &mut r);
            assert!(w[[0, 0]].abs() <= 3f64.sqrt());
        }
        let a = init_xavier(4, 7, &mut rng(9));
        let b = init_xavier(4, 7, &mut rng(9));
        assert_eq!(a, b);
    }

    #[test]
    fn xavier_variance() {
        let mut r = rng(2);
        let mut draws = Vec::with_capacity(100_000);
        while draws.len() < 100_000 {
            draws.extend(init_xavier(128, 128, &mut r).iter().copied());
        }
        draws.truncate(100_000);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / draws.len() as f64;
        let expect = 1.0 / 128.0;
        assert!((var - expect).abs() < 0.1 * expect, "{var}");
    }

    #[test]
    fn forward_examples() {
        let id = scalar_net(1.0, 0.0, Activation::Linear);
        let x = array![[0.3], [-2.0]];
        assert_eq!(id.predict(x.view()).unwrap(), x);
        let relu = scalar_net(1.0, 0.0, Activation::Relu);
        assert_eq!(relu.predict(array![[-4.0]].view()).unwrap()[[0, 0]], 0.0);
        let sig = scalar_net(1.0, 0.0, Activation::Sigmoid);
        assert_eq!(sig.predict(array![[0.0]].view()).unwrap()[[0, 0]], 0.5);
        assert!(matches!(
            id.forward(array![[1.0, 2.0]].view()),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn backward_single_neuron() {
        let net = scalar_net(0.7, -0.2, Activation::Linear);
        let (_, cache) = net.forward(array![[3.0]].view()).unwrap();
        let (g, dx) = net.backward(&cache, array![[1.0]].view()).unwrap();
        assert_eq!(g.layers[0].0[[0, 0]], 3.0);
        assert_eq!(g.layers[0].1[0], 1.0);
        assert_abs_diff_eq!(dx[[0, 0]], 0.7, epsilon = 1e-15);

        let (g, _) = net.backward(&cache, array![[0.0]].view()).unwrap();
        assert!(g.flat().iter().all(|v| *v == 0.0));
        assert!(net.backward(&cache, array![[0.0, 1.0]].view()).is_err());
    }

    #[test]
    fn stable_logistic_helpers() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) == 1.0);
        assert_abs_diff_eq!(softplus(0.0), std::f64::consts::LN_2, epsilon = 1e-15);
        assert_eq!(softplus(800.0), 800.0);
        assert!(softplus(-800.0) >= 0.0);
    }

    #[test]
    fn sgd_and_adam_first_steps() {
        let mut net = scalar_net(0.0, 0.0, Activation::Linear);
        let grads = Gradients {
            layers: vec![(array![[1.0]], array![0.0])],
        };
        let mut sgd = Optimizer::new(OptimizerKind::Sgd { lr: 0.1 }, &net);
        sgd.step(&mut net, &grads, Direction::Descend).unwrap();
        assert_abs_diff_eq!(net.layers[0].weights[[0, 0]], -0.1, epsilon = 1e-15);

        for g in [1e-3, 1.0, 250.0] {
            let mut net = scalar_net(0.0, 0.0, Activation::Linear);
            let grads = Gradients {
                layers: vec![(array![[g]], array![-g])],
            };
            let mut adam = Optimizer::new(OptimizerKind::adam(1e-3), &net);
            adam.step(&mut net, &grads, Direction::Descend).unwrap();
            assert_abs_diff_eq!(net.layers[0].weights[[0, 0]], -1e-3, epsilon = 1e-8);
            assert_abs_diff_eq!(net.layers[0].bias[0], 1e-3, epsilon = 1e-8);
        }

        let mut net = scalar_net(0.0, 0.0, Activation::Linear);
        let mut adam = Optimizer::new(OptimizerKind::adam(1e-3), &net);
        let grads = Gradients {
            layers: vec![(array![[2.0]], array![0.0])],
        };
        adam.step(&mut net, &grads, Direction::Ascend).unwrap();
        assert!(net.layers[0].weights[[0, 0]] > 0.0);
    }

    #[test]
    fn rmsprop_ignores_zero_gradients() {
        let mut net = scalar_net(0.4, -0.1, Activation::Linear);
        let before = net.clone();
        let mut opt = Optimizer::new(OptimizerKind::rmsprop(1e-2), &net);
        opt.step(&mut net, &Gradients::zeros_like(&before), Direction::Descend)
            .unwrap();
        assert_eq!(net, before);
    }

    #[test]
    fn clipping() {
        let mut net = scalar_net(1.7, -0.3, Activation::Linear);
        let clip = ClipSpec::symmetric(1.0).unwrap();
        clip_params(&mut net, &clip);
        assert_eq!(net.layers[0].weights[[0, 0]], 1.0);
        assert_eq!(net.layers[0].bias[0], -0.3);
        let once = net.clone();
        clip_params(&mut net, &clip);
        assert_eq!(net, once);
        assert!(ClipSpec::new(1.0, 1.0).is_err());
    }

    #[test]
    fn clipping_never_grows_weights() {
        let mut r = rng(5);
        let mut net = Mlp::new(3, &[(8, Activation::Relu), (2, Activation::Linear)], &mut r).unwrap();
        for l in &mut net.layers {
            l.weights.mapv_inplace(|v| v * 4.0);
        }
        let before = net.flat_params();
        clip_params(&mut net, &ClipSpec::symmetric(0.5).unwrap());
        for (a, b) in before.iter().zip(net.flat_params()) {
            assert!(b.abs() <= a.abs());
        }
    }

    #[test]
    fn flat_params_round_trip() {
        let mut r = rng(6);
        let mut net = Mlp::new(2, &[(3, Activation::Relu), (1, Activation::Sigmoid)], &mut r).unwrap();
        let p = net.flat_params();
        assert_eq!(p.len(), net.param_count());
        let doubled: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        net.set_flat_params(&doubled).unwrap();
        assert_eq!(net.flat_params(), doubled);
        assert!(net.set_flat_params(&p[1..]).is_err());
    }

    #[test]
    fn layer_widths_must_chain() {
        let a = Dense {
            weights: Array2::zeros((2, 3)),
            bias: Array1::zeros(3),
            activation: Activation::Relu,
        };
        let b = Dense {
            weights: Array2::zeros((4, 1)),
            bias: Array1::zeros(1),
            activation: Activation::Linear,
        };
        assert!(Mlp::from_layers(vec![a, b]).is_err());
    }
}
