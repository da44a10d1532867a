//! Dense feed-forward classifiers with a softmax output map.

mod file;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

pub use file::{load_model, model_from_json, model_to_json, save_model, MODEL_FORMAT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Sigmoid => T::one() / (T::one() + (-z).exp()),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    pub fn derivative<T: Scalar>(self, z: T, a: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Sigmoid => a * (T::one() - a),
            Activation::Tanh => T::one() - a * a,
            Activation::Identity => T::one(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "identity" => Ok(Activation::Identity),
            other => Err(Error::param(format!("unknown activation '{other}'"))),
        }
    }
}

/// Confidence vector on the probability simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct ProbVector<T: Scalar> {
    values: Vec<T>,
}

impl<T: Scalar> ProbVector<T> {
    /// Validates `values` against the simplex. Vectors within the scalar's
    /// simplex tolerance are renormalized; anything further off is rejected.
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidDistribution(format!(
                "need at least 2 classes, got {}",
                values.len()
            )));
        }
        let tol = T::lit(T::SIMPLEX_TOL);
        for (i, &p) in values.iter().enumerate() {
            if !p.is_finite() || p < -tol || p > T::one() + tol {
                return Err(Error::InvalidDistribution(format!(
                    "component {i} = {p} outside [0, 1]"
                )));
            }
        }
        let clamped: Vec<T> = values
            .iter()
            .map(|&p| p.max(T::zero()).min(T::one()))
            .collect();
        let sum: T = clamped.iter().copied().sum();
        if (sum - T::one()).abs() > tol {
            return Err(Error::InvalidDistribution(format!(
                "components sum to {sum}, not 1"
            )));
        }
        let values = if sum == T::one() {
            clamped
        } else {
            clamped.into_iter().map(|p| p / sum).collect()
        };
        Ok(ProbVector { values })
    }

    pub(crate) fn from_softmax(values: Vec<T>) -> Self {
        ProbVector { values }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn num_classes(&self) -> usize {
        self.values.len()
    }

    /// Index of the largest confidence; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.values)
    }

    /// Base-`C` Shannon entropy, in `[0, 1]`.
    pub fn entropy(&self) -> T {
        crate::index::entropy_unchecked(&self.values)
    }

    pub fn into_inner(self) -> Vec<T> {
        self.values
    }
}

pub(crate) fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Point of the normalized input space `[0,1]^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct InputPoint<T: Scalar> {
    values: Vec<T>,
}

impl<T: Scalar> InputPoint<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        check_domain(&values)?;
        Ok(InputPoint { values })
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn into_inner(self) -> Vec<T> {
        self.values
    }
}

impl<T: Scalar> AsRef<[T]> for InputPoint<T> {
    fn as_ref(&self) -> &[T] {
        &self.values
    }
}

pub(crate) fn check_domain<T: Scalar>(values: &[T]) -> Result<()> {
    for (index, &v) in values.iter().enumerate() {
        if !(v >= T::zero() && v <= T::one()) {
            return Err(Error::InputDomain {
                index,
                value: v.as_f64(),
            });
        }
    }
    Ok(())
}

/// Fully connected layer `a = act(W x + b)` with `W` stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer<T: Scalar> {
    weights: Vec<T>,
    bias: Vec<T>,
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
}

impl<T: Scalar> DenseLayer<T> {
    pub fn new(weights: Vec<Vec<T>>, bias: Vec<T>, activation: Activation) -> Result<Self> {
        let out_dim = weights.len();
        let in_dim = weights.first().map_or(0, Vec::len);
        if let Some(i) = weights.iter().position(|row| row.len() != in_dim) {
            return Err(Error::Validation(format!(
                "weight row {i} has {} columns, expected {in_dim}",
                weights[i].len()
            )));
        }
        Self::from_flat(out_dim, in_dim, weights.concat(), bias, activation)
    }

    pub fn from_flat(
        out_dim: usize,
        in_dim: usize,
        weights: Vec<T>,
        bias: Vec<T>,
        activation: Activation,
    ) -> Result<Self> {
        if out_dim == 0 || in_dim == 0 {
            return Err(Error::Validation("layer dimensions must be positive".into()));
        }
        if weights.len() != out_dim * in_dim {
            return Err(Error::Validation(format!(
                "weight matrix has {} entries, expected {out_dim}x{in_dim}",
                weights.len()
            )));
        }
        if bias.len() != out_dim {
            return Err(Error::Validation(format!(
                "bias length {} does not match {out_dim} weight rows",
                bias.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::Validation(format!(
                "non-finite weight at row {}, column {}",
                i / in_dim,
                i % in_dim
            )));
        }
        if let Some(i) = bias.iter().position(|b| !b.is_finite()) {
            return Err(Error::Validation(format!("non-finite bias at index {i}")));
        }
        Ok(DenseLayer {
            weights,
            bias,
            in_dim,
            out_dim,
            activation,
        })
    }

    pub fn zeros(out_dim: usize, in_dim: usize, activation: Activation) -> Result<Self> {
        Self::from_flat(
            out_dim,
            in_dim,
            vec![T::zero(); out_dim * in_dim],
            vec![T::zero(); out_dim],
            activation,
        )
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub fn weight(&self, row: usize, col: usize) -> T {
        self.weights[row * self.in_dim + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.weights.chunks_exact(self.in_dim)
    }

    /// Pre-activation `W x + b`, written into `out`.
    pub(crate) fn affine_into(&self, x: &[T], out: &mut Vec<T>) {
        out.clear();
        out.extend(self.rows().zip(&self.bias).map(|(row, &b)| {
            row.iter().zip(x).fold(b, |acc, (&w, &xi)| acc + w * xi)
        }));
    }
}

/// Feed-forward classifier `[0,1]^d → P`, softmax applied after the last layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel<T: Scalar> {
    layers: Vec<DenseLayer<T>>,
    input_dim: usize,
    num_classes: usize,
}

/// Per-layer values recorded during a forward pass, used for backprop.
pub(crate) struct Trace<T> {
    /// `pre[l]` is the pre-activation of layer `l`.
    pub pre: Vec<Vec<T>>,
    /// `post[0]` is the input, `post[l + 1]` the output of layer `l`.
    pub post: Vec<Vec<T>>,
}

impl<T: Scalar> MlpModel<T> {
    pub fn new(layers: Vec<DenseLayer<T>>) -> Result<Self> {
        let first = layers
            .first()
            .ok_or_else(|| Error::Validation("model needs at least one layer".into()))?;
        let input_dim = first.in_dim;
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Validation(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].out_dim,
                    i + 1,
                    pair[1].in_dim
                )));
            }
        }
        let num_classes = layers[layers.len() - 1].out_dim;
        if num_classes < 2 {
            return Err(Error::Validation(format!(
                "classifier needs at least 2 classes, got {num_classes}"
            )));
        }
        Ok(MlpModel {
            layers,
            input_dim,
            num_classes,
        })
    }

    /// Glorot-uniform initialization for layer widths `dims = [d, h1, …, C]`.
    /// Hidden layers use `hidden`; the output layer is linear.
    pub fn init(dims: &[usize], hidden: Activation, seed: u64) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::param("need at least input and output widths"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(l, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = (0..fan_in * fan_out)
                    .map(|_| T::lit(rng.random_range(-limit..limit)))
                    .collect();
                let act = if l + 1 == n { Activation::Identity } else { hidden };
                DenseLayer::from_flat(fan_out, fan_in, weights, vec![T::zero(); fan_out], act)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    /// Model whose parameters are all zero: it predicts the uniform vector everywhere.
    pub fn zeros(dims: &[usize]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::param("need at least input and output widths"));
        }
        let layers = dims
            .windows(2)
            .map(|w| DenseLayer::zeros(w[1], w[0], Activation::Identity))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn layers(&self) -> &[DenseLayer<T>] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [DenseLayer<T>] {
        &mut self.layers
    }

    pub fn num_parameters(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::InputShape {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        check_domain(x)
    }

    /// Pre-softmax output of the network.
    pub fn forward_logits(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_input(x)?;
        let logits = self.logits_unchecked(x);
        if let Some(i) = logits.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("logit {i} is not finite")));
        }
        Ok(logits)
    }

    pub fn forward(&self, x: &[T]) -> Result<ProbVector<T>> {
        let logits = self.forward_logits(x)?;
        Ok(ProbVector::from_softmax(softmax(&logits)))
    }

    pub fn predict(&self, x: &[T]) -> Result<usize> {
        Ok(argmax(&self.forward_logits(x)?))
    }

    /// Forward pass for inputs already known to be in-domain. Non-finite
    /// values propagate instead of being reported.
    pub(crate) fn logits_unchecked(&self, x: &[T]) -> Vec<T> {
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        for layer in &self.layers {
            layer.affine_into(&cur, &mut next);
            let act = layer.activation;
            next.iter_mut().for_each(|z| *z = act.apply(*z));
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub(crate) fn trace(&self, x: &[T]) -> Trace<T> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post = Vec::with_capacity(self.layers.len() + 1);
        post.push(x.to_vec());
        for layer in &self.layers {
            let mut z = Vec::new();
            layer.affine_into(&post[post.len() - 1], &mut z);
            let a = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            post.push(a);
        }
        Trace { pre, post }
    }
}

/// Max-shifted softmax; finite for any finite logits.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
