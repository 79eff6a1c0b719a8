//! Fully connected classifier with hand-written backpropagation.
//!
//! Layers compute `h_l = act(h_{l-1} · W_l + b_l)`, with `W_l` stored as an
//! `in × out` matrix. The output layer is linear (logits) followed by a
//! softmax. [`MlpModel::backward`] returns gradients for every parameter and
//! for the input vector, which is what the targeted attack ascends on.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{argmax, log_sum_exp, softmax, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Tanh => v.tanh(),
            Activation::Relu => v.max(0.0),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Scalar objective whose gradient [`MlpModel::backward`] computes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossKind {
    /// `-log p_y`.
    CrossEntropy { label: usize },
    /// `log p_z`, the quantity the targeted attack maximizes.
    LogProb { class: usize },
    /// `-log(1 - p_z)`, the critical-error penalty.
    NegLogComplement { class: usize },
}

impl LossKind {
    fn class(&self) -> usize {
        match *self {
            LossKind::CrossEntropy { label } => label,
            LossKind::LogProb { class } | LossKind::NegLogComplement { class } => class,
        }
    }

    /// Value of the objective for a trace.
    pub fn value(&self, trace: &ForwardTrace) -> f64 {
        match *self {
            LossKind::CrossEntropy { label } => trace.neg_log_prob(label),
            LossKind::LogProb { class } => -trace.neg_log_prob(class),
            LossKind::NegLogComplement { class } => -trace.log_complement(class),
        }
    }

    /// Gradient of the objective with respect to the logits.
    pub fn logit_grad(&self, trace: &ForwardTrace) -> Vec<f64> {
        let p = &trace.probs;
        match *self {
            LossKind::CrossEntropy { label } => p
                .iter()
                .enumerate()
                .map(|(j, &pj)| pj - f64::from(u8::from(j == label)))
                .collect(),
            LossKind::LogProb { class } => p
                .iter()
                .enumerate()
                .map(|(j, &pj)| f64::from(u8::from(j == class)) - pj)
                .collect(),
            LossKind::NegLogComplement { class } => {
                // d/dl_j of -log(1 - p_z) = p_z for j = z, -p_z · q_j otherwise,
                // with q the softmax over the remaining classes
                let q = trace.complement_probs(class);
                let pz = p[class];
                q.iter()
                    .enumerate()
                    .map(|(j, &qj)| if j == class { pz } else { -pz * qj })
                    .collect()
            }
        }
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Layer inputs: `activations[0]` is the network input, `activations[l]` the output of hidden layer `l`.
    pub activations: Vec<Vec<f64>>,
    /// Pre-activation values per layer; the last entry equals `logits`.
    pub pre_activations: Vec<Vec<f64>>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl ForwardTrace {
    pub fn input(&self) -> &[f64] {
        &self.activations[0]
    }

    pub fn predicted(&self) -> usize {
        argmax(&self.logits)
    }

    /// `-log p_c`, computed from the logits so it stays finite for tiny probabilities.
    pub fn neg_log_prob(&self, c: usize) -> f64 {
        log_sum_exp(&self.logits) - self.logits[c]
    }

    /// `log(1 - p_c)` computed from the logits.
    pub fn log_complement(&self, c: usize) -> f64 {
        let others: Vec<f64> = self
            .logits
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != c)
            .map(|(_, &l)| l)
            .collect();
        log_sum_exp(&others) - log_sum_exp(&self.logits)
    }

    /// Softmax over every class except `c`; entry `c` is zero.
    fn complement_probs(&self, c: usize) -> Vec<f64> {
        let max = self
            .logits
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != c)
            .map(|(_, &l)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        let mut q: Vec<f64> = self
            .logits
            .iter()
            .enumerate()
            .map(|(j, &l)| if j == c { 0.0 } else { (l - max).exp() })
            .collect();
        let s: f64 = q.iter().sum();
        for v in &mut q {
            *v /= s;
        }
        q
    }
}

/// Gradients with respect to the model parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub d_weights: Vec<Matrix>,
    pub d_biases: Vec<Vec<f64>>,
}

impl ParamGrads {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            d_weights: model
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            d_biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// `self += scale · other`.
    pub fn add_scaled(&mut self, other: &ParamGrads, scale: f64) {
        for (a, b) in self.d_weights.iter_mut().zip(&other.d_weights) {
            for (x, y) in a.as_mut_slice().iter_mut().zip(b.as_slice()) {
                *x += scale * y;
            }
        }
        for (a, b) in self.d_biases.iter_mut().zip(&other.d_biases) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for w in &mut self.d_weights {
            w.as_mut_slice().iter_mut().for_each(|x| *x *= s);
        }
        for b in &mut self.d_biases {
            b.iter_mut().for_each(|x| *x *= s);
        }
    }

    /// Parameters flattened in the same order as [`MlpModel::params_flat`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.d_weights.iter().zip(&self.d_biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn norm(&self) -> f64 {
        self.flatten().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    fn matches(&self, model: &MlpModel) -> bool {
        self.d_weights.len() == model.weights.len()
            && self
                .d_weights
                .iter()
                .zip(&model.weights)
                .all(|(g, w)| g.shape() == w.shape())
            && self
                .d_biases
                .iter()
                .zip(&model.biases)
                .all(|(g, b)| g.len() == b.len())
    }
}

/// Per-sample gradient: parameters plus input.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: ParamGrads,
    pub d_input: Vec<f64>,
}

/// Momentum buffer for [`MlpModel::sgd_step`].
pub type Velocity = ParamGrads;

/// Multi-layer perceptron classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    dims: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

impl MlpModel {
    /// Builds a model from explicit parameters, checking every shape.
    pub fn from_parts(
        dims: Vec<usize>,
        weights: Vec<Matrix>,
        biases: Vec<Vec<f64>>,
        activation: Activation,
    ) -> Result<Self> {
        validate_dims(&dims)?;
        let layers = dims.len() - 1;
        if weights.len() != layers {
            return Err(Error::dim("MlpModel weights", layers, weights.len()));
        }
        if biases.len() != layers {
            return Err(Error::dim("MlpModel biases", layers, biases.len()));
        }
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            if w.rows() != dims[l] {
                return Err(Error::dim("MlpModel weight rows", dims[l], w.rows()));
            }
            if w.cols() != dims[l + 1] {
                return Err(Error::dim("MlpModel weight cols", dims[l + 1], w.cols()));
            }
            if b.len() != dims[l + 1] {
                return Err(Error::dim("MlpModel bias", dims[l + 1], b.len()));
            }
            if b.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("MlpModel bias"));
            }
        }
        Ok(Self {
            dims,
            weights,
            biases,
            activation,
        })
    }

    /// All-zero parameters.
    pub fn zeros(dims: &[usize], activation: Activation) -> Result<Self> {
        validate_dims(dims)?;
        let weights = dims
            .windows(2)
            .map(|w| Matrix::zeros(w[0], w[1]))
            .collect();
        let biases = dims[1..].iter().map(|&n| vec![0.0; n]).collect();
        Self::from_parts(dims.to_vec(), weights, biases, activation)
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot_init(rng: &mut Rng, dims: &[usize], activation: Activation) -> Result<Self> {
        let mut model = Self::zeros(dims, activation)?;
        for w in &mut model.weights {
            let bound = (6.0 / (w.rows() + w.cols()) as f64).sqrt();
            for v in w.as_mut_slice() {
                *v = rng.uniform_range(-bound, bound);
            }
        }
        Ok(model)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.dims.last().expect("validated non-empty")
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub fn num_params(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn forward(&self, x: &[f64]) -> Result<ForwardTrace> {
        if x.len() != self.input_dim() {
            return Err(Error::dim("forward input", self.input_dim(), x.len()));
        }
        let layers = self.weights.len();
        let mut activations = Vec::with_capacity(layers);
        let mut pre_activations = Vec::with_capacity(layers);
        let mut h = x.to_vec();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = w.vec_mul(&h)?;
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi += bi;
            }
            let next = if l + 1 < layers {
                z.iter().map(|&v| self.activation.apply(v)).collect()
            } else {
                z.clone()
            };
            activations.push(std::mem::replace(&mut h, next));
            pre_activations.push(z);
        }
        let logits = h;
        if logits.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("forward logits"));
        }
        let probs = softmax(&logits)?;
        Ok(ForwardTrace {
            activations,
            pre_activations,
            logits,
            probs,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.forward(x)?.predicted())
    }

    /// Exact gradient of `kind` with respect to all parameters and the input.
    pub fn backward(&self, trace: &ForwardTrace, kind: LossKind) -> Result<Gradients> {
        let k = self.num_classes();
        if kind.class() >= k {
            return Err(Error::IndexOutOfRange {
                context: "class",
                index: kind.class(),
                len: k,
            });
        }
        self.backward_from_logit_grad(trace, &kind.logit_grad(trace))
    }

    /// Backpropagates an arbitrary upstream gradient on the logits.
    pub fn backward_from_logit_grad(
        &self,
        trace: &ForwardTrace,
        logit_grad: &[f64],
    ) -> Result<Gradients> {
        let layers = self.weights.len();
        if trace.activations.len() != layers || trace.logits.len() != self.num_classes() {
            return Err(Error::invalid("trace", "not produced by this model"));
        }
        if logit_grad.len() != self.num_classes() {
            return Err(Error::dim("logit gradient", self.num_classes(), logit_grad.len()));
        }
        let mut params = ParamGrads::zeros_like(self);
        let mut g = logit_grad.to_vec();
        for l in (0..layers).rev() {
            let a_prev = &trace.activations[l];
            let dw = &mut params.d_weights[l];
            for (i, &a) in a_prev.iter().enumerate() {
                for (j, &gj) in g.iter().enumerate() {
                    dw.set(i, j, a * gj);
                }
            }
            params.d_biases[l].copy_from_slice(&g);
            let mut g_prev = self.weights[l].mul_vec(&g)?;
            if l > 0 {
                for ((gp, &z), &a) in g_prev
                    .iter_mut()
                    .zip(&trace.pre_activations[l - 1])
                    .zip(a_prev)
                {
                    *gp *= self.activation.derivative(z, a);
                }
            }
            g = g_prev;
        }
        Ok(Gradients { params, d_input: g })
    }

    /// Momentum SGD: `v ← momentum·v + g`, `θ ← θ − lr·v`.
    pub fn sgd_step(
        &mut self,
        grads: &ParamGrads,
        lr: f64,
        momentum: f64,
        velocity: &mut Velocity,
    ) -> Result<()> {
        if !(lr >= 0.0) {
            return Err(Error::invalid("lr", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::invalid("momentum", "must lie in [0, 1)"));
        }
        if !grads.matches(self) || !velocity.matches(self) {
            return Err(Error::invalid("gradients", "shape does not match model"));
        }
        velocity.scale(momentum);
        velocity.add_scaled(grads, 1.0);
        for (w, v) in self.weights.iter_mut().zip(&velocity.d_weights) {
            for (x, dv) in w.as_mut_slice().iter_mut().zip(v.as_slice()) {
                *x -= lr * dv;
            }
        }
        for (b, v) in self.biases.iter_mut().zip(&velocity.d_biases) {
            for (x, dv) in b.iter_mut().zip(v) {
                *x -= lr * dv;
            }
        }
        if self.params_flat().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sgd_step parameters"));
        }
        Ok(())
    }

    /// Parameters as one vector: per layer, weights row-major then bias.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::dim("set_params_flat", self.num_params(), flat.len()));
        }
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.rows() * w.cols();
            w.as_mut_slice().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
            let m = b.len();
            b.copy_from_slice(&flat[offset..offset + m]);
            offset += m;
        }
        Ok(())
    }

    pub fn to_checkpoint(&self, seed: u64, epoch: usize) -> Checkpoint {
        Checkpoint {
            dims: self.dims.clone(),
            activation: self.activation,
            weights: self.weights.iter().map(|w| w.as_slice().to_vec()).collect(),
            biases: self.biases.clone(),
            seed,
            epoch,
        }
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::invalid("dims", "need at least input and output sizes"));
    }
    if dims.contains(&0) {
        return Err(Error::invalid("dims", "layer sizes must be positive"));
    }
    Ok(())
}

/// On-disk model snapshot. `serde_json` writes shortest round-trip decimals,
/// so saving and loading reproduces every `f64` bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub dims: Vec<usize>,
    pub activation: Activation,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
    pub seed: u64,
    pub epoch: usize,
}

impl Checkpoint {
    pub fn to_model(&self) -> Result<MlpModel> {
        validate_dims(&self.dims)?;
        if self.weights.len() != self.dims.len() - 1 {
            return Err(Error::dim(
                "checkpoint weights",
                self.dims.len() - 1,
                self.weights.len(),
            ));
        }
        let weights = self
            .weights
            .iter()
            .zip(self.dims.windows(2))
            .map(|(w, d)| Matrix::from_vec(d[0], d[1], w.clone()))
            .collect::<Result<Vec<_>>>()?;
        MlpModel::from_parts(
            self.dims.clone(),
            weights,
            self.biases.clone(),
            self.activation,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }
}
