//! Training objectives and their parameter gradients.
//!
//! Perturbations are always supplied by the caller; none of these functions
//! run an attack. Every `*_grad` function returns the same value as its plain
//! counterpart together with the gradient of that value with respect to the
//! model parameters, with each `δ` held fixed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cost::{CostMatrix, NormalizedWeights};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::{LossKind, MlpModel, ParamGrads};

/// Perturbations keyed by `(example index, target class)`.
pub type DeltaMap = BTreeMap<(usize, usize), Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LossReport {
    pub total: f64,
    pub natural: f64,
    pub penalty: f64,
    /// Contribution of each example to `total` before the `1/N` average.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub per_example: Vec<f64>,
}

fn check_compatible(model: &MlpModel, data: &LabeledDataset) -> Result<()> {
    if data.is_empty() {
        return Err(Error::invalid("dataset", "empty"));
    }
    if data.dim() != model.input_dim() {
        return Err(Error::dim("dataset features", model.input_dim(), data.dim()));
    }
    if data.num_classes() > model.num_classes() {
        return Err(Error::dim("dataset classes", model.num_classes(), data.num_classes()));
    }
    Ok(())
}

fn perturbed(x: &[f64], delta: &[f64]) -> Result<Vec<f64>> {
    if delta.len() != x.len() {
        return Err(Error::dim("perturbation", x.len(), delta.len()));
    }
    Ok(x.iter().zip(delta).map(|(a, b)| a + b).collect())
}

/// Cross-entropy at `x` and, optionally, its parameter gradient accumulated into `acc` with weight `scale`.
fn ce_term(
    model: &MlpModel,
    x: &[f64],
    y: usize,
    acc: Option<(&mut ParamGrads, f64)>,
) -> Result<f64> {
    let t = model.forward(x)?;
    let kind = LossKind::CrossEntropy { label: y };
    if let Some((g, scale)) = acc {
        g.add_scaled(&model.backward(&t, kind)?.params, scale);
    }
    Ok(kind.value(&t))
}

fn erm_impl(model: &MlpModel, data: &LabeledDataset, mut acc: Option<&mut ParamGrads>) -> Result<LossReport> {
    check_compatible(model, data)?;
    let n = data.len() as f64;
    let mut per_example = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let l = ce_term(model, data.x(i), data.y(i), acc.as_deref_mut().map(|g| (g, 1.0 / n)))?;
        per_example.push(l);
    }
    let natural = per_example.iter().sum::<f64>() / n;
    Ok(LossReport {
        total: natural,
        natural,
        penalty: 0.0,
        per_example,
    })
}

/// Mean cross-entropy.
pub fn erm_loss(model: &MlpModel, data: &LabeledDataset) -> Result<LossReport> {
    erm_impl(model, data, None)
}

pub fn erm_loss_grad(model: &MlpModel, data: &LabeledDataset) -> Result<(LossReport, ParamGrads)> {
    let mut g = ParamGrads::zeros_like(model);
    let r = erm_impl(model, data, Some(&mut g))?;
    Ok((r, g))
}

fn augmented_impl(
    model: &MlpModel,
    data: &LabeledDataset,
    deltas: &DeltaMap,
    w: &NormalizedWeights,
    lambda: f64,
    mut acc: Option<&mut ParamGrads>,
) -> Result<LossReport> {
    check_compatible(model, data)?;
    if w.k() != model.num_classes() {
        return Err(Error::dim("weights classes", model.num_classes(), w.k()));
    }
    let n = data.len() as f64;
    let mut per_example = Vec::with_capacity(data.len());
    let (mut natural, mut penalty) = (0.0, 0.0);
    for i in 0..data.len() {
        let (x, y) = (data.x(i), data.y(i));
        let nat = ce_term(model, x, y, acc.as_deref_mut().map(|g| (g, 1.0 / n)))?;
        let mut pen = 0.0;
        for z in w.targets_for(y) {
            let delta = deltas
                .get(&(i, z))
                .ok_or(Error::MissingDelta { example: i, target: z })?;
            let weight = w.get(y, z);
            let xp = perturbed(x, delta)?;
            pen += weight
                * ce_term(model, &xp, y, acc.as_deref_mut().map(|g| (g, lambda * weight / n)))?;
        }
        natural += nat;
        penalty += pen;
        per_example.push(nat + lambda * pen);
    }
    natural /= n;
    penalty /= n;
    Ok(LossReport {
        total: natural + lambda * penalty,
        natural,
        penalty,
        per_example,
    })
}

/// `(1/N) Σ_i [ ℓ(x_i, y_i) + λ Σ_z c̃(y_i, z) ℓ(x_i + δ^(y_i, z), y_i) ]`.
///
/// `deltas` must hold an entry for every `(i, z)` with `c̃(y_i, z) > 0`.
pub fn augmented_loss(
    model: &MlpModel,
    data: &LabeledDataset,
    deltas: &DeltaMap,
    w: &NormalizedWeights,
    lambda: f64,
) -> Result<LossReport> {
    augmented_impl(model, data, deltas, w, lambda, None)
}

pub fn augmented_loss_grad(
    model: &MlpModel,
    data: &LabeledDataset,
    deltas: &DeltaMap,
    w: &NormalizedWeights,
    lambda: f64,
) -> Result<(LossReport, ParamGrads)> {
    let mut g = ParamGrads::zeros_like(model);
    let r = augmented_impl(model, data, deltas, w, lambda, Some(&mut g))?;
    Ok((r, g))
}

fn stochastic_impl(
    model: &MlpModel,
    batch: &LabeledDataset,
    pair: (usize, usize),
    deltas: &[Vec<f64>],
    lambda: f64,
    mut acc: Option<&mut ParamGrads>,
) -> Result<LossReport> {
    check_compatible(model, batch)?;
    if deltas.len() != batch.len() {
        return Err(Error::dim("stochastic deltas", batch.len(), deltas.len()));
    }
    let n = batch.len() as f64;
    let mut per_example = Vec::with_capacity(batch.len());
    let (mut natural, mut penalty) = (0.0, 0.0);
    for (i, delta) in deltas.iter().enumerate() {
        let (x, y) = (batch.x(i), batch.y(i));
        let is_zero = delta.iter().all(|&v| v == 0.0);
        if y != pair.0 && !is_zero {
            return Err(Error::invalid(
                "deltas",
                format!("example {i} has class {y} but a non-zero perturbation"),
            ));
        }
        let (nat, pen) = if is_zero {
            // ℓ at δ = 0 is the natural loss; count it once with weight (1 + λ)
            let l = ce_term(model, x, y, acc.as_deref_mut().map(|g| (g, (1.0 + lambda) / n)))?;
            (l, l)
        } else {
            let nat = ce_term(model, x, y, acc.as_deref_mut().map(|g| (g, 1.0 / n)))?;
            let xp = perturbed(x, delta)?;
            let pen = ce_term(model, &xp, y, acc.as_deref_mut().map(|g| (g, lambda / n)))?;
            (nat, pen)
        };
        natural += nat;
        penalty += pen;
        per_example.push(nat + lambda * pen);
    }
    natural /= n;
    penalty /= n;
    Ok(LossReport {
        total: natural + lambda * penalty,
        natural,
        penalty,
        per_example,
    })
}

/// `(1/|B|) Σ_{i∈B} [ ℓ(x_i, y_i) + λ ℓ(x_i + δ_i, y_i) ]` for one sampled pair `(y_B, z_B)`.
///
/// `deltas[i]` belongs to batch row `i` and must be zero unless `y_i == y_B`.
pub fn stochastic_loss(
    model: &MlpModel,
    batch: &LabeledDataset,
    pair: (usize, usize),
    deltas: &[Vec<f64>],
    lambda: f64,
) -> Result<LossReport> {
    stochastic_impl(model, batch, pair, deltas, lambda, None)
}

pub fn stochastic_loss_grad(
    model: &MlpModel,
    batch: &LabeledDataset,
    pair: (usize, usize),
    deltas: &[Vec<f64>],
    lambda: f64,
) -> Result<(LossReport, ParamGrads)> {
    let mut g = ParamGrads::zeros_like(model);
    let r = stochastic_impl(model, batch, pair, deltas, lambda, Some(&mut g))?;
    Ok((r, g))
}

fn extreme_impl(
    model: &MlpModel,
    data: &LabeledDataset,
    pair: (usize, usize),
    mut acc: Option<&mut ParamGrads>,
) -> Result<f64> {
    check_compatible(model, data)?;
    let (yc, zc) = pair;
    if yc == zc {
        return Err(Error::invalid("pair", "true and predicted class must differ"));
    }
    if zc >= model.num_classes() {
        return Err(Error::IndexOutOfRange {
            context: "penalty class",
            index: zc,
            len: model.num_classes(),
        });
    }
    let n = data.len() as f64;
    let kind = LossKind::NegLogComplement { class: zc };
    let mut sum = 0.0;
    for i in (0..data.len()).filter(|&i| data.y(i) == yc) {
        let t = model.forward(data.x(i))?;
        if let Some(g) = acc.as_deref_mut() {
            g.add_scaled(&model.backward(&t, kind)?.params, 1.0 / n);
        }
        sum += kind.value(&t);
    }
    Ok(sum / n)
}

/// `(1/N) Σ_i -1{y_i = y'} log(1 - p_{z'}(x_i))`.
pub fn extreme_penalty_loss(model: &MlpModel, data: &LabeledDataset, pair: (usize, usize)) -> Result<f64> {
    extreme_impl(model, data, pair, None)
}

pub fn extreme_penalty_loss_grad(
    model: &MlpModel,
    data: &LabeledDataset,
    pair: (usize, usize),
) -> Result<(f64, ParamGrads)> {
    let mut g = ParamGrads::zeros_like(model);
    let v = extreme_impl(model, data, pair, Some(&mut g))?;
    Ok((v, g))
}

fn adjusted_impl(
    model: &MlpModel,
    data: &LabeledDataset,
    c: &CostMatrix,
    alpha: f64,
    mut acc: Option<&mut ParamGrads>,
) -> Result<f64> {
    check_compatible(model, data)?;
    if !(alpha >= 0.0) {
        return Err(Error::invalid("alpha", "must be non-negative"));
    }
    if c.k() != model.num_classes() {
        return Err(Error::dim("cost matrix classes", model.num_classes(), c.k()));
    }
    let n = data.len() as f64;
    let mut sum = 0.0;
    for i in 0..data.len() {
        let (x, y) = (data.x(i), data.y(i));
        let t = model.forward(x)?;
        let ce = LossKind::CrossEntropy { label: y };
        let mut value = ce.value(&t);
        let mut logit_grad = acc.is_some().then(|| ce.logit_grad(&t));
        for z in 0..c.k() {
            let cost = c.get(y, z);
            if cost == 0.0 || alpha == 0.0 {
                continue;
            }
            let pen = LossKind::NegLogComplement { class: z };
            value += alpha * cost * pen.value(&t);
            if let Some(lg) = logit_grad.as_mut() {
                for (a, b) in lg.iter_mut().zip(pen.logit_grad(&t)) {
                    *a += alpha * cost * b;
                }
            }
        }
        if let (Some(g), Some(lg)) = (acc.as_deref_mut(), logit_grad) {
            g.add_scaled(&model.backward_from_logit_grad(&t, &lg)?.params, 1.0 / n);
        }
        sum += value;
    }
    Ok(sum / n)
}

/// `-(1/N) Σ_i [ log p_{y_i} + α Σ_z c(y_i, z) log(1 - p_z) ]`.
pub fn adjusted_penalty_loss(model: &MlpModel, data: &LabeledDataset, c: &CostMatrix, alpha: f64) -> Result<f64> {
    adjusted_impl(model, data, c, alpha, None)
}

pub fn adjusted_penalty_loss_grad(
    model: &MlpModel,
    data: &LabeledDataset,
    c: &CostMatrix,
    alpha: f64,
) -> Result<(f64, ParamGrads)> {
    let mut g = ParamGrads::zeros_like(model);
    let v = adjusted_impl(model, data, c, alpha, Some(&mut g))?;
    Ok((v, g))
}
