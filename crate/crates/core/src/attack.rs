//! Targeted projected gradient ascent with rejection.
//!
//! Starting from `δ = 0`, each step moves along `η · ∇_δ log p_z(x + δ)` and
//! projects back onto the `∞`-norm ball of radius `ε`. The walk stops as soon
//! as the prediction becomes the target `z`; a step whose prediction leaves
//! `{y, z}` is discarded and the previous iterate returned. Points the model
//! already misclassifies are left untouched.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LossKind, MlpModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    /// Radius of the `∞`-norm ball.
    pub epsilon: f64,
    /// Maximum number of ascent steps `K`.
    pub steps: usize,
    /// Ascent step size.
    pub step_size: f64,
    /// Optional input box applied to `x + δ` after projection.
    #[serde(default)]
    pub clamp: Option<(f64, f64)>,
}

impl Default for AttackConfig {
    /// The toy setting: `ε = 1.5`, `K = 5`, `η = 0.05`, no clamp.
    fn default() -> Self {
        Self {
            epsilon: 1.5,
            steps: 5,
            step_size: 0.05,
            clamp: None,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::invalid("attack.epsilon", "must be positive"));
        }
        if self.steps < 1 {
            return Err(Error::invalid("attack.steps", "must be at least 1"));
        }
        if !(self.step_size >= 0.0) || !self.step_size.is_finite() {
            return Err(Error::invalid("attack.step_size", "must be non-negative"));
        }
        if let Some((lo, hi)) = self.clamp {
            if !(lo < hi) {
                return Err(Error::invalid("attack.clamp", "lower bound must be below upper"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "step")]
pub enum Termination {
    /// The unperturbed input is not predicted as its true class.
    NotCorrectInitially,
    /// Step `k` reached the target class.
    TargetHit(usize),
    /// Step `k` left `{y, z}` and was discarded.
    Rejected(usize),
    /// All `K` steps ran without reaching the target.
    BudgetExhausted,
    /// The example was filtered out of a batch attack.
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub delta: Vec<f64>,
    /// Accepted iterates `δ^(0), δ^(1), ...`; the last entry equals `delta`.
    pub trajectory: Vec<Vec<f64>>,
    /// The discarded iterate when the attack ends in [`Termination::Rejected`].
    pub rejected: Option<Vec<f64>>,
    pub termination: Termination,
}

impl AttackResult {
    fn zero(d: usize, termination: Termination) -> Self {
        Self {
            delta: vec![0.0; d],
            trajectory: vec![vec![0.0; d]],
            rejected: None,
            termination,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.delta.iter().all(|&v| v == 0.0)
    }
}

/// Componentwise clamp onto `[-ε, ε]`.
pub fn project_inf_ball(delta: &[f64], epsilon: f64) -> Vec<f64> {
    delta.iter().map(|v| v.clamp(-epsilon, epsilon)).collect()
}

fn apply_perturbation(x: &[f64], delta: &mut [f64], clamp: Option<(f64, f64)>) -> Vec<f64> {
    let mut xp: Vec<f64> = x.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
    if let Some((lo, hi)) = clamp {
        for ((xi, di), &x0) in xp.iter_mut().zip(delta.iter_mut()).zip(x) {
            *xi = xi.clamp(lo, hi);
            *di = *xi - x0;
        }
    }
    xp
}

/// Runs the targeted attack on one example.
pub fn targeted_attack(
    model: &MlpModel,
    x: &[f64],
    y: usize,
    z: usize,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    let k = model.num_classes();
    for c in [y, z] {
        if c >= k {
            return Err(Error::IndexOutOfRange {
                context: "attack class",
                index: c,
                len: k,
            });
        }
    }
    if y == z {
        return Err(Error::invalid("target", "target class equals true class"));
    }
    let d = x.len();
    let mut trace = model.forward(x)?;
    if trace.predicted() != y {
        return Ok(AttackResult::zero(d, Termination::NotCorrectInitially));
    }
    let mut delta = vec![0.0; d];
    let mut trajectory = vec![delta.clone()];
    for step in 1..=cfg.steps {
        let grad = model.backward(&trace, LossKind::LogProb { class: z })?.d_input;
        let stepped: Vec<f64> = delta
            .iter()
            .zip(&grad)
            .map(|(di, gi)| di + cfg.step_size * gi)
            .collect();
        let mut next = project_inf_ball(&stepped, cfg.epsilon);
        let xp = apply_perturbation(x, &mut next, cfg.clamp);
        let next_trace = model.forward(&xp)?;
        let pred = next_trace.predicted();
        if pred != y && pred != z {
            return Ok(AttackResult {
                delta,
                trajectory,
                rejected: Some(next),
                termination: Termination::Rejected(step),
            });
        }
        delta = next;
        trajectory.push(delta.clone());
        if pred == z {
            return Ok(AttackResult {
                delta,
                trajectory,
                rejected: None,
                termination: Termination::TargetHit(step),
            });
        }
        trace = next_trace;
    }
    Ok(AttackResult {
        delta,
        trajectory,
        rejected: None,
        termination: Termination::BudgetExhausted,
    })
}

/// Attacks every `(x, y)` in `batch` with `y == y_filter` toward `z`; the rest get `δ = 0`.
pub fn attack_batch(
    model: &MlpModel,
    batch: &[(&[f64], usize)],
    z: usize,
    y_filter: usize,
    cfg: &AttackConfig,
) -> Result<Vec<AttackResult>> {
    batch
        .iter()
        .map(|&(x, y)| {
            if y == y_filter {
                targeted_attack(model, x, y, z, cfg)
            } else {
                Ok(AttackResult::zero(x.len(), Termination::Skipped))
            }
        })
        .collect()
}

/// One row per accepted iterate: `point,step,delta_0..,predicted,p_target`.
pub fn write_trajectories_csv(
    path: &Path,
    model: &MlpModel,
    attacks: &[(usize, &[f64], usize, AttackResult)],
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    let d = model.input_dim();
    let mut header = vec!["point".to_string(), "step".to_string()];
    header.extend((0..d).map(|j| format!("delta_{j}")));
    header.extend(["predicted".to_string(), "p_target".to_string()]);
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for (point, x, z, res) in attacks {
        for (step, delta) in res.trajectory.iter().enumerate() {
            let xp: Vec<f64> = x.iter().zip(delta).map(|(a, b)| a + b).collect();
            let t = model.forward(&xp)?;
            let deltas: Vec<String> = delta.iter().map(|v| format!("{v:?}")).collect();
            writeln!(
                out,
                "{point},{step},{},{},{:?}",
                deltas.join(","),
                t.predicted(),
                t.probs[*z]
            )
            .map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
