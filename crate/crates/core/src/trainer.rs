//! Training loops: plain cross-entropy pretraining, full and stochastic
//! descent–ascent with targeted augmentation, and the two penalty baselines.
//!
//! Every loop shuffles the example order once per epoch from a seeded stream
//! and performs one momentum-SGD update per mini-batch. Attacks always run
//! against the parameters as they stood at the start of the step.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attack::{targeted_attack, AttackConfig};
use crate::cost::CostMatrix;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::eval::{evaluate, predictions};
use crate::losses::{
    adjusted_penalty_loss_grad, augmented_loss_grad, erm_loss_grad, extreme_penalty_loss_grad,
    stochastic_loss_grad, DeltaMap, LossReport,
};
use crate::model::{MlpModel, ParamGrads};
use crate::numcore::Rng;

const STREAM_SHUFFLE: u64 = 0x5348;
const STREAM_PAIRS: u64 = 0x5041;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Mini-batch size; 0 means the whole dataset.
    pub batch_size: usize,
    pub lambda: f64,
    pub tau: f64,
    pub attack: AttackConfig,
    pub lr: f64,
    pub momentum: f64,
    pub seed: u64,
    /// Evaluate on the validation set every this many steps; 0 disables.
    pub eval_every: usize,
    /// End training after the first epoch that classifies every training example correctly.
    pub stop_on_interpolation: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 0,
            lambda: 1.0,
            tau: 1.0,
            attack: AttackConfig::default(),
            lr: 0.01,
            momentum: 0.9,
            seed: 0,
            eval_every: 0,
            stop_on_interpolation: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::invalid("train.epochs", "must be at least 1"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::invalid("train.lambda", "must be non-negative"));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(Error::invalid("train.tau", "must be positive"));
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return Err(Error::invalid("train.lr", "must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::invalid("train.momentum", "must lie in [0, 1)"));
        }
        self.attack.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub wer: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub epoch: usize,
    pub loss: LossReport,
    /// Targeted attacks generated for this step.
    pub attacks: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalSummary>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<StepRecord>,
}

impl TrainLog {
    pub fn last_loss(&self) -> Option<&LossReport> {
        self.records.last().map(|r| &r.loss)
    }

    pub fn total_attacks(&self) -> usize {
        self.records.iter().map(|r| r.attacks).sum()
    }

    /// One JSON object per line.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        for r in &self.records {
            let line = serde_json::to_string(r).expect("records serialize");
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
        }
        out.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| serde_json::from_str(l).map_err(|e| Error::parse(path, e)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { records })
    }
}

/// Objective for [`Trainer::penalty`].
#[derive(Debug, Clone, PartialEq)]
pub enum PenaltyMode {
    /// `-1{y = y'} log(1 - p_{z'})` only.
    Pair { true_class: usize, predicted: usize },
    /// Cross-entropy plus `α Σ_z c(y, z) · (-log(1 - p_z))`.
    Adjusted { cost: CostMatrix, alpha: f64 },
}

/// Runs the training loops for one configuration, optionally evaluating on held-out data.
#[derive(Debug, Clone)]
pub struct Trainer<'a> {
    cfg: TrainConfig,
    validation: Option<(&'a LabeledDataset, &'a CostMatrix)>,
}

struct StepOutcome {
    loss: LossReport,
    grads: ParamGrads,
    attacks: usize,
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            validation: None,
        })
    }

    pub fn with_validation(mut self, data: &'a LabeledDataset, cost: &'a CostMatrix) -> Self {
        self.validation = Some((data, cost));
        self
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    /// Shared epoch/batch loop; `step` computes the loss and gradient for one batch.
    fn run<F>(&self, mut model: MlpModel, data: &LabeledDataset, mut step: F) -> Result<(MlpModel, TrainLog)>
    where
        F: FnMut(&MlpModel, &LabeledDataset) -> Result<StepOutcome>,
    {
        if data.is_empty() {
            return Err(Error::invalid("dataset", "empty"));
        }
        if data.dim() != model.input_dim() {
            return Err(Error::dim("dataset features", model.input_dim(), data.dim()));
        }
        let n = data.len();
        let batch = if self.cfg.batch_size == 0 {
            n
        } else {
            self.cfg.batch_size.min(n)
        };
        let mut shuffle_rng = Rng::new(self.cfg.seed, STREAM_SHUFFLE);
        let mut velocity = ParamGrads::zeros_like(&model);
        let mut order: Vec<usize> = (0..n).collect();
        let mut log = TrainLog::default();
        let mut step_idx = 0;
        for epoch in 0..self.cfg.epochs {
            shuffle_rng.shuffle(&mut order);
            for chunk in order.chunks(batch) {
                let subset = data.subset(chunk)?;
                let mut outcome = step(&model, &subset)?;
                if !outcome.loss.total.is_finite() {
                    return Err(Error::NonFinite("training loss"));
                }
                model.sgd_step(&outcome.grads, self.cfg.lr, self.cfg.momentum, &mut velocity)?;
                step_idx += 1;
                let eval = match self.validation {
                    Some((val, cost)) if self.cfg.eval_every > 0 && step_idx % self.cfg.eval_every == 0 => {
                        let r = evaluate(&model, val, cost)?;
                        Some(EvalSummary {
                            wer: r.wer,
                            accuracy: r.accuracy,
                        })
                    }
                    _ => None,
                };
                outcome.loss.per_example.clear();
                log.records.push(StepRecord {
                    step: step_idx,
                    epoch,
                    loss: outcome.loss,
                    attacks: outcome.attacks,
                    eval,
                });
            }
            if self.cfg.stop_on_interpolation && predictions(&model, data)? == data.labels() {
                break;
            }
        }
        Ok((model, log))
    }

    /// Cross-entropy training.
    pub fn baseline(&self, model: MlpModel, data: &LabeledDataset) -> Result<(MlpModel, TrainLog)> {
        self.run(model, data, |m, batch| {
            let (loss, grads) = erm_loss_grad(m, batch)?;
            Ok(StepOutcome {
                loss,
                grads,
                attacks: 0,
            })
        })
    }

    /// Descent–ascent on the augmented loss: every example is attacked toward every
    /// target with positive weight, then one descent step is taken.
    pub fn csada_full(
        &self,
        model: MlpModel,
        data: &LabeledDataset,
        cost: &CostMatrix,
    ) -> Result<(MlpModel, TrainLog)> {
        let w = cost.normalize(self.cfg.tau)?;
        let attack = self.cfg.attack;
        let lambda = self.cfg.lambda;
        self.run(model, data, |m, batch| {
            let mut deltas = DeltaMap::new();
            for i in 0..batch.len() {
                let y = batch.y(i);
                for z in w.targets_for(y) {
                    let r = targeted_attack(m, batch.x(i), y, z, &attack)?;
                    deltas.insert((i, z), r.delta);
                }
            }
            let attacks = deltas.len();
            let (loss, grads) = augmented_loss_grad(m, batch, &deltas, &w, lambda)?;
            Ok(StepOutcome {
                loss,
                grads,
                attacks,
            })
        })
    }

    /// Stochastic descent–ascent: one critical pair `(y_B, z_B) ~ c̃` per mini-batch,
    /// attacking only the batch members of class `y_B`.
    pub fn csada_stochastic(
        &self,
        model: MlpModel,
        data: &LabeledDataset,
        cost: &CostMatrix,
    ) -> Result<(MlpModel, TrainLog)> {
        let w = cost.normalize(self.cfg.tau)?;
        let attack = self.cfg.attack;
        let lambda = self.cfg.lambda;
        let mut pair_rng = Rng::new(self.cfg.seed, STREAM_PAIRS);
        self.run(model, data, |m, batch| {
            let (yb, zb) = w.sample_pair(&mut pair_rng);
            let mut attacks = 0;
            let deltas = (0..batch.len())
                .map(|i| {
                    if batch.y(i) == yb {
                        attacks += 1;
                        targeted_attack(m, batch.x(i), yb, zb, &attack).map(|r| r.delta)
                    } else {
                        Ok(vec![0.0; batch.dim()])
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let (loss, grads) = stochastic_loss_grad(m, batch, (yb, zb), &deltas, lambda)?;
            Ok(StepOutcome {
                loss,
                grads,
                attacks,
            })
        })
    }

    /// Reweighting baselines evaluated on natural data only.
    pub fn penalty(
        &self,
        model: MlpModel,
        data: &LabeledDataset,
        mode: &PenaltyMode,
    ) -> Result<(MlpModel, TrainLog)> {
        if let PenaltyMode::Adjusted { alpha, .. } = mode {
            if !(*alpha >= 0.0) {
                return Err(Error::invalid("alpha", "must be non-negative"));
            }
        }
        self.run(model, data, |m, batch| {
            let (total, grads) = match mode {
                PenaltyMode::Pair {
                    true_class,
                    predicted,
                } => extreme_penalty_loss_grad(m, batch, (*true_class, *predicted))?,
                PenaltyMode::Adjusted { cost, alpha } => adjusted_penalty_loss_grad(m, batch, cost, *alpha)?,
            };
            Ok(StepOutcome {
                loss: LossReport {
                    total,
                    natural: 0.0,
                    penalty: total,
                    per_example: Vec::new(),
                },
                grads,
                attacks: 0,
            })
        })
    }
}

pub fn train_baseline(model: MlpModel, data: &LabeledDataset, cfg: &TrainConfig) -> Result<(MlpModel, TrainLog)> {
    Trainer::new(cfg.clone())?.baseline(model, data)
}

pub fn train_csada_full(
    model: MlpModel,
    data: &LabeledDataset,
    cost: &CostMatrix,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainLog)> {
    Trainer::new(cfg.clone())?.csada_full(model, data, cost)
}

pub fn train_csada_stochastic(
    model: MlpModel,
    data: &LabeledDataset,
    cost: &CostMatrix,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainLog)> {
    Trainer::new(cfg.clone())?.csada_stochastic(model, data, cost)
}

pub fn train_penalty(
    model: MlpModel,
    data: &LabeledDataset,
    mode: &PenaltyMode,
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainLog)> {
    Trainer::new(cfg.clone())?.penalty(model, data, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Role, ToySpec};
    use crate::eval::critical_error_count;
    use crate::losses::erm_loss;
    use crate::model::Activation;
    use crate::numcore::Matrix;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    fn dataset(rows: &[[f64; 2]], labels: &[usize], k: usize) -> LabeledDataset {
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        LabeledDataset::new(
            Matrix::from_vec(rows.len(), 2, data).unwrap(),
            labels.to_vec(),
            names(k),
            Role::Train,
        )
        .unwrap()
    }

    fn three_class() -> LabeledDataset {
        dataset(
            &[[1.0, 0.5], [0.8, -0.2], [-1.0, 0.3], [-0.7, -0.9], [0.1, 1.2], [0.3, -1.1]],
            &[0, 0, 1, 1, 2, 2],
            3,
        )
    }

    fn net(seed: u64, dims: &[usize]) -> MlpModel {
        MlpModel::glorot_init(&mut Rng::new(seed, 1), dims, Activation::Tanh).unwrap()
    }

    fn bits(m: &MlpModel) -> Vec<u64> {
        m.params_flat().iter().map(|v| v.to_bits()).collect()
    }

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            lr: 0.05,
            ..Default::default()
        }
    }

    #[test]
    fn validate_names_the_field() {
        let bad = [
            TrainConfig { epochs: 0, ..cfg(1) },
            TrainConfig { lambda: -1.0, ..cfg(1) },
            TrainConfig { tau: 0.0, ..cfg(1) },
            TrainConfig { lr: f64::NAN, ..cfg(1) },
            TrainConfig { momentum: 1.0, ..cfg(1) },
        ];
        let fields = ["train.epochs", "train.lambda", "train.tau", "train.lr", "train.momentum"];
        for (c, field) in bad.iter().zip(fields) {
            match c.validate() {
                Err(Error::Invalid { field: f, .. }) => assert_eq!(f, field),
                other => panic!("{field}: {other:?}"),
            }
        }
        assert!(cfg(1).validate().is_ok());
    }

    #[test]
    fn zero_learning_rate_leaves_model_unchanged() {
        let data = three_class();
        let m = net(3, &[2, 6, 3]);
        let (out, log) = train_baseline(m.clone(), &data, &TrainConfig { lr: 0.0, ..cfg(5) }).unwrap();
        assert_eq!(bits(&out), bits(&m));
        let first = log.records[0].loss.total;
        assert!(log.records.iter().all(|r| r.loss.total == first));
    }

    #[test]
    fn loss_decreases_on_two_separable_points() {
        let data = dataset(&[[1.0, 0.0], [-1.0, 0.0]], &[0, 1], 2);
        let m = net(0, &[2, 4, 2]);
        let before = erm_loss(&m, &data).unwrap().total;
        let (out, log) = train_baseline(m, &data, &TrainConfig { momentum: 0.0, ..cfg(50) }).unwrap();
        let after = erm_loss(&out, &data).unwrap().total;
        assert!(after < before, "{after} >= {before}");
        assert!(log.records.windows(2).all(|w| w[1].loss.total <= w[0].loss.total));
    }

    #[test]
    fn step_indices_strictly_increase() {
        let c = TrainConfig { batch_size: 4, ..cfg(3) };
        let (_, log) = train_baseline(net(1, &[2, 5, 3]), &three_class(), &c).unwrap();
        assert_eq!(log.records.len(), 6);
        assert!(log.records.windows(2).all(|w| w[1].step > w[0].step));
        assert_eq!(log.records.last().unwrap().epoch, 2);
    }

    #[test]
    fn training_is_deterministic() {
        let data = three_class();
        let cost = CostMatrix::from_rows(&[
            vec![0.0, 1.0, 3.0],
            vec![2.0, 0.0, 0.5],
            vec![1.0, 4.0, 0.0],
        ])
        .unwrap();
        let c = TrainConfig { batch_size: 2, seed: 9, ..cfg(4) };
        let run = || train_csada_stochastic(net(2, &[2, 5, 3]), &data, &cost, &c).unwrap();
        let (a, la) = run();
        let (b, lb) = run();
        assert_eq!(bits(&a), bits(&b));
        assert_eq!(la, lb);
        let (d, _) = train_csada_stochastic(net(2, &[2, 5, 3]), &data, &cost, &TrainConfig { seed: 10, ..c }).unwrap();
        assert_ne!(bits(&a), bits(&d));
    }

    #[test]
    fn zero_lambda_matches_baseline() {
        let data = three_class();
        let cost = CostMatrix::single_pair(names(3), 1, 2).unwrap();
        let c = TrainConfig { lambda: 0.0, batch_size: 3, seed: 4, ..cfg(5) };
        let (base, _) = train_baseline(net(5, &[2, 6, 3]), &data, &c).unwrap();
        let (full, _) = train_csada_full(net(5, &[2, 6, 3]), &data, &cost, &c).unwrap();
        let (stoch, _) = train_csada_stochastic(net(5, &[2, 6, 3]), &data, &cost, &c).unwrap();
        assert_eq!(bits(&full), bits(&base));
        assert_eq!(bits(&stoch), bits(&base));
    }

    #[test]
    fn zero_cost_matrix_is_rejected() {
        let cost = CostMatrix::zeros(names(3)).unwrap();
        let data = three_class();
        assert!(train_csada_full(net(0, &[2, 4, 3]), &data, &cost, &cfg(1)).is_err());
        assert!(train_csada_stochastic(net(0, &[2, 4, 3]), &data, &cost, &cfg(1)).is_err());
    }

    #[test]
    fn full_attack_count_matches_positive_weights() {
        let data = three_class();
        // class 0 has two targets, class 1 one, class 2 none
        let cost = CostMatrix::from_rows(&[
            vec![0.0, 1.0, 2.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 0.0],
        ])
        .unwrap();
        let (_, log) = train_csada_full(net(1, &[2, 5, 3]), &data, &cost, &cfg(3)).unwrap();
        assert_eq!(log.records.len(), 3);
        assert!(log.records.iter().all(|r| r.attacks == 2 * 2 + 2));
    }

    #[test]
    fn stochastic_attacks_at_most_batch_size() {
        let data = three_class();
        let cost = CostMatrix::from_rows(&[
            vec![0.0, 1.0, 2.0],
            vec![3.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ])
        .unwrap();
        let c = TrainConfig { batch_size: 4, seed: 2, ..cfg(10) };
        let (_, log) = train_csada_stochastic(net(1, &[2, 5, 3]), &data, &cost, &c).unwrap();
        assert!(log.records.iter().all(|r| r.attacks <= 4));
        assert!(log.total_attacks() > 0);
    }

    #[test]
    fn full_batch_point_mass_attacks_whole_class() {
        let data = three_class();
        let cost = CostMatrix::single_pair(names(3), 2, 0).unwrap();
        let (_, log) = train_csada_stochastic(net(1, &[2, 5, 3]), &data, &cost, &cfg(4)).unwrap();
        assert!(log.records.iter().all(|r| r.attacks == 2));
    }

    #[test]
    fn penalty_without_source_examples_is_inert() {
        let data = dataset(&[[1.0, 0.0], [0.0, 1.0]], &[0, 2], 3);
        let m = net(6, &[2, 4, 3]);
        let mode = PenaltyMode::Pair {
            true_class: 1,
            predicted: 2,
        };
        let (out, log) = train_penalty(m.clone(), &data, &mode, &cfg(3)).unwrap();
        assert_eq!(bits(&out), bits(&m));
        assert!(log.records.iter().all(|r| r.loss.total == 0.0));
    }

    #[test]
    fn adjusted_penalty_with_zero_alpha_matches_baseline() {
        let data = three_class();
        let mode = PenaltyMode::Adjusted {
            cost: CostMatrix::all_ones(names(3)).unwrap(),
            alpha: 0.0,
        };
        let c = TrainConfig { batch_size: 2, ..cfg(4) };
        let (a, _) = train_penalty(net(8, &[2, 5, 3]), &data, &mode, &c).unwrap();
        let (b, _) = train_baseline(net(8, &[2, 5, 3]), &data, &c).unwrap();
        assert_eq!(bits(&a), bits(&b));
        let neg = PenaltyMode::Adjusted {
            cost: CostMatrix::all_ones(names(3)).unwrap(),
            alpha: -1.0,
        };
        assert!(train_penalty(net(8, &[2, 5, 3]), &data, &neg, &c).is_err());
    }

    #[test]
    fn mismatched_data_is_rejected() {
        let data = three_class();
        assert!(train_baseline(net(0, &[3, 4, 3]), &data, &cfg(1)).is_err());
    }

    #[test]
    fn stops_after_first_interpolating_epoch() {
        let data = dataset(&[[1.0, 0.0], [-1.0, 0.0]], &[0, 1], 2);
        let c = TrainConfig {
            stop_on_interpolation: true,
            ..cfg(500)
        };
        let (m, log) = train_baseline(net(0, &[2, 4, 2]), &data, &c).unwrap();
        assert!(log.records.len() < 500);
        assert_eq!(predictions(&m, &data).unwrap(), data.labels());
    }

    #[test]
    fn evaluation_cadence() {
        let data = three_class();
        let cost = CostMatrix::all_ones(names(3)).unwrap();
        let c = TrainConfig { eval_every: 3, ..cfg(7) };
        let (_, log) = Trainer::new(c)
            .unwrap()
            .with_validation(&data, &cost)
            .baseline(net(0, &[2, 4, 3]), &data)
            .unwrap();
        let evaluated: Vec<usize> = log.records.iter().filter(|r| r.eval.is_some()).map(|r| r.step).collect();
        assert_eq!(evaluated, vec![3, 6]);
        let e = log.records[2].eval.unwrap();
        assert!((e.wer - (1.0 - e.accuracy)).abs() < 1e-12);
    }

    #[test]
    fn jsonl_round_trip() {
        let data = three_class();
        let cost = CostMatrix::single_pair(names(3), 0, 1).unwrap();
        let (_, log) = train_csada_full(net(0, &[2, 4, 3]), &data, &cost, &cfg(3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.jsonl");
        log.write_jsonl(&path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 3);
        assert_eq!(TrainLog::read_jsonl(&path).unwrap(), log);
    }

    #[test]
    fn toy_csada_keeps_natural_loss_low() {
        let (train, test) = ToySpec::three_gaussians(1).generate().unwrap();
        let pre = TrainConfig {
            epochs: 300,
            lr: 0.05,
            ..Default::default()
        };
        let (m, _) = train_baseline(net(1, &[2, 50, 3]), &train, &pre).unwrap();
        let cost = CostMatrix::single_pair(train.class_names().to_vec(), 1, 2).unwrap();
        let c = TrainConfig {
            epochs: 60,
            lr: 0.01,
            seed: 1,
            ..Default::default()
        };
        let (out, log) = train_csada_full(m, &train, &cost, &c).unwrap();
        let worst = log.records.iter().map(|r| r.loss.natural).fold(0.0, f64::max);
        assert!(worst < 0.1, "natural loss reached {worst}");
        assert_eq!(critical_error_count(&out, &test, (1, 2)).unwrap(), 0);
    }

    #[test]
    fn interpolating_model_gets_negligible_penalty_gradient() {
        let (train, _) = ToySpec::three_gaussians(0).generate().unwrap();
        let c = TrainConfig {
            epochs: 500,
            lr: 0.2,
            ..Default::default()
        };
        let (m, _) = train_baseline(net(0, &[2, 50, 3]), &train, &c).unwrap();
        assert!(erm_loss(&m, &train).unwrap().total < 1e-3);
        let (_, g) = extreme_penalty_loss_grad(&m, &train, (1, 2)).unwrap();
        assert!(g.norm() < 1e-4, "penalty gradient norm {}", g.norm());
    }
}
