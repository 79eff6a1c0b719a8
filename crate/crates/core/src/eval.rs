//! Cost-aware evaluation metrics and decision-boundary export.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cost::CostMatrix;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::model::MlpModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRate {
    pub true_class: usize,
    pub predicted: usize,
    pub cost: f64,
    pub count: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Weighted error rate: mean cost per prediction.
    pub wer: f64,
    pub accuracy: f64,
    pub total_cost: f64,
    pub n: usize,
    /// `counts[y][z]`: examples of class `y` predicted as `z` (diagonal = correct).
    pub counts: Vec<Vec<usize>>,
    /// `rates[y][z] = counts[y][z] / count(y)`; zero for empty classes.
    pub rates: Vec<Vec<f64>>,
    /// Error rates on the highest-cost pairs, most expensive first.
    pub top_cost_pairs: Vec<PairRate>,
}

impl EvalReport {
    pub fn critical_errors(&self, y: usize, z: usize) -> usize {
        self.counts[y][z]
    }

    /// Writes the pairwise error-rate matrix as CSV with class names as headers.
    pub fn write_pairwise_csv(&self, path: &Path, names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
        let io = |e: csv::Error| Error::parse(path, e);
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(names.iter().cloned());
        w.write_record(&header).map_err(io)?;
        for (y, row) in self.rates.iter().enumerate() {
            let mut rec = vec![names[y].clone()];
            rec.extend(row.iter().map(|v| format!("{v:?}")));
            w.write_record(&rec).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn predictions(model: &MlpModel, data: &LabeledDataset) -> Result<Vec<usize>> {
    if data.dim() != model.input_dim() {
        return Err(Error::dim("dataset features", model.input_dim(), data.dim()));
    }
    (0..data.len()).map(|i| model.predict(data.x(i))).collect()
}

/// Metrics from precomputed predictions.
pub fn evaluate_predictions(
    labels: &[usize],
    predicted: &[usize],
    c: &CostMatrix,
    top_k: usize,
) -> Result<EvalReport> {
    if labels.is_empty() {
        return Err(Error::invalid("dataset", "empty"));
    }
    if labels.len() != predicted.len() {
        return Err(Error::dim("predictions", labels.len(), predicted.len()));
    }
    let k = c.k();
    let mut counts = vec![vec![0usize; k]; k];
    let mut total_cost = 0.0;
    for (&y, &z) in labels.iter().zip(predicted) {
        if y >= k || z >= k {
            return Err(Error::IndexOutOfRange {
                context: "class",
                index: y.max(z),
                len: k,
            });
        }
        counts[y][z] += 1;
        total_cost += c.get(y, z);
    }
    let n = labels.len();
    let correct: usize = (0..k).map(|y| counts[y][y]).sum();
    let rates: Vec<Vec<f64>> = counts
        .iter()
        .map(|row| {
            let total: usize = row.iter().sum();
            row.iter()
                .map(|&v| if total == 0 { 0.0 } else { v as f64 / total as f64 })
                .collect()
        })
        .collect();
    let top_cost_pairs = c
        .pairs_by_cost()
        .into_iter()
        .take(top_k)
        .map(|(y, z, cost)| PairRate {
            true_class: y,
            predicted: z,
            cost,
            count: counts[y][z],
            rate: rates[y][z],
        })
        .collect();
    Ok(EvalReport {
        wer: total_cost / n as f64,
        accuracy: correct as f64 / n as f64,
        total_cost,
        n,
        counts,
        rates,
        top_cost_pairs,
    })
}

/// Evaluates `model` on `data`, reporting the three most expensive pairs.
pub fn evaluate(model: &MlpModel, data: &LabeledDataset, c: &CostMatrix) -> Result<EvalReport> {
    evaluate_top_k(model, data, c, 3)
}

pub fn evaluate_top_k(
    model: &MlpModel,
    data: &LabeledDataset,
    c: &CostMatrix,
    top_k: usize,
) -> Result<EvalReport> {
    if c.k() != model.num_classes() {
        return Err(Error::dim("cost matrix classes", model.num_classes(), c.k()));
    }
    let pred = predictions(model, data)?;
    evaluate_predictions(data.labels(), &pred, c, top_k)
}

/// Number of examples of class `y` predicted as `z`.
pub fn critical_error_count(model: &MlpModel, data: &LabeledDataset, pair: (usize, usize)) -> Result<usize> {
    let mut count = 0;
    for i in (0..data.len()).filter(|&i| data.y(i) == pair.0) {
        if model.predict(data.x(i))? == pair.1 {
            count += 1;
        }
    }
    Ok(count)
}

/// One grid cell of a decision-boundary export.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub x1: f64,
    pub x2: f64,
    pub predicted: usize,
    pub probs: Vec<f64>,
}

/// Evaluates a 2-D model on a `resolution × resolution` uniform grid covering both ranges inclusively.
pub fn export_boundary_grid(
    model: &MlpModel,
    x_range: (f64, f64),
    y_range: (f64, f64),
    resolution: usize,
) -> Result<Vec<GridRow>> {
    if model.input_dim() != 2 {
        return Err(Error::dim("boundary grid input", 2, model.input_dim()));
    }
    if resolution == 0 {
        return Err(Error::invalid("resolution", "must be positive"));
    }
    let coord = |(lo, hi): (f64, f64), i: usize| {
        if resolution == 1 {
            (lo + hi) / 2.0
        } else {
            lo + (hi - lo) * i as f64 / (resolution - 1) as f64
        }
    };
    let mut rows = Vec::with_capacity(resolution * resolution);
    for j in 0..resolution {
        let x2 = coord(y_range, j);
        for i in 0..resolution {
            let x1 = coord(x_range, i);
            let t = model.forward(&[x1, x2])?;
            rows.push(GridRow {
                x1,
                x2,
                predicted: t.predicted(),
                probs: t.probs,
            });
        }
    }
    Ok(rows)
}

pub fn write_grid_csv(path: &Path, rows: &[GridRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let k = rows.first().map_or(0, |r| r.probs.len());
    let mut header = vec!["x1".to_string(), "x2".into(), "predicted".into()];
    header.extend((0..k).map(|c| format!("p_{c}")));
    writeln!(out, "{}", header.join(",")).map_err(io)?;
    for r in rows {
        let probs: Vec<String> = r.probs.iter().map(|p| format!("{p:?}")).collect();
        writeln!(out, "{:?},{:?},{},{}", r.x1, r.x2, r.predicted, probs.join(",")).map_err(io)?;
    }
    out.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Role;
    use crate::model::Activation;
    use crate::numcore::{Matrix, Rng};
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| i.to_string()).collect()
    }

    #[test]
    fn perfect_predictions() {
        let c = CostMatrix::random_pareto(names(3), &mut Rng::new(0, 0)).unwrap();
        let labels = [0, 1, 2, 2, 1];
        let r = evaluate_predictions(&labels, &labels, &c, 3).unwrap();
        assert_eq!(r.wer, 0.0);
        assert_eq!(r.accuracy, 1.0);
        assert!((0..3).all(|y| (0..3).all(|z| y == z || r.counts[y][z] == 0)));
        assert_eq!(r.top_cost_pairs.len(), 3);
        assert!(r.top_cost_pairs[0].cost >= r.top_cost_pairs[1].cost);
    }

    #[test]
    fn hand_computed_wer() {
        let c = CostMatrix::from_rows(&[vec![0.0, 5.0], vec![1.0, 0.0]]).unwrap();
        let r = evaluate_predictions(&[0, 1], &[1, 1], &c, 1).unwrap();
        assert_eq!(r.wer, 2.5);
        assert_eq!(r.total_cost, 5.0);
        assert_eq!(r.accuracy, 0.5);
        assert_eq!(r.rates[0][1], 1.0);
    }

    #[test]
    fn model_level_metrics() {
        // constant model: bias favours class 1 everywhere
        let m = MlpModel::from_parts(
            vec![2, 3],
            vec![Matrix::zeros(2, 3)],
            vec![vec![0.0, 1.0, 0.0]],
            Activation::Tanh,
        )
        .unwrap();
        let d = LabeledDataset::new(
            Matrix::from_vec(3, 2, vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0]).unwrap(),
            vec![0, 1, 2],
            names(3),
            Role::Test,
        )
        .unwrap();
        let c = CostMatrix::single_pair(names(3), 2, 1).unwrap();
        let r = evaluate(&m, &d, &c).unwrap();
        assert_eq!(critical_error_count(&m, &d, (2, 1)).unwrap(), r.counts[2][1]);
        assert_eq!(r.counts[2][1], 1);
        assert!((r.wer - 1.0 / 3.0).abs() < 1e-15);

        let grid = export_boundary_grid(&m, (-1.0, 1.0), (-2.0, 2.0), 7).unwrap();
        assert_eq!(grid.len(), 49);
        assert!(grid.iter().all(|g| g.predicted == 1));
        let three_d = MlpModel::zeros(&[3, 2], Activation::Tanh).unwrap();
        assert!(export_boundary_grid(&three_d, (0.0, 1.0), (0.0, 1.0), 3).is_err());
    }

    proptest! {
        #[test]
        fn metric_identities(seed in any::<u64>(), n in 1usize..200) {
            let mut rng = Rng::new(seed, 0);
            let k = 2 + rng.below(5);
            let labels: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();
            let pred: Vec<usize> = (0..n).map(|_| rng.below(k)).collect();

            let ones = CostMatrix::all_ones(names(k)).unwrap();
            let r = evaluate_predictions(&labels, &pred, &ones, 3).unwrap();
            prop_assert!((r.wer - (1.0 - r.accuracy)).abs() < 1e-12);

            let c = CostMatrix::random_pareto(names(k), &mut rng).unwrap();
            let r = evaluate_predictions(&labels, &pred, &c, 3).unwrap();
            let direct = labels.iter().zip(&pred).map(|(&y, &z)| c.get(y, z)).sum::<f64>() / n as f64;
            let mut via_counts = 0.0;
            for y in 0..k {
                for z in 0..k {
                    via_counts += r.counts[y][z] as f64 * c.get(y, z);
                }
            }
            prop_assert!((direct - r.wer).abs() < 1e-12);
            prop_assert!((via_counts / n as f64 - r.wer).abs() < 1e-12);
            for y in 0..k {
                let row: usize = r.counts[y].iter().sum();
                prop_assert_eq!(row, labels.iter().filter(|&&l| l == y).count());
            }

            let mut order: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut order);
            let sl: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
            let sp: Vec<usize> = order.iter().map(|&i| pred[i]).collect();
            let shuffled = evaluate_predictions(&sl, &sp, &c, 3).unwrap();
            prop_assert_eq!(&shuffled.counts, &r.counts);
            prop_assert!((shuffled.wer - r.wer).abs() < 1e-12);
        }
    }
}
