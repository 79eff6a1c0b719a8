//! Misclassification cost matrices, their temperature-normalized penalty
//! weights, and sampling of critical `(true, predicted)` pairs.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numcore::{pareto_sample, Matrix, Rng};

/// Nonnegative costs `c(y, z)` of predicting `z` for true class `y`; zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    names: Vec<String>,
    c: Matrix,
}

impl CostMatrix {
    pub fn new(names: Vec<String>, c: Matrix) -> Result<Self> {
        let k = c.rows();
        if c.cols() != k {
            return Err(Error::dim("cost matrix columns", k, c.cols()));
        }
        if names.len() != k {
            return Err(Error::dim("cost matrix class names", k, names.len()));
        }
        if k < 2 {
            return Err(Error::invalid("cost matrix", "need at least two classes"));
        }
        for y in 0..k {
            for z in 0..k {
                let v = c.get(y, z);
                if v < 0.0 {
                    return Err(Error::invalid(
                        format!("cost[{y}][{z}]"),
                        format!("negative cost {v}"),
                    ));
                }
                if y == z && v != 0.0 {
                    return Err(Error::invalid(
                        format!("cost[{y}][{y}]"),
                        format!("diagonal must be zero, got {v}"),
                    ));
                }
            }
        }
        Ok(Self { names, c })
    }

    /// Matrix with numbered class names `"0"`, `"1"`, ...
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let names = (0..rows.len()).map(|i| i.to_string()).collect();
        Self::new(names, Matrix::from_rows(rows)?)
    }

    pub fn zeros(names: Vec<String>) -> Result<Self> {
        let k = names.len();
        Self::new(names, Matrix::zeros(k, k))
    }

    /// Cost 1 for the single pair `(y, z)`, zero elsewhere.
    pub fn single_pair(names: Vec<String>, y: usize, z: usize) -> Result<Self> {
        let k = names.len();
        if y >= k || z >= k {
            return Err(Error::IndexOutOfRange {
                context: "cost pair",
                index: y.max(z),
                len: k,
            });
        }
        if y == z {
            return Err(Error::invalid("pair", "true and predicted class must differ"));
        }
        let mut c = Matrix::zeros(k, k);
        c.set(y, z, 1.0);
        Self::new(names, c)
    }

    /// Unit cost on every off-diagonal cell.
    pub fn all_ones(names: Vec<String>) -> Result<Self> {
        let k = names.len();
        let mut c = Matrix::zeros(k, k);
        for y in 0..k {
            for z in 0..k {
                if y != z {
                    c.set(y, z, 1.0);
                }
            }
        }
        Self::new(names, c)
    }

    /// Off-diagonal entries i.i.d. Pareto(scale 1, shape 1.5).
    pub fn random_pareto(names: Vec<String>, rng: &mut Rng) -> Result<Self> {
        let k = names.len();
        if k < 2 {
            return Err(Error::invalid("k", "need at least two classes"));
        }
        let mut c = Matrix::zeros(k, k);
        for y in 0..k {
            for z in 0..k {
                if y != z {
                    c.set(y, z, pareto_sample(rng, 1.0, 1.5)?);
                }
            }
        }
        Self::new(names, c)
    }

    pub fn k(&self) -> usize {
        self.c.rows()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn matrix(&self) -> &Matrix {
        &self.c
    }

    /// Unchecked lookup for hot loops.
    #[inline]
    pub fn get(&self, y: usize, z: usize) -> f64 {
        self.c.get(y, z)
    }

    /// Cost incurred by predicting `z` for true class `y`.
    pub fn cost_of(&self, y: usize, z: usize) -> Result<f64> {
        let k = self.k();
        for idx in [y, z] {
            if idx >= k {
                return Err(Error::IndexOutOfRange {
                    context: "cost matrix",
                    index: idx,
                    len: k,
                });
            }
        }
        Ok(self.c.get(y, z))
    }

    /// Off-diagonal pairs sorted by decreasing cost (ties by row-major order).
    pub fn pairs_by_cost(&self) -> Vec<(usize, usize, f64)> {
        let k = self.k();
        let mut pairs: Vec<(usize, usize, f64)> = (0..k)
            .flat_map(|y| (0..k).filter(move |&z| z != y).map(move |z| (y, z)))
            .map(|(y, z)| (y, z, self.c.get(y, z)))
            .collect();
        pairs.sort_by(|a, b| b.2.total_cmp(&a.2));
        pairs
    }

    /// Temperature-normalized weights `c^τ / Σ c^τ`, with `0^τ = 0`.
    pub fn normalize(&self, tau: f64) -> Result<NormalizedWeights> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid("tau", "must be positive and finite"));
        }
        let k = self.k();
        // rescale by the largest cost first so c^τ cannot overflow for large τ
        let max = self.c.as_slice().iter().copied().fold(0.0, f64::max);
        if max <= 0.0 {
            return Err(Error::invalid("cost matrix", "all costs are zero"));
        }
        let powered: Vec<f64> = self
            .c
            .as_slice()
            .iter()
            .map(|&v| if v > 0.0 { (v / max).powf(tau) } else { 0.0 })
            .collect();
        let total: f64 = powered.iter().sum();
        let w = powered.iter().map(|v| v / total).collect();
        Ok(NormalizedWeights {
            w: Matrix::from_vec(k, k, w)?,
            tau,
        })
    }

    /// Reads the CSV format: header row of class names, then one row of costs per true class.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::parse(path, e))?;
        let names: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::parse(path, e))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse(path, e))?;
            let row = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::parse(path, format!("`{s}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != names.len() {
                return Err(Error::parse(path, "row length differs from header"));
            }
            rows.push(row);
        }
        if rows.len() != names.len() {
            return Err(Error::parse(
                path,
                format!("expected {} cost rows, found {}", names.len(), rows.len()),
            ));
        }
        Self::new(names, Matrix::from_rows(&rows)?)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
        let io = |e: csv::Error| Error::parse(path, e);
        w.write_record(&self.names).map_err(io)?;
        for r in self.c.row_iter() {
            w.write_record(r.iter().map(|v| format!("{v:?}"))).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Penalty weights `c̃(y, z)`; they sum to one and double as the pair-sampling distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedWeights {
    w: Matrix,
    tau: f64,
}

impl NormalizedWeights {
    pub fn k(&self) -> usize {
        self.w.rows()
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    #[inline]
    pub fn get(&self, y: usize, z: usize) -> f64 {
        self.w.get(y, z)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.w
    }

    /// Targets `z` with positive weight for true class `y`.
    pub fn targets_for(&self, y: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.k()).filter(move |&z| self.w.get(y, z) > 0.0)
    }

    /// Draws `(y, z)` with probability `c̃(y, z)` by inverting the row-major CDF.
    pub fn sample_pair(&self, rng: &mut Rng) -> (usize, usize) {
        let k = self.k();
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut last = None;
        for (idx, &p) in self.w.as_slice().iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = Some(idx);
            if u < acc {
                return (idx / k, idx % k);
            }
        }
        // rounding left u above the accumulated total; fall back to the last positive cell
        let idx = last.expect("normalized weights have positive mass");
        (idx / k, idx % k)
    }
}
