//! Labeled datasets: the three-Gaussian toy task, CSV files, MNIST IDX files,
//! and stratified splits.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numcore::{gauss_sample, Matrix, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    #[default]
    Train,
    Val,
    Test,
}

/// Feature matrix (`N × d`) with integer labels and class names.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Matrix,
    labels: Vec<usize>,
    class_names: Vec<String>,
    role: Role,
}

impl LabeledDataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        class_names: Vec<String>,
        role: Role,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::dim("dataset labels", features.rows(), labels.len()));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(Error::IndexOutOfRange {
                context: "dataset label",
                index: bad,
                len: class_names.len(),
            });
        }
        Ok(Self {
            features,
            labels,
            class_names,
            role,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn x(&self, i: usize) -> &[f64] {
        self.features.row(i)
    }

    pub fn y(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn with_role(mut self, role: Role) -> Self {
        self.role = role;
        self
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::IndexOutOfRange {
                    context: "dataset subset",
                    index: i,
                    len: self.len(),
                });
            }
            data.extend_from_slice(self.x(i));
            labels.push(self.y(i));
        }
        Self::new(
            Matrix::from_vec(indices.len(), d, data)?,
            labels,
            self.class_names.clone(),
            self.role,
        )
    }

    /// Reads a CSV file with a header row; `label_column` names the class column,
    /// every other column must be numeric. Class indices follow first appearance.
    pub fn load_csv(path: &Path, label_column: &str) -> Result<Self> {
        Self::read_csv(path, label_column, None)
    }

    /// Like [`LabeledDataset::load_csv`], but labels are resolved against a fixed list of
    /// class names so that separately stored splits share one class indexing.
    pub fn load_csv_with_classes(path: &Path, label_column: &str, classes: &[String]) -> Result<Self> {
        Self::read_csv(path, label_column, Some(classes))
    }

    fn read_csv(path: &Path, label_column: &str, classes: Option<&[String]>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::parse(path, e))?;
        let headers = rdr.headers().map_err(|e| Error::parse(path, e))?.clone();
        if headers.is_empty() {
            return Err(Error::parse(path, "empty file"));
        }
        let label_idx = headers
            .iter()
            .position(|h| h == label_column)
            .ok_or_else(|| Error::parse(path, format!("no label column `{label_column}`")))?;
        let d = headers.len() - 1;
        let fixed = classes.is_some();
        let mut class_names: Vec<String> = classes.map(<[String]>::to_vec).unwrap_or_default();
        let mut class_index: HashMap<String, usize> =
            class_names.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::parse(path, e))?;
            for (j, field) in rec.iter().enumerate() {
                if j == label_idx {
                    if fixed && !class_index.contains_key(field) {
                        return Err(Error::parse(
                            path,
                            format!("row {}: unknown class `{field}`", line + 2),
                        ));
                    }
                    let next = class_names.len();
                    let id = *class_index.entry(field.to_string()).or_insert(next);
                    if id == next {
                        class_names.push(field.to_string());
                    }
                    labels.push(id);
                } else {
                    let v: f64 = field.parse().map_err(|_| {
                        Error::parse(
                            path,
                            format!("row {}: non-numeric feature `{field}`", line + 2),
                        )
                    })?;
                    if !v.is_finite() {
                        return Err(Error::parse(path, format!("row {}: non-finite", line + 2)));
                    }
                    data.push(v);
                }
            }
        }
        if labels.is_empty() {
            return Err(Error::parse(path, "no data rows"));
        }
        let n = labels.len();
        Self::new(Matrix::from_vec(n, d, data)?, labels, class_names, Role::Train)
    }

    /// Writes features `x0..x{d-1}` plus a `label` column holding class names.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e))?;
        let io = |e: csv::Error| Error::parse(path, e);
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("x{j}")).collect();
        header.push("label".into());
        w.write_record(&header).map_err(io)?;
        for i in 0..self.len() {
            // `{:?}` prints the shortest string that parses back to the same f64
            let mut row: Vec<String> = self.x(i).iter().map(|v| format!("{v:?}")).collect();
            row.push(self.class_names[self.y(i)].clone());
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads an MNIST-style IDX image/label pair. Pixels are scaled to `[0, 1]`;
    /// `per_class_cap` keeps at most that many examples of each digit, in file order.
    pub fn load_mnist_idx(
        images: &Path,
        labels: &Path,
        per_class_cap: Option<usize>,
    ) -> Result<Self> {
        let img = std::fs::read(images).map_err(|e| Error::io(images, e))?;
        let lab = std::fs::read(labels).map_err(|e| Error::io(labels, e))?;
        let (n_img, rows, cols, pixels) = parse_idx_images(images, &img)?;
        let (n_lab, raw_labels) = parse_idx_labels(labels, &lab)?;
        if n_img != n_lab {
            return Err(Error::parse(
                images,
                format!("image count {n_img} does not match label count {n_lab}"),
            ));
        }
        let d = rows * cols;
        let mut kept = [0usize; 10];
        let mut data = Vec::new();
        let mut out_labels = Vec::new();
        for (i, &l) in raw_labels.iter().enumerate() {
            if l > 9 {
                return Err(Error::parse(labels, format!("label {l} out of range")));
            }
            if let Some(cap) = per_class_cap {
                if kept[l as usize] >= cap {
                    continue;
                }
            }
            kept[l as usize] += 1;
            data.extend(pixels[i * d..(i + 1) * d].iter().map(|&p| f64::from(p) / 255.0));
            out_labels.push(l as usize);
        }
        let n = out_labels.len();
        let names = (0..10).map(|i| i.to_string()).collect();
        Self::new(Matrix::from_vec(n, d, data)?, out_labels, names, Role::Train)
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn parse_idx_images<'a>(path: &Path, bytes: &'a [u8]) -> Result<(usize, usize, usize, &'a [u8])> {
    if bytes.len() < 16 {
        return Err(Error::parse(path, "truncated IDX header"));
    }
    let magic = be_u32(bytes, 0);
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::parse(path, format!("bad image magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4) as usize;
    let rows = be_u32(bytes, 8) as usize;
    let cols = be_u32(bytes, 12) as usize;
    let need = n * rows * cols;
    if bytes.len() - 16 < need {
        return Err(Error::parse(path, "truncated image data"));
    }
    Ok((n, rows, cols, &bytes[16..16 + need]))
}

fn parse_idx_labels<'a>(path: &Path, bytes: &'a [u8]) -> Result<(usize, &'a [u8])> {
    if bytes.len() < 8 {
        return Err(Error::parse(path, "truncated IDX header"));
    }
    let magic = be_u32(bytes, 0);
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::parse(path, format!("bad label magic {magic:#010x}")));
    }
    let n = be_u32(bytes, 4) as usize;
    if bytes.len() - 8 < n {
        return Err(Error::parse(path, "truncated label data"));
    }
    Ok((n, &bytes[8..8 + n]))
}

/// Gaussian class description for the synthetic task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianClass {
    pub name: String,
    pub mean: [f64; 2],
    pub cov: [[f64; 2]; 2],
    pub n_train: usize,
    pub n_test: usize,
}

/// Synthetic two-dimensional Gaussian task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToySpec {
    pub classes: Vec<GaussianClass>,
    pub seed: u64,
}

impl ToySpec {
    /// Red `[0, 8]`, green `[7, -6]`, blue `[-7, -6]`; shared covariance
    /// `[[2, 0.5], [0.5, 2]]`; 50 training and 500 test points per class.
    /// Class indices are red = 0, green = 1, blue = 2.
    pub fn three_gaussians(seed: u64) -> Self {
        let cov = [[2.0, 0.5], [0.5, 2.0]];
        let class = |name: &str, mean| GaussianClass {
            name: name.into(),
            mean,
            cov,
            n_train: 50,
            n_test: 500,
        };
        Self {
            classes: vec![
                class("red", [0.0, 8.0]),
                class("green", [7.0, -6.0]),
                class("blue", [-7.0, -6.0]),
            ],
            seed,
        }
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    /// Samples the train and test sets. Each (class, role) pair draws from its own stream.
    pub fn generate(&self) -> Result<(LabeledDataset, LabeledDataset)> {
        let names = self.class_names();
        let mut parts = Vec::with_capacity(2);
        for (role_id, role) in [Role::Train, Role::Test].into_iter().enumerate() {
            let mut data = Vec::new();
            let mut labels = Vec::new();
            for (ci, class) in self.classes.iter().enumerate() {
                let cov = Matrix::from_rows(&[class.cov[0].to_vec(), class.cov[1].to_vec()])?;
                let n = match role {
                    Role::Test => class.n_test,
                    _ => class.n_train,
                };
                let mut rng = Rng::new(self.seed, (ci * 2 + role_id) as u64);
                let s = gauss_sample(&mut rng, &class.mean, &cov, n)?;
                data.extend_from_slice(s.as_slice());
                labels.extend(std::iter::repeat_n(ci, n));
            }
            let n = labels.len();
            parts.push(LabeledDataset::new(
                Matrix::from_vec(n, 2, data)?,
                labels,
                names.clone(),
                role,
            )?);
        }
        let test = parts.pop().expect("two parts");
        let train = parts.pop().expect("two parts");
        Ok((train, test))
    }
}

/// Stratified, seeded split. Each part takes `floor(fraction · n_class)` examples
/// of every class; parts are disjoint and assigned roles train, val, test, test, ...
pub fn split(dataset: &LabeledDataset, fractions: &[f64], seed: u64) -> Result<Vec<LabeledDataset>> {
    if fractions.is_empty() || fractions.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::invalid("fractions", "must be positive"));
    }
    let total: f64 = fractions.iter().sum();
    if total > 1.0 + 1e-12 {
        return Err(Error::invalid("fractions", format!("sum {total} exceeds 1")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); dataset.num_classes()];
    for (i, &l) in dataset.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = Rng::new(seed, 0);
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); fractions.len()];
    for members in &mut by_class {
        rng.shuffle(members);
        let n = members.len();
        let mut start = 0;
        for (p, &f) in fractions.iter().enumerate() {
            let take = ((f * n as f64) + 1e-9).floor() as usize;
            let end = (start + take).min(n);
            parts[p].extend_from_slice(&members[start..end]);
            start = end;
        }
    }
    parts
        .iter_mut()
        .enumerate()
        .map(|(p, idx)| {
            idx.sort_unstable();
            let role = match p {
                0 => Role::Train,
                1 => Role::Val,
                _ => Role::Test,
            };
            dataset.subset(idx).map(|d| d.with_role(role))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn toy_default_shapes() {
        let (train, test) = ToySpec::three_gaussians(0).generate().unwrap();
        assert_eq!(train.len(), 150);
        assert_eq!(test.len(), 1500);
        assert_eq!(train.class_counts(), vec![50, 50, 50]);
        assert_eq!(test.role(), Role::Test);
        assert_eq!(train.class_names(), ["red", "green", "blue"]);
    }

    #[test]
    fn toy_deterministic_and_seed_sensitive() {
        let a = ToySpec::three_gaussians(4).generate().unwrap();
        let b = ToySpec::three_gaussians(4).generate().unwrap();
        let c = ToySpec::three_gaussians(5).generate().unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn toy_zero_test_counts() {
        let mut spec = ToySpec::three_gaussians(1);
        for c in &mut spec.classes {
            c.n_test = 0;
        }
        let (train, test) = spec.generate().unwrap();
        assert_eq!(train.len(), 150);
        assert!(test.is_empty());
    }

    #[test]
    fn toy_means_converge() {
        let mut spec = ToySpec::three_gaussians(2);
        for c in &mut spec.classes {
            c.n_train = 5000;
            c.n_test = 0;
        }
        let (train, _) = spec.generate().unwrap();
        for (ci, class) in spec.classes.iter().enumerate() {
            for dim in 0..2 {
                let vals: Vec<f64> = (0..train.len())
                    .filter(|&i| train.y(i) == ci)
                    .map(|i| train.x(i)[dim])
                    .collect();
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                assert!((mean - class.mean[dim]).abs() < 0.1);
            }
        }
    }

    #[test]
    fn toy_rejects_bad_covariance() {
        let mut spec = ToySpec::three_gaussians(1);
        spec.classes[0].cov = [[1.0, 2.0], [2.0, 1.0]];
        assert!(spec.generate().is_err());
    }

    #[test]
    fn csv_load_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "a,cls,b\n1.5,cat,2\n-3,dog,4e-3\n0,cat,1\n").unwrap();
        let d = LabeledDataset::load_csv(&p, "cls").unwrap();
        assert_eq!(d.features().shape(), (3, 2));
        assert_eq!(d.labels(), &[0, 1, 0]);
        assert_eq!(d.class_names(), ["cat", "dog"]);
        assert_eq!(d.x(1), &[-3.0, 4e-3]);

        let (train, _) = ToySpec::three_gaussians(9).generate().unwrap();
        let q = dir.path().join("toy.csv");
        train.save_csv(&q).unwrap();
        let back = LabeledDataset::load_csv(&q, "label").unwrap();
        assert_eq!(back, train);
    }

    #[test]
    fn csv_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "").unwrap();
        assert!(LabeledDataset::load_csv(&p, "y").is_err());
        std::fs::write(&p, "a,y\n1,x\n").unwrap();
        assert!(LabeledDataset::load_csv(&p, "label").is_err());
        std::fs::write(&p, "a,y\nfoo,x\n").unwrap();
        assert!(LabeledDataset::load_csv(&p, "y").is_err());
    }

    #[test]
    fn csv_with_fixed_classes() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        std::fs::write(&p, "a,y\n1,dog\n2,cat\n").unwrap();
        let classes = ["cat".to_string(), "dog".to_string(), "eel".to_string()];
        let d = LabeledDataset::load_csv_with_classes(&p, "y", &classes).unwrap();
        assert_eq!(d.labels(), &[1, 0]);
        assert_eq!(d.num_classes(), 3);
        std::fs::write(&p, "a,y\n1,fox\n").unwrap();
        assert!(LabeledDataset::load_csv_with_classes(&p, "y", &classes).is_err());
    }

    fn write_idx(dir: &Path, labels: &[u8], rows: u32, cols: u32) -> (std::path::PathBuf, std::path::PathBuf) {
        let ip = dir.join("images.idx3-ubyte");
        let lp = dir.join("labels.idx1-ubyte");
        let mut f = std::fs::File::create(&ip).unwrap();
        f.write_all(&0x0803u32.to_be_bytes()).unwrap();
        f.write_all(&(labels.len() as u32).to_be_bytes()).unwrap();
        f.write_all(&rows.to_be_bytes()).unwrap();
        f.write_all(&cols.to_be_bytes()).unwrap();
        for (i, _) in labels.iter().enumerate() {
            let px: Vec<u8> = (0..rows * cols).map(|j| ((i as u32 * 7 + j) % 256) as u8).collect();
            f.write_all(&px).unwrap();
        }
        let mut g = std::fs::File::create(&lp).unwrap();
        g.write_all(&0x0801u32.to_be_bytes()).unwrap();
        g.write_all(&(labels.len() as u32).to_be_bytes()).unwrap();
        g.write_all(labels).unwrap();
        (ip, lp)
    }

    #[test]
    fn mnist_idx_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let labels: Vec<u8> = (0..30).map(|i| (i % 10) as u8).collect();
        let (ip, lp) = write_idx(dir.path(), &labels, 4, 3);
        let d = LabeledDataset::load_mnist_idx(&ip, &lp, None).unwrap();
        assert_eq!(d.len(), 30);
        assert_eq!(d.dim(), 12);
        assert!(d.features().as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(d.x(1)[0], 7.0 / 255.0);

        let capped = LabeledDataset::load_mnist_idx(&ip, &lp, Some(2)).unwrap();
        assert!(capped.class_counts().iter().all(|&c| c <= 2));
        assert_eq!(capped.len(), 20);

        assert!(LabeledDataset::load_mnist_idx(&lp, &ip, None).is_err());

        let bytes = std::fs::read(&ip).unwrap();
        std::fs::write(&ip, &bytes[..bytes.len() - 5]).unwrap();
        assert!(LabeledDataset::load_mnist_idx(&ip, &lp, None).is_err());
    }

    #[test]
    fn mnist_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let (ip, _) = write_idx(dir.path(), &[1, 2, 3], 2, 2);
        let lp = dir.path().join("short.idx1-ubyte");
        let mut g = std::fs::File::create(&lp).unwrap();
        g.write_all(&0x0801u32.to_be_bytes()).unwrap();
        g.write_all(&2u32.to_be_bytes()).unwrap();
        g.write_all(&[1, 2]).unwrap();
        assert!(LabeledDataset::load_mnist_idx(&ip, &lp, None).is_err());
    }

    #[test]
    fn stratified_split() {
        let mut spec = ToySpec::three_gaussians(3);
        for c in &mut spec.classes {
            c.n_train = 100;
            c.n_test = 0;
        }
        let (d, _) = spec.generate().unwrap();
        let parts = split(&d, &[0.6, 0.2, 0.2], 1).unwrap();
        assert_eq!(parts[0].class_counts(), vec![60, 60, 60]);
        assert_eq!(parts[1].class_counts(), vec![20, 20, 20]);
        assert_eq!(parts[2].class_counts(), vec![20, 20, 20]);
        assert_eq!(parts[1].role(), Role::Val);

        let mut seen = std::collections::HashSet::new();
        for p in &parts {
            for i in 0..p.len() {
                assert!(seen.insert(p.x(i)[0].to_bits()));
            }
        }
        let whole = split(&d, &[1.0], 1).unwrap();
        assert_eq!(whole[0], d);
        assert!(split(&d, &[0.7, 0.5], 1).is_err());
        assert_eq!(split(&d, &[0.5, 0.5], 8).unwrap(), split(&d, &[0.5, 0.5], 8).unwrap());
    }
}
