use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use csada::attack::{targeted_attack, write_trajectories_csv, AttackConfig, AttackResult};
use csada::cost::CostMatrix;
use csada::data::{split, LabeledDataset, ToySpec};
use csada::eval::{evaluate, export_boundary_grid, predictions, write_grid_csv, EvalReport};
use csada::model::{Checkpoint, MlpModel};
use csada::numcore::{Matrix, Rng};
use csada::trainer::{PenaltyMode, TrainConfig, TrainLog, Trainer};
use serde::Serialize;

use crate::config::{ExperimentConfig, Method};
use crate::error::{io_err, CliError, CliResult};

const INIT_STREAM: u64 = 7;
const COST_STREAM: u64 = 0xC057;
const SAMPLE_STREAM: u64 = 0x5452;

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("artifact serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> CliError {
    CliError::validation(format!("`{field}`: {reason}"))
}

// ---------------------------------------------------------------------------
// gen-toy

pub fn gen_toy(out: &Path, seed: u64, force: bool) -> CliResult<()> {
    let files = ["train.csv", "test.csv", "cost.csv"].map(|f| out.join(f));
    if !force {
        if let Some(p) = files.iter().find(|p| p.exists()) {
            return Err(CliError::Io(format!("{} exists (pass --force to overwrite)", p.display())));
        }
    }
    create_dir(out)?;
    let spec = ToySpec::three_gaussians(seed);
    let (train, test) = spec.generate()?;
    train.save_csv(&files[0])?;
    test.save_csv(&files[1])?;
    CostMatrix::single_pair(spec.class_names(), 1, 2)?.save_csv(&files[2])?;
    println!("wrote {} training and {} test rows to {}", train.len(), test.len(), out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// shared experiment plumbing

struct Splits {
    train: LabeledDataset,
    val: Option<LabeledDataset>,
    test: Option<LabeledDataset>,
}

impl Splits {
    /// Held-out data for the final report: test, else validation, else train.
    fn report_set(&self) -> (&'static str, &LabeledDataset) {
        match (&self.test, &self.val) {
            (Some(t), _) => ("test", t),
            (None, Some(v)) => ("val", v),
            (None, None) => ("train", &self.train),
        }
    }
}

fn load_data(cfg: &ExperimentConfig, cost_names: Option<&[String]>) -> CliResult<Splits> {
    let d = &cfg.dataset;
    let (train, test) = if let Some(toy) = &d.toy {
        let (a, b) = toy.generate()?;
        (a, Some(b))
    } else if let Some(csv) = &d.csv {
        let train = match cost_names {
            Some(names) => LabeledDataset::load_csv_with_classes(&csv.train, &csv.label_column, names)?,
            None => LabeledDataset::load_csv(&csv.train, &csv.label_column)?,
        };
        let test = match &csv.test {
            Some(p) => Some(LabeledDataset::load_csv_with_classes(
                p,
                &csv.label_column,
                train.class_names(),
            )?),
            None => None,
        };
        (train, test)
    } else if let Some(m) = &d.mnist {
        let train = LabeledDataset::load_mnist_idx(&m.train_images, &m.train_labels, m.per_class_cap)?;
        let test = match (&m.test_images, &m.test_labels) {
            (Some(i), Some(l)) => Some(LabeledDataset::load_mnist_idx(i, l, m.per_class_cap)?),
            (None, None) => None,
            _ => return Err(invalid("dataset.mnist", "test_images and test_labels go together")),
        };
        (train, test)
    } else {
        return Err(invalid("dataset", "no source"));
    };
    let (train, val) = match d.val_fraction {
        Some(f) => {
            let mut parts = split(&train, &[1.0 - f, f], cfg.train.config.seed)?.into_iter();
            let tr = parts.next().expect("two parts");
            (tr, parts.next())
        }
        None => (train, None),
    };
    let dims = &cfg.model.dims;
    if dims[0] != train.dim() {
        return Err(invalid("model.dims", format!("input width {} but data has {} features", dims[0], train.dim())));
    }
    if dims[dims.len() - 1] != train.num_classes() {
        return Err(invalid(
            "model.dims",
            format!("{} outputs but data has {} classes", dims[dims.len() - 1], train.num_classes()),
        ));
    }
    Ok(Splits { train, val, test })
}

fn preload_cost(cfg: &ExperimentConfig) -> CliResult<Option<CostMatrix>> {
    match &cfg.cost.csv {
        Some(p) => Ok(Some(CostMatrix::load_csv(p)?)),
        None => Ok(None),
    }
}

fn build_cost(cfg: &ExperimentConfig, preloaded: Option<CostMatrix>, names: &[String]) -> CliResult<CostMatrix> {
    let names = names.to_vec();
    let c = &cfg.cost;
    let cost = if let Some(m) = preloaded {
        m
    } else if let Some(seed) = c.pareto_seed {
        CostMatrix::random_pareto(names, &mut Rng::new(seed, COST_STREAM))?
    } else if let Some(rows) = &c.matrix {
        CostMatrix::new(names, Matrix::from_rows(rows)?).map_err(|e| invalid("cost.matrix", e))?
    } else if let Some([y, z]) = c.pair {
        CostMatrix::single_pair(names, y, z).map_err(|e| invalid("cost.pair", e))?
    } else {
        CostMatrix::all_ones(names)?
    };
    Ok(cost)
}

struct Experiment {
    cfg: ExperimentConfig,
    data: Splits,
    cost: CostMatrix,
}

impl Experiment {
    fn prepare(cfg: ExperimentConfig) -> CliResult<Self> {
        let preloaded = preload_cost(&cfg)?;
        let data = load_data(&cfg, preloaded.as_ref().map(CostMatrix::names))?;
        let cost = build_cost(&cfg, preloaded, data.train.class_names())?;
        let k = data.train.num_classes();
        if let Some(pair) = cfg.train.pair {
            if pair[0] >= k || pair[1] >= k || pair[0] == pair[1] {
                return Err(invalid("train.pair", format!("needs two distinct classes below {k}")));
            }
        }
        Ok(Self { cfg, data, cost })
    }

    fn initial_model(&self, seed: u64) -> CliResult<MlpModel> {
        Ok(MlpModel::glorot_init(
            &mut Rng::new(seed, INIT_STREAM),
            &self.cfg.model.dims,
            self.cfg.model.activation,
        )?)
    }

    fn trainer(&self, cfg: TrainConfig) -> CliResult<Trainer<'_>> {
        let t = Trainer::new(cfg)?;
        Ok(match &self.data.val {
            Some(v) => t.with_validation(v, &self.cost),
            None => t,
        })
    }

    /// The configured starting checkpoint, or else a fresh baseline run.
    fn pretrained(&self, seed: u64, dir: &Path) -> CliResult<MlpModel> {
        if let Some(p) = &self.cfg.train.init_checkpoint {
            let m = Checkpoint::load(p)?.to_model()?;
            if m.dims() != self.cfg.model.dims.as_slice() {
                return Err(invalid("train.init_checkpoint", "layer widths differ from model.dims"));
            }
            return Ok(m);
        }
        let cfg = TrainConfig {
            seed,
            ..self.cfg.train.pretrain.clone()
        };
        let (model, log) = self.trainer(cfg)?.baseline(self.initial_model(seed)?, &self.data.train)?;
        model.to_checkpoint(seed, epochs_run(&log)).save(&dir.join("pretrained.json"))?;
        log.write_jsonl(&dir.join("pretrain_log.jsonl"))?;
        Ok(model)
    }

    fn train_method(&self, start: MlpModel, cfg: TrainConfig) -> CliResult<(MlpModel, TrainLog)> {
        let train = &self.data.train;
        let t = self.trainer(cfg)?;
        let out = match self.cfg.train.method {
            Method::Baseline => t.baseline(start, train)?,
            Method::CsadaFull => t.csada_full(start, train, &self.cost)?,
            Method::CsadaStochastic => t.csada_stochastic(start, train, &self.cost)?,
            Method::PenaltyPair => {
                let [y, z] = self.cfg.train.pair.expect("validated");
                t.penalty(
                    start,
                    train,
                    &PenaltyMode::Pair {
                        true_class: y,
                        predicted: z,
                    },
                )?
            }
            Method::PenaltyAp => t.penalty(
                start,
                train,
                &PenaltyMode::Adjusted {
                    cost: self.cost.clone(),
                    alpha: self.cfg.train.alpha.expect("validated"),
                },
            )?,
        };
        Ok(out)
    }
}

fn epochs_run(log: &TrainLog) -> usize {
    log.records.last().map_or(0, |r| r.epoch + 1)
}

#[derive(Debug, Serialize)]
struct RunResult {
    run_id: String,
    seed: u64,
    wer: f64,
    accuracy: f64,
    train_accuracy: f64,
    epochs: usize,
    attacks: usize,
}

#[derive(Debug, Serialize)]
struct Summary<'a> {
    method: &'a str,
    eval_split: &'a str,
    replicates: usize,
    wer_mean: f64,
    wer_std: f64,
    accuracy_mean: f64,
    accuracy_std: f64,
    runs: Vec<RunResult>,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn accuracy(model: &MlpModel, data: &LabeledDataset) -> CliResult<f64> {
    let pred = predictions(model, data)?;
    let hits = pred.iter().zip(data.labels()).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / data.len() as f64)
}

// ---------------------------------------------------------------------------
// train

pub fn train(config: &Path, overrides: &[String]) -> CliResult<()> {
    let cfg = ExperimentConfig::load(config, overrides)?;
    let exp = Experiment::prepare(cfg)?;
    let cfg = &exp.cfg;
    let method = cfg.train.method.as_str();
    create_dir(&cfg.output)?;
    let mut runs = Vec::with_capacity(cfg.replicates);
    for r in 0..cfg.replicates {
        let seed = cfg.train.config.seed + r as u64;
        let run_id = format!("{method}-seed{seed}");
        let dir = cfg.output.join(&run_id);
        create_dir(&dir)?;
        let started = unix_now();

        let mut run_cfg = cfg.clone();
        run_cfg.train.config.seed = seed;
        run_cfg.replicates = 1;
        write_json(&dir.join("config.json"), &run_cfg)?;

        let start = match (cfg.train.method, &cfg.train.init_checkpoint) {
            (Method::Baseline, None) => exp.initial_model(seed)?,
            _ => exp.pretrained(seed, &dir)?,
        };
        let (model, log) = exp.train_method(start, run_cfg.train.config.clone())?;
        model.to_checkpoint(seed, epochs_run(&log)).save(&dir.join("checkpoint.json"))?;
        log.write_jsonl(&dir.join("trainlog.jsonl"))?;

        let (_, eval_set) = exp.data.report_set();
        let report = evaluate(&model, eval_set, &exp.cost)?;
        write_json(&dir.join("eval.json"), &report)?;
        report.write_pairwise_csv(&dir.join("pairwise.csv"), exp.cost.names())?;
        write_json(
            &dir.join("metadata.json"),
            &serde_json::json!({ "started_unix": started, "finished_unix": unix_now() }),
        )?;

        let result = RunResult {
            run_id,
            seed,
            wer: report.wer,
            accuracy: report.accuracy,
            train_accuracy: accuracy(&model, &exp.data.train)?,
            epochs: epochs_run(&log),
            attacks: log.total_attacks(),
        };
        println!(
            "{}: wer={:.6} accuracy={:.4} train_accuracy={:.4}",
            result.run_id, result.wer, result.accuracy, result.train_accuracy
        );
        runs.push(result);
    }
    let (wer_mean, wer_std) = mean_std(&runs.iter().map(|r| r.wer).collect::<Vec<_>>());
    let (accuracy_mean, accuracy_std) = mean_std(&runs.iter().map(|r| r.accuracy).collect::<Vec<_>>());
    let summary = Summary {
        method,
        eval_split: exp.data.report_set().0,
        replicates: runs.len(),
        wer_mean,
        wer_std,
        accuracy_mean,
        accuracy_std,
        runs,
    };
    write_json(&cfg.output.join(format!("{method}-summary.json")), &summary)?;
    println!("{method}: wer {wer_mean:.6} ({wer_std:.6}) over {} replicate(s)", summary.replicates);
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

pub struct DataArgs<'a> {
    pub path: &'a Path,
    pub label_column: &'a str,
    pub classes: Option<&'a [String]>,
}

fn load_csv_data(args: &DataArgs<'_>, fallback: Option<&[String]>) -> CliResult<LabeledDataset> {
    Ok(match args.classes.or(fallback) {
        Some(names) => LabeledDataset::load_csv_with_classes(args.path, args.label_column, names)?,
        None => LabeledDataset::load_csv(args.path, args.label_column)?,
    })
}

fn load_model_for(checkpoint: &Path, data: &LabeledDataset) -> CliResult<MlpModel> {
    let model = Checkpoint::load(checkpoint)?.to_model()?;
    if model.input_dim() != data.dim() {
        return Err(invalid("data", format!("{} features but the model expects {}", data.dim(), model.input_dim())));
    }
    if model.num_classes() < data.num_classes() {
        return Err(invalid(
            "data",
            format!("{} classes but the model has {} outputs", data.num_classes(), model.num_classes()),
        ));
    }
    Ok(model)
}

pub fn eval(
    checkpoint: &Path,
    data: &DataArgs<'_>,
    cost: Option<&Path>,
    out: Option<&Path>,
    pairwise: Option<&Path>,
) -> CliResult<()> {
    // read the checkpoint first so a bad path fails before any data parsing
    Checkpoint::load(checkpoint)?;
    let cost = cost.map(CostMatrix::load_csv).transpose()?;
    let set = load_csv_data(data, cost.as_ref().map(CostMatrix::names))?;
    let model = load_model_for(checkpoint, &set)?;
    let names: Vec<String> = match data.classes {
        Some(c) => c.to_vec(),
        None => (0..model.num_classes())
            .map(|i| set.class_names().get(i).cloned().unwrap_or_else(|| i.to_string()))
            .collect(),
    };
    let cost = match cost {
        Some(c) => c,
        None => CostMatrix::all_ones(names)?,
    };
    if cost.k() != model.num_classes() {
        return Err(invalid("cost", format!("{} classes but the model has {} outputs", cost.k(), model.num_classes())));
    }
    let report: EvalReport = evaluate(&model, &set, &cost)?;
    match out {
        Some(p) => write_json(p, &report)?,
        None => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
    }
    if let Some(p) = pairwise {
        report.write_pairwise_csv(p, cost.names())?;
    }
    eprintln!("wer={:.6} accuracy={:.4} n={}", report.wer, report.accuracy, report.n);
    Ok(())
}

// ---------------------------------------------------------------------------
// export

pub fn export_boundary(
    checkpoint: &Path,
    out: &Path,
    resolution: usize,
    x_range: (f64, f64),
    y_range: (f64, f64),
) -> CliResult<()> {
    let model = Checkpoint::load(checkpoint)?.to_model()?;
    let rows = export_boundary_grid(&model, x_range, y_range, resolution)?;
    write_grid_csv(out, &rows)?;
    println!("wrote {} grid rows to {}", rows.len(), out.display());
    Ok(())
}

fn class_index(data: &LabeledDataset, spec: &str, field: &str) -> CliResult<usize> {
    if let Some(i) = data.class_names().iter().position(|n| n == spec) {
        return Ok(i);
    }
    match spec.parse::<usize>() {
        Ok(i) if i < data.num_classes() => Ok(i),
        _ => Err(invalid(field, format!("unknown class `{spec}`"))),
    }
}

pub struct TrajectoryArgs<'a> {
    pub source: &'a str,
    pub target: &'a str,
    pub points: usize,
    pub seed: u64,
    pub attack: AttackConfig,
}

pub fn export_trajectories(
    checkpoint: &Path,
    data: &DataArgs<'_>,
    args: &TrajectoryArgs<'_>,
    out: &Path,
) -> CliResult<()> {
    args.attack.validate()?;
    let set = load_csv_data(data, None)?;
    let model = load_model_for(checkpoint, &set)?;
    let y = class_index(&set, args.source, "source")?;
    let z = class_index(&set, args.target, "target")?;
    if y == z {
        return Err(invalid("target", "must differ from source"));
    }
    let mut pool: Vec<usize> = (0..set.len()).filter(|&i| set.y(i) == y).collect();
    Rng::new(args.seed, SAMPLE_STREAM).shuffle(&mut pool);
    pool.truncate(args.points);
    let attacks = pool
        .iter()
        .map(|&i| Ok((i, set.x(i), z, targeted_attack(&model, set.x(i), y, z, &args.attack)?)))
        .collect::<CliResult<Vec<(usize, &[f64], usize, AttackResult)>>>()?;
    write_trajectories_csv(out, &model, &attacks)?;
    for (i, _, _, r) in &attacks {
        println!("point {i}: {:?}", r.termination);
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep-lambda

const SWEEP_HEADER: &str = "lambda,wer_mean,wer_std,accuracy_mean,accuracy_std,replicates";

fn done_lambdas(path: &Path) -> CliResult<Vec<f64>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some(SWEEP_HEADER) {
        return Err(CliError::Io(format!("{}: unexpected header", path.display())));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .next()
                .and_then(|v| v.parse::<f64>().ok())
                .ok_or_else(|| CliError::Io(format!("{}: malformed row `{l}`", path.display())))
        })
        .collect()
}

pub fn sweep_lambda(config: &Path, overrides: &[String], lambdas: &[f64]) -> CliResult<()> {
    let cfg = ExperimentConfig::load(config, overrides)?;
    let method = cfg.train.method;
    if !matches!(method, Method::CsadaFull | Method::CsadaStochastic) {
        return Err(invalid("train.method", "sweeps need csada_full or csada_stochastic"));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l >= 0.0) || !l.is_finite()) {
        return Err(invalid("lambdas", format!("{l} is not a non-negative number")));
    }
    let exp = Experiment::prepare(cfg)?;
    let dir = exp.cfg.output.join(format!("sweep-{}", method.as_str()));
    create_dir(&dir)?;
    let table = dir.join("sweep.csv");
    let done = done_lambdas(&table)?;
    let pending: Vec<f64> = lambdas
        .iter()
        .copied()
        .filter(|l| !done.iter().any(|d| d.to_bits() == l.to_bits()))
        .collect();
    for l in lambdas.iter().filter(|l| !pending.contains(l)) {
        println!("lambda {l:?}: already in {}", table.display());
    }
    if pending.is_empty() {
        return Ok(());
    }
    write_json(&dir.join("config.json"), &exp.cfg)?;

    let mut starts = Vec::with_capacity(exp.cfg.replicates);
    for r in 0..exp.cfg.replicates {
        let seed = exp.cfg.train.config.seed + r as u64;
        let rep_dir = dir.join(format!("pretrain-seed{seed}"));
        let cached = rep_dir.join("pretrained.json");
        let model = if exp.cfg.train.init_checkpoint.is_none() && cached.exists() {
            Checkpoint::load(&cached)?.to_model()?
        } else {
            create_dir(&rep_dir)?;
            exp.pretrained(seed, &rep_dir)?
        };
        starts.push((seed, model));
    }

    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(&table)
        .map_err(|e| io_err(&table, e))?;
    if file.metadata().map_err(|e| io_err(&table, e))?.len() == 0 {
        writeln!(file, "{SWEEP_HEADER}").map_err(|e| io_err(&table, e))?;
    }
    let (_, eval_set) = exp.data.report_set();
    for lambda in pending {
        let mut wers = Vec::new();
        let mut accs = Vec::new();
        for (seed, start) in &starts {
            let cfg = TrainConfig {
                lambda,
                seed: *seed,
                ..exp.cfg.train.config.clone()
            };
            let (model, _) = exp.train_method(start.clone(), cfg)?;
            let report = evaluate(&model, eval_set, &exp.cost)?;
            wers.push(report.wer);
            accs.push(report.accuracy);
        }
        let (wm, ws) = mean_std(&wers);
        let (am, asd) = mean_std(&accs);
        writeln!(file, "{lambda:?},{wm:?},{ws:?},{am:?},{asd:?},{}", wers.len()).map_err(|e| io_err(&table, e))?;
        file.flush().map_err(|e| io_err(&table, e))?;
        println!("lambda {lambda:?}: wer {wm:.6} ({ws:.6})");
    }
    Ok(())
}

/// Parses `--lambdas 0,0.1,1`.
pub fn parse_lambdas(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect()
}
