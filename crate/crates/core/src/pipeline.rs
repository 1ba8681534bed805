//! Experiment orchestration: calibration, bagged training, and evaluation
//! across all methods, with report and manifest emission.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{lasso_fit, ridge_fit};
use crate::error::{Error, Result};
use crate::logo::{average_weights, emit_weight_logo};
use crate::metrics::{auprc, kendall_tau, threshold_labels};
use crate::model::{build_qubo, predict, qubo_to_ising, scale_ising, TargetScaler};
use crate::rng::{mix_seed, stream_rng, STREAM_FOLD};
use crate::samplers::{
    brute_force_solve, ensemble_average, simulated_anneal, simulated_quantum_anneal,
    AnnealSchedule, MAX_ENSEMBLE_K,
};
use crate::seqdata::{
    bag_sample, preprocess, read_raw_tsv, train_test_split, EncodedDataset, SplitSpec,
};

pub const DEFAULT_FOLDS: usize = 100;
pub const DEFAULT_BAG_COUNT: usize = 50;
pub const DEFAULT_THRESHOLDS: [f64; 5] = [70.0, 80.0, 90.0, 95.0, 99.0];
pub const CALIBRATION_PERCENTILE: f64 = 80.0;
const FOLD_RETRIES: usize = 50;
const SEED_DOMAIN_CALIBRATE: u64 = 1;
const SEED_DOMAIN_TRAIN: u64 = 2;

/// Default calibration grid 2^-3 .. 2^6.
pub fn default_lambda_grid() -> Vec<f64> {
    (-3..=6).map(|e| 2f64.powi(e)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MethodKind {
    SaQubo,
    SqaQubo,
    ExactQubo,
    Ridge,
    Lasso,
    External,
}

impl MethodKind {
    pub fn is_annealer(&self) -> bool {
        matches!(
            self,
            MethodKind::SaQubo | MethodKind::SqaQubo | MethodKind::ExactQubo
        )
    }

    pub fn name(&self) -> &'static str {
        match self {
            MethodKind::SaQubo => "sa",
            MethodKind::SqaQubo => "sqa",
            MethodKind::ExactQubo => "exact",
            MethodKind::Ridge => "ridge",
            MethodKind::Lasso => "lasso",
            MethodKind::External => "external",
        }
    }

    pub fn parse(token: &str) -> Result<MethodKind> {
        match token.trim().to_ascii_lowercase().as_str() {
            "sa" | "sa_qubo" => Ok(MethodKind::SaQubo),
            "sqa" | "sqa_qubo" => Ok(MethodKind::SqaQubo),
            "exact" | "exact_qubo" => Ok(MethodKind::ExactQubo),
            "ridge" | "mlr" => Ok(MethodKind::Ridge),
            "lasso" => Ok(MethodKind::Lasso),
            "external" | "xgb" => Ok(MethodKind::External),
            other => Err(Error::Config(format!("unknown method: {other}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub schedule: Option<AnnealSchedule>,
    pub ensemble_k: Option<usize>,
    /// Shell command for [`MethodKind::External`]; invoked as
    /// `<command> <train.tsv> <test.tsv> <predictions.tsv>`.
    pub external_command: Option<String>,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Self {
        let schedule = match kind {
            MethodKind::SaQubo | MethodKind::SqaQubo => Some(AnnealSchedule::default()),
            _ => None,
        };
        MethodSpec {
            kind,
            schedule,
            ensemble_k: None,
            external_command: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            MethodKind::SaQubo | MethodKind::SqaQubo => {
                if self.schedule.is_none() {
                    return Err(Error::Config(format!(
                        "method {} requires an annealing schedule",
                        self.kind.name()
                    )));
                }
            }
            MethodKind::External => {
                if self.external_command.is_none() {
                    return Err(Error::Config(
                        "external method requires external_command".into(),
                    ));
                }
            }
            _ => {}
        }
        if let Some(k) = self.ensemble_k {
            if k < 1 || k > MAX_ENSEMBLE_K {
                return Err(Error::Config(format!(
                    "ensemble_k {k} outside 1..={MAX_ENSEMBLE_K}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Task {
    Classify,
    Rank,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Classify => "classify",
            Task::Rank => "rank",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub method: MethodKind,
    pub task: Task,
    pub lambda_grid: Vec<f64>,
    pub chosen_lambda: f64,
    pub chosen_k: Option<usize>,
    /// grid x folds validation scores at the chosen ensemble size.
    pub fold_scores: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationOptions {
    pub folds: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions {
            folds: DEFAULT_FOLDS,
        }
    }
}

/// One trained instance: a weight vector plus the target map it was
/// trained under (inverted when reporting predictions in original units).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedWeights {
    pub weights: Vec<f64>,
    pub scaler: TargetScaler,
}

impl TrainedWeights {
    pub fn predict_row(&self, phi: &[u8]) -> Result<f64> {
        predict(&self.weights, phi)
    }
}

/// Fit one method on one dataset at fixed hyper-parameters. Targets are
/// rescaled to [0, L] before fitting (same map for every method).
pub fn fit_method(
    data: &EncodedDataset,
    method: &MethodSpec,
    lambda: f64,
    ensemble_k: usize,
    sampler_seed: u64,
) -> Result<TrainedWeights> {
    let scaler = TargetScaler::fit(&data.targets, data.seq_length as f64)?;
    let normalized = EncodedDataset {
        targets: scaler.apply_all(&data.targets),
        ..data.clone()
    };
    let weights = match method.kind {
        MethodKind::Ridge => ridge_fit(&normalized, lambda)?.weights,
        MethodKind::Lasso => lasso_fit(&normalized, lambda)?.weights,
        MethodKind::SaQubo | MethodKind::SqaQubo | MethodKind::ExactQubo => {
            let qubo = build_qubo(&normalized, lambda)?;
            let ising = qubo_to_ising(&qubo);
            // all-zero instances cannot occur here (Q has unit diagonal
            // entries for every observed feature), but fall back anyway
            let scaled = scale_ising(&ising).unwrap_or(ising);
            let pool = match method.kind {
                MethodKind::SaQubo => {
                    simulated_anneal(&scaled, method.schedule.as_ref().unwrap(), sampler_seed)?
                }
                MethodKind::SqaQubo => simulated_quantum_anneal(
                    &scaled,
                    method.schedule.as_ref().unwrap(),
                    sampler_seed,
                )?,
                _ => brute_force_solve(&scaled)?,
            };
            ensemble_average(&pool, ensemble_k)?
        }
        MethodKind::External => {
            return Err(Error::External(
                "external methods produce predictions, not weights".into(),
            ))
        }
    };
    Ok(TrainedWeights { weights, scaler })
}

fn score_predictions(task: Task, y_true: &[f64], preds: &[f64]) -> Result<f64> {
    match task {
        Task::Classify => {
            let labels = threshold_labels(y_true, CALIBRATION_PERCENTILE)?;
            auprc(preds, &labels.labels)
        }
        // all-tied predictions (e.g. fully shrunk weights) score 0
        Task::Rank => match kendall_tau(y_true, preds) {
            Ok(tau) => Ok(tau),
            Err(Error::UndefinedTau(_)) => Ok(0.0),
            Err(e) => Err(e),
        },
    }
}

fn predictions(weights: &[f64], data: &EncodedDataset) -> Result<Vec<f64>> {
    data.features.iter().map(|row| predict(weights, row)).collect()
}

/// Monte Carlo cross-validation over the lambda grid (and ensemble size K
/// for annealers). Each fold trains on a bag_fraction-sized random subset
/// and validates on the remainder; folds whose validation split lacks both
/// classes are redrawn. Ties in mean score break toward larger lambda.
pub fn calibrate(
    train: &EncodedDataset,
    method: &MethodSpec,
    task: Task,
    spec: &SplitSpec,
    lambda_grid: &[f64],
    opts: &CalibrationOptions,
) -> Result<CalibrationResult> {
    method.validate()?;
    spec.validate()?;
    if method.kind == MethodKind::External {
        return Err(Error::Config(
            "external methods are not calibrated by the pipeline".into(),
        ));
    }
    if lambda_grid.is_empty() {
        return Err(Error::Config("empty lambda grid".into()));
    }
    let n = train.len();
    let fold_size = (spec.bag_fraction * n as f64).round() as usize;
    if fold_size == 0 || fold_size >= n {
        return Err(Error::DegenerateSplit(format!(
            "bag_fraction {} of {n} rows leaves no validation data",
            spec.bag_fraction
        )));
    }
    let k_grid: Vec<usize> = if method.kind.is_annealer() {
        match method.ensemble_k {
            Some(k) => vec![k],
            None => (1..=MAX_ENSEMBLE_K).collect(),
        }
    } else {
        vec![1]
    };

    // scores[k_idx][grid_idx][fold]
    let mut scores =
        vec![vec![Vec::with_capacity(opts.folds); lambda_grid.len()]; k_grid.len()];
    for fold in 0..opts.folds {
        let (fold_train, fold_valid) = draw_fold(train, spec, fold, fold_size, task)?;
        for (gi, &lambda) in lambda_grid.iter().enumerate() {
            let sampler_seed = mix_seed(
                spec.seed,
                SEED_DOMAIN_CALIBRATE,
                (fold * lambda_grid.len() + gi) as u64,
            );
            if method.kind.is_annealer() {
                // sample once, evaluate every candidate K on the same pool
                let scaler =
                    TargetScaler::fit(&fold_train.targets, fold_train.seq_length as f64)?;
                let normalized = EncodedDataset {
                    targets: scaler.apply_all(&fold_train.targets),
                    ..fold_train.clone()
                };
                let qubo = build_qubo(&normalized, lambda)?;
                let ising = qubo_to_ising(&qubo);
                let scaled = scale_ising(&ising).unwrap_or(ising);
                let pool = match method.kind {
                    MethodKind::SaQubo => simulated_anneal(
                        &scaled,
                        method.schedule.as_ref().unwrap(),
                        sampler_seed,
                    )?,
                    MethodKind::SqaQubo => simulated_quantum_anneal(
                        &scaled,
                        method.schedule.as_ref().unwrap(),
                        sampler_seed,
                    )?,
                    _ => brute_force_solve(&scaled)?,
                };
                for (ki, &k) in k_grid.iter().enumerate() {
                    let w = ensemble_average(&pool, k)?;
                    let preds = predictions(&w, &fold_valid)?;
                    scores[ki][gi].push(score_predictions(task, &fold_valid.targets, &preds)?);
                }
            } else {
                let trained = fit_method(&fold_train, method, lambda, 1, sampler_seed)?;
                let preds = predictions(&trained.weights, &fold_valid)?;
                scores[0][gi].push(score_predictions(task, &fold_valid.targets, &preds)?);
            }
        }
    }

    // argmax of mean score; lambda ties break toward larger lambda, K ties
    // toward the smaller ensemble
    let mut best = (f64::NEG_INFINITY, 0usize, 0usize);
    for (ki, per_k) in scores.iter().enumerate() {
        for (gi, folds) in per_k.iter().enumerate() {
            let mean = folds.iter().sum::<f64>() / folds.len() as f64;
            let (best_mean, best_ki, best_gi) = best;
            let better = mean > best_mean
                || (mean == best_mean && gi > best_gi)
                || (mean == best_mean && gi == best_gi && ki < best_ki);
            if better {
                best = (mean, ki, gi);
            }
        }
    }
    let (_, best_ki, best_gi) = best;
    Ok(CalibrationResult {
        method: method.kind,
        task,
        lambda_grid: lambda_grid.to_vec(),
        chosen_lambda: lambda_grid[best_gi],
        chosen_k: if method.kind.is_annealer() {
            Some(k_grid[best_ki])
        } else {
            None
        },
        fold_scores: scores.swap_remove(best_ki),
    })
}

/// Split-and-shuffle fold draw; redrawn while the validation targets cannot
/// be thresholded into two classes (classification only), bounded retries.
fn draw_fold(
    train: &EncodedDataset,
    spec: &SplitSpec,
    fold: usize,
    fold_size: usize,
    task: Task,
) -> Result<(EncodedDataset, EncodedDataset)> {
    let n = train.len();
    for retry in 0..FOLD_RETRIES {
        let stream = STREAM_FOLD + (fold * FOLD_RETRIES + retry) as u64;
        let mut indices: Vec<usize> = (0..n).collect();
        use rand::seq::SliceRandom;
        indices.shuffle(&mut stream_rng(spec.seed, stream));
        let fold_train: Vec<usize> = indices[..fold_size].to_vec();
        let fold_valid: Vec<usize> = indices[fold_size..].to_vec();
        let valid_y: Vec<f64> = fold_valid.iter().map(|&i| train.targets[i]).collect();
        if task == Task::Classify
            && threshold_labels(&valid_y, CALIBRATION_PERCENTILE).is_err()
        {
            continue;
        }
        let pick = |idx: &[usize]| EncodedDataset {
            features: idx.iter().map(|&i| train.features[i].clone()).collect(),
            targets: idx.iter().map(|&i| train.targets[i]).collect(),
            seq_length: train.seq_length,
            sequence_labels: idx
                .iter()
                .map(|&i| train.sequence_labels[i].clone())
                .collect(),
        };
        return Ok((pick(&fold_train), pick(&fold_valid)));
    }
    Err(Error::DegenerateSplit(format!(
        "fold {fold}: validation split degenerate after {FOLD_RETRIES} redraws"
    )))
}

/// Train `spec.bag_count` bagged instances with calibrated hyper-parameters.
/// Bags depend only on (seed, instance index), so every method sees the
/// same bags.
pub fn train_instances(
    train: &EncodedDataset,
    method: &MethodSpec,
    calib: &CalibrationResult,
    spec: &SplitSpec,
) -> Result<Vec<TrainedWeights>> {
    method.validate()?;
    let k = calib.chosen_k.unwrap_or(1);
    (0..spec.bag_count)
        .map(|i| {
            let bag = bag_sample(train, spec, i)
                .map_err(|e| Error::InstanceFailed {
                    index: i,
                    source: Box::new(e),
                })?;
            fit_method(
                &bag,
                method,
                calib.chosen_lambda,
                k,
                mix_seed(spec.seed, SEED_DOMAIN_TRAIN, i as u64),
            )
            .map_err(|e| Error::InstanceFailed {
                index: i,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Per-instance metric set over a test partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMetrics {
    pub thresholds: Vec<f64>,
    /// instance x threshold
    pub per_instance_auprc: Vec<Vec<f64>>,
    pub per_instance_tau: Vec<f64>,
}

impl InstanceMetrics {
    pub fn auprc_mean_std(&self) -> (Vec<f64>, Vec<f64>) {
        let t = self.thresholds.len();
        let n = self.per_instance_auprc.len() as f64;
        let mut mean = vec![0.0; t];
        let mut std = vec![0.0; t];
        for row in &self.per_instance_auprc {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n;
        }
        for row in &self.per_instance_auprc {
            for ((s, &m), &v) in std.iter_mut().zip(&mean).zip(row) {
                *s += (v - m) * (v - m);
            }
        }
        for s in &mut std {
            *s = (*s / n).sqrt();
        }
        (mean, std)
    }

    pub fn tau_quartiles(&self) -> (f64, f64, f64) {
        (
            quantile(&self.per_instance_tau, 0.25),
            quantile(&self.per_instance_tau, 0.5),
            quantile(&self.per_instance_tau, 0.75),
        )
    }
}

/// Linear-interpolation quantile (R-7) of an unsorted slice.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Evaluate trained weight vectors on an unseen test partition.
///
/// Refuses to run when any test sequence also occurs in the training
/// partition.
pub fn evaluate(
    train: &EncodedDataset,
    test: &EncodedDataset,
    weights: &[TrainedWeights],
    thresholds: &[f64],
) -> Result<InstanceMetrics> {
    let overlap = train
        .sequence_set()
        .intersection(&test.sequence_set())
        .count();
    if overlap > 0 {
        return Err(Error::TrainTestOverlap { count: overlap });
    }
    if weights.is_empty() {
        return Err(Error::EmptyInput("no trained weights".into()));
    }
    let mut per_instance_auprc = Vec::with_capacity(weights.len());
    let mut per_instance_tau = Vec::with_capacity(weights.len());
    for trained in weights {
        let preds = predictions(&trained.weights, test)?;
        let mut row = Vec::with_capacity(thresholds.len());
        for &p in thresholds {
            let labels = threshold_labels(&test.targets, p)?;
            row.push(auprc(&preds, &labels.labels)?);
        }
        per_instance_auprc.push(row);
        per_instance_tau.push(match kendall_tau(&test.targets, &preds) {
            Ok(tau) => tau,
            Err(Error::UndefinedTau(_)) => 0.0,
            Err(e) => return Err(e),
        });
    }
    Ok(InstanceMetrics {
        thresholds: thresholds.to_vec(),
        per_instance_auprc,
        per_instance_tau,
    })
}

/// Evaluate an external prediction command over the same bags.
pub fn evaluate_external(
    train: &EncodedDataset,
    test: &EncodedDataset,
    method: &MethodSpec,
    spec: &SplitSpec,
    thresholds: &[f64],
) -> Result<InstanceMetrics> {
    method.validate()?;
    let command = method
        .external_command
        .as_ref()
        .ok_or_else(|| Error::External("missing external_command".into()))?;
    let overlap = train
        .sequence_set()
        .intersection(&test.sequence_set())
        .count();
    if overlap > 0 {
        return Err(Error::TrainTestOverlap { count: overlap });
    }
    let mut per_instance_auprc = Vec::with_capacity(spec.bag_count);
    let mut per_instance_tau = Vec::with_capacity(spec.bag_count);
    for i in 0..spec.bag_count {
        let bag = bag_sample(train, spec, i)?;
        let preds = run_external_command(command, &bag, test).map_err(|e| {
            Error::InstanceFailed {
                index: i,
                source: Box::new(e),
            }
        })?;
        let mut row = Vec::with_capacity(thresholds.len());
        for &p in thresholds {
            let labels = threshold_labels(&test.targets, p)?;
            row.push(auprc(&preds, &labels.labels)?);
        }
        per_instance_auprc.push(row);
        per_instance_tau.push(match kendall_tau(&test.targets, &preds) {
            Ok(tau) => tau,
            Err(Error::UndefinedTau(_)) => 0.0,
            Err(e) => return Err(e),
        });
    }
    Ok(InstanceMetrics {
        thresholds: thresholds.to_vec(),
        per_instance_auprc,
        per_instance_tau,
    })
}

/// Invoke `<command> <train.tsv> <test.tsv> <out.tsv>` in a temp directory
/// and read back one prediction per test row.
fn run_external_command(
    command: &str,
    bag: &EncodedDataset,
    test: &EncodedDataset,
) -> Result<Vec<f64>> {
    let dir = std::env::temp_dir().join(format!(
        "qubolearn-ext-{}-{:x}",
        std::process::id(),
        mix_seed(bag.targets.len() as u64, test.len() as u64, 0)
    ));
    std::fs::create_dir_all(&dir)?;
    let train_path = dir.join("train.tsv");
    let test_path = dir.join("test.tsv");
    let out_path = dir.join("predictions.tsv");
    let mut buf = Vec::new();
    bag.write_tsv(&mut buf)?;
    std::fs::write(&train_path, &buf)?;
    buf.clear();
    test.write_tsv(&mut buf)?;
    std::fs::write(&test_path, &buf)?;
    let status = std::process::Command::new("sh")
        .arg("-c")
        .arg(format!(
            "{command} '{}' '{}' '{}'",
            train_path.display(),
            test_path.display(),
            out_path.display()
        ))
        .status()?;
    if !status.success() {
        return Err(Error::External(format!(
            "command exited with {status}: {command}"
        )));
    }
    let text = std::fs::read_to_string(&out_path)?;
    let preds: Vec<f64> = text
        .lines()
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| Error::External(format!("bad prediction line: {l}")))
        })
        .collect::<Result<_>>()?;
    let _ = std::fs::remove_dir_all(&dir);
    if preds.len() != test.len() {
        return Err(Error::External(format!(
            "expected {} predictions, got {}",
            test.len(),
            preds.len()
        )));
    }
    Ok(preds)
}

/// Per-task provenance of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProvenance {
    pub lambda: Option<f64>,
    pub ensemble_k: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub bag_fraction: f64,
    pub bag_count: usize,
    pub folds: usize,
    pub schedule: Option<AnnealSchedule>,
    pub classify: TaskProvenance,
    pub rank: TaskProvenance,
    pub train_digest: String,
    pub test_digest: String,
}

/// Final per-method report: AUPRC statistics from classification-calibrated
/// weights, Kendall-tau statistics from ranking-calibrated weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub method: String,
    pub thresholds: Vec<f64>,
    pub auprc_mean: Vec<f64>,
    pub auprc_std: Vec<f64>,
    pub tau_median: f64,
    pub tau_q1: f64,
    pub tau_q3: f64,
    pub per_instance_auprc: Vec<Vec<f64>>,
    pub per_instance_tau: Vec<f64>,
    pub provenance: Provenance,
}

impl EvaluationReport {
    /// Rebuild the aggregates from the persisted per-instance values.
    pub fn recompute_aggregates(&self) -> (Vec<f64>, Vec<f64>, f64, f64, f64) {
        let metrics = InstanceMetrics {
            thresholds: self.thresholds.clone(),
            per_instance_auprc: self.per_instance_auprc.clone(),
            per_instance_tau: self.per_instance_tau.clone(),
        };
        let (mean, std) = metrics.auprc_mean_std();
        let (q1, median, q3) = metrics.tau_quartiles();
        (mean, std, q1, median, q3)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("metric\tthreshold\tvalue\tspread\n");
        for (i, &t) in self.thresholds.iter().enumerate() {
            out.push_str(&format!(
                "auprc\t{t}\t{:.6}\t{:.6}\n",
                self.auprc_mean[i], self.auprc_std[i]
            ));
        }
        out.push_str(&format!(
            "tau_median\t-\t{:.6}\t-\n",
            self.tau_median
        ));
        out.push_str(&format!("tau_q1\t-\t{:.6}\t-\n", self.tau_q1));
        out.push_str(&format!("tau_q3\t-\t{:.6}\t-\n", self.tau_q3));
        out
    }
}

/// Line-oriented `key = value` experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub input: PathBuf,
    pub window: Option<usize>,
    pub log2: bool,
    pub test_fraction: f64,
    pub bag_fractions: Vec<f64>,
    pub bag_count: usize,
    pub folds: usize,
    pub methods: Vec<MethodKind>,
    pub lambda_grid: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub seed: u64,
    pub schedule: AnnealSchedule,
    pub external_command: Option<String>,
}

impl ExperimentConfig {
    pub fn parse<R: BufRead>(r: R) -> Result<ExperimentConfig> {
        let mut input = None;
        let mut window = None;
        let mut log2 = false;
        let mut test_fraction = 0.10;
        let mut bag_fractions = vec![0.02, 0.10];
        let mut bag_count = DEFAULT_BAG_COUNT;
        let mut folds = DEFAULT_FOLDS;
        let mut methods = Vec::new();
        let mut lambda_grid = default_lambda_grid();
        let mut thresholds = DEFAULT_THRESHOLDS.to_vec();
        let mut seed = None;
        let mut schedule = AnnealSchedule::default();
        let mut external_command = None;

        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: lineno + 1,
                message: "expected `key = value`".into(),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| Error::Parse {
                line: lineno + 1,
                message: format!("bad {what}: {value}"),
            };
            match key {
                "input" => input = Some(PathBuf::from(value)),
                "window" => window = Some(value.parse().map_err(|_| bad("window"))?),
                "log2" => log2 = value.parse().map_err(|_| bad("log2"))?,
                "test_fraction" => {
                    test_fraction = value.parse().map_err(|_| bad("test_fraction"))?
                }
                "bag_fractions" => {
                    bag_fractions = parse_list(value).map_err(|_| bad("bag_fractions"))?
                }
                "bag_count" => bag_count = value.parse().map_err(|_| bad("bag_count"))?,
                "folds" => folds = value.parse().map_err(|_| bad("folds"))?,
                "methods" => {
                    methods = value
                        .split(',')
                        .map(MethodKind::parse)
                        .collect::<Result<_>>()?
                }
                "lambda_grid" => {
                    lambda_grid = parse_list(value).map_err(|_| bad("lambda_grid"))?
                }
                "thresholds" => {
                    thresholds = parse_list(value).map_err(|_| bad("thresholds"))?
                }
                "seed" => seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "sweeps" => schedule.sweeps = value.parse().map_err(|_| bad("sweeps"))?,
                "reads" => schedule.reads = value.parse().map_err(|_| bad("reads"))?,
                "beta_initial" => {
                    schedule.beta_initial = value.parse().map_err(|_| bad("beta_initial"))?
                }
                "beta_final" => {
                    schedule.beta_final = value.parse().map_err(|_| bad("beta_final"))?
                }
                "gamma_initial" => {
                    schedule.gamma_initial = value.parse().map_err(|_| bad("gamma_initial"))?
                }
                "gamma_final" => {
                    schedule.gamma_final = value.parse().map_err(|_| bad("gamma_final"))?
                }
                "trotter_slices" => {
                    schedule.trotter_slices =
                        value.parse().map_err(|_| bad("trotter_slices"))?
                }
                "external_command" => external_command = Some(value.to_string()),
                other => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: format!("unknown key: {other}"),
                    })
                }
            }
        }
        let input = input.ok_or_else(|| Error::Config("missing key: input".into()))?;
        let seed = seed.ok_or_else(|| Error::Config("missing key: seed".into()))?;
        if methods.is_empty() {
            return Err(Error::Config("missing key: methods".into()));
        }
        Ok(ExperimentConfig {
            input,
            window,
            log2,
            test_fraction,
            bag_fractions,
            bag_count,
            folds,
            methods,
            lambda_grid,
            thresholds,
            seed,
            schedule,
            external_command,
        })
    }

    pub fn method_spec(&self, kind: MethodKind) -> MethodSpec {
        let mut spec = MethodSpec::new(kind);
        if matches!(kind, MethodKind::SaQubo | MethodKind::SqaQubo) {
            spec.schedule = Some(self.schedule);
        }
        if kind == MethodKind::External {
            spec.external_command = self.external_command.clone();
        }
        spec
    }
}

fn parse_list(value: &str) -> std::result::Result<Vec<f64>, std::num::ParseFloatError> {
    value
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect()
}

/// Run the full three-phase protocol for every (bag fraction, method) pair
/// and write reports, logos, comparison tables, and a manifest to `out_dir`.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
) -> Result<Vec<EvaluationReport>> {
    std::fs::create_dir_all(out_dir)?;
    let raw = {
        let file = std::fs::File::open(&config.input).map_err(Error::from)?;
        read_raw_tsv(std::io::BufReader::new(file))
    }
    .map_err(|e| e.in_phase("ingest"))?;
    let window = config
        .window
        .unwrap_or_else(|| raw[0].sequence.chars().count());
    let data =
        preprocess(&raw, window, config.log2).map_err(|e| e.in_phase("preprocess"))?;

    let mut reports = Vec::new();
    let mut artifacts: Vec<PathBuf> = Vec::new();
    for &bag_fraction in &config.bag_fractions {
        let spec = SplitSpec {
            test_fraction: config.test_fraction,
            bag_fraction,
            bag_count: config.bag_count,
            seed: config.seed,
        };
        let (train, test) =
            train_test_split(&data, &spec).map_err(|e| e.in_phase("split"))?;
        let opts = CalibrationOptions {
            folds: config.folds,
        };
        let mut comparison = String::from(
            "method\tauprc80_mean\tauprc80_std\ttau_median\tlambda_classify\tlambda_rank\n",
        );
        for &kind in &config.methods {
            let method = config.method_spec(kind);
            let report = if kind == MethodKind::External {
                let metrics = evaluate_external(
                    &train,
                    &test,
                    &method,
                    &spec,
                    &config.thresholds,
                )
                .map_err(|e| e.in_phase("evaluate"))?;
                build_report(
                    &method, &spec, &opts, &train, &test, &metrics, &metrics, None, None,
                )
            } else {
                let calib_c = calibrate(
                    &train,
                    &method,
                    Task::Classify,
                    &spec,
                    &config.lambda_grid,
                    &opts,
                )
                .map_err(|e| e.in_phase("calibrate"))?;
                let weights_c = train_instances(&train, &method, &calib_c, &spec)
                    .map_err(|e| e.in_phase("train"))?;
                let metrics_c = evaluate(&train, &test, &weights_c, &config.thresholds)
                    .map_err(|e| e.in_phase("evaluate"))?;
                let calib_r = calibrate(
                    &train,
                    &method,
                    Task::Rank,
                    &spec,
                    &config.lambda_grid,
                    &opts,
                )
                .map_err(|e| e.in_phase("calibrate"))?;
                let weights_r = train_instances(&train, &method, &calib_r, &spec)
                    .map_err(|e| e.in_phase("train"))?;
                let metrics_r = evaluate(&train, &test, &weights_r, &config.thresholds)
                    .map_err(|e| e.in_phase("evaluate"))?;

                // weight logo from the classification-calibrated instances
                let logo = average_weights(
                    &weights_c.iter().map(|w| w.weights.clone()).collect::<Vec<_>>(),
                    train.seq_length,
                )?;
                let logo_path = out_dir.join(format!(
                    "logo_{}_{}.svg",
                    kind.name(),
                    fraction_tag(bag_fraction)
                ));
                emit_weight_logo(&logo, &logo_path)?;
                artifacts.push(logo_path.clone());
                artifacts.push(logo_path.with_extension("tsv"));

                build_report(
                    &method,
                    &spec,
                    &opts,
                    &train,
                    &test,
                    &metrics_c,
                    &metrics_r,
                    Some(&calib_c),
                    Some(&calib_r),
                )
            };

            let idx80 = config
                .thresholds
                .iter()
                .position(|&t| t == 80.0)
                .unwrap_or(0);
            comparison.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{:.6}\t{}\t{}\n",
                kind.name(),
                report.auprc_mean[idx80],
                report.auprc_std[idx80],
                report.tau_median,
                report
                    .provenance
                    .classify
                    .lambda
                    .map_or("-".into(), |l| format!("{l}")),
                report
                    .provenance
                    .rank
                    .lambda
                    .map_or("-".into(), |l| format!("{l}")),
            ));

            let stem = format!("report_{}_{}", kind.name(), fraction_tag(bag_fraction));
            let json_path = out_dir.join(format!("{stem}.json"));
            std::fs::write(&json_path, serde_json::to_vec_pretty(&report)?)?;
            let tsv_path = out_dir.join(format!("{stem}.tsv"));
            std::fs::write(&tsv_path, report.to_tsv())?;
            artifacts.push(json_path);
            artifacts.push(tsv_path);
            reports.push(report);
        }
        let cmp_path = out_dir.join(format!("comparison_{}.tsv", fraction_tag(bag_fraction)));
        std::fs::write(&cmp_path, comparison)?;
        artifacts.push(cmp_path);
    }
    write_manifest(out_dir, &artifacts)?;
    Ok(reports)
}

fn fraction_tag(fraction: f64) -> String {
    format!("{:02}pct", (fraction * 100.0).round() as u64)
}

#[allow(clippy::too_many_arguments)]
fn build_report(
    method: &MethodSpec,
    spec: &SplitSpec,
    opts: &CalibrationOptions,
    train: &EncodedDataset,
    test: &EncodedDataset,
    metrics_classify: &InstanceMetrics,
    metrics_rank: &InstanceMetrics,
    calib_c: Option<&CalibrationResult>,
    calib_r: Option<&CalibrationResult>,
) -> EvaluationReport {
    let (auprc_mean, auprc_std) = metrics_classify.auprc_mean_std();
    let (tau_q1, tau_median, tau_q3) = metrics_rank.tau_quartiles();
    EvaluationReport {
        method: method.kind.name().to_string(),
        thresholds: metrics_classify.thresholds.clone(),
        auprc_mean,
        auprc_std,
        tau_median,
        tau_q1,
        tau_q3,
        per_instance_auprc: metrics_classify.per_instance_auprc.clone(),
        per_instance_tau: metrics_rank.per_instance_tau.clone(),
        provenance: Provenance {
            seed: spec.seed,
            bag_fraction: spec.bag_fraction,
            bag_count: spec.bag_count,
            folds: opts.folds,
            schedule: method.schedule,
            classify: TaskProvenance {
                lambda: calib_c.map(|c| c.chosen_lambda),
                ensemble_k: calib_c.and_then(|c| c.chosen_k),
            },
            rank: TaskProvenance {
                lambda: calib_r.map(|c| c.chosen_lambda),
                ensemble_k: calib_r.and_then(|c| c.chosen_k),
            },
            train_digest: train.digest(),
            test_digest: test.digest(),
        },
    }
}

fn write_manifest(out_dir: &Path, artifacts: &[PathBuf]) -> Result<()> {
    let mut entries: Vec<(String, String)> = artifacts
        .iter()
        .map(|p| {
            let bytes = std::fs::read(p)?;
            let mut hasher = Sha256::new();
            hasher.update(&bytes);
            let digest: String = hasher
                .finalize()
                .iter()
                .map(|b| format!("{b:02x}"))
                .collect();
            let name = p
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, digest))
        })
        .collect::<Result<_>>()?;
    entries.sort();
    let mut f = std::fs::File::create(out_dir.join("manifest.tsv"))?;
    writeln!(f, "file\tsha256")?;
    for (name, digest) in entries {
        writeln!(f, "{name}\t{digest}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use crate::seqdata::{encode_one_hot, NUCLEOTIDES};
    use rand::Rng;

    fn synthetic(n: usize, l: usize, seed: u64) -> EncodedDataset {
        // planted additive signal: y = w.phi + noise
        assert!(n <= 4usize.pow(l as u32), "not enough distinct sequences");
        let mut rng = stream_rng(seed, 500);
        let planted: Vec<f64> = (0..4 * l).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut seen = std::collections::HashSet::new();
        let mut features = Vec::new();
        let mut targets = Vec::new();
        let mut labels = Vec::new();
        while features.len() < n {
            let seq: String = (0..l).map(|_| NUCLEOTIDES[rng.gen_range(0..4)]).collect();
            if !seen.insert(seq.clone()) {
                continue;
            }
            let phi = encode_one_hot(&seq).unwrap();
            let y: f64 = phi
                .iter()
                .zip(&planted)
                .map(|(&p, &w)| p as f64 * w)
                .sum::<f64>()
                + rng.gen_range(-0.05..0.05);
            features.push(phi);
            targets.push(y);
            labels.push(seq);
        }
        EncodedDataset {
            features,
            targets,
            seq_length: l,
            sequence_labels: labels,
        }
    }

    fn spec(seed: u64) -> SplitSpec {
        SplitSpec {
            test_fraction: 0.2,
            bag_fraction: 0.2,
            bag_count: 5,
            seed,
        }
    }

    #[test]
    fn calibrate_single_grid_point_chooses_it() {
        let data = synthetic(120, 4, 1);
        let (train, _) = train_test_split(&data, &spec(1)).unwrap();
        let method = MethodSpec::new(MethodKind::Ridge);
        let calib = calibrate(
            &train,
            &method,
            Task::Rank,
            &spec(1),
            &[0.5],
            &CalibrationOptions { folds: 5 },
        )
        .unwrap();
        assert_eq!(calib.chosen_lambda, 0.5);
        assert_eq!(calib.fold_scores.len(), 1);
        assert_eq!(calib.fold_scores[0].len(), 5);
    }

    #[test]
    fn calibrate_tie_breaks_toward_larger_lambda() {
        // constant scores force an exact tie: use a tiny dataset where both
        // lambdas shrink everything to zero and tau is the 0.0 convention
        let data = synthetic(60, 3, 3);
        let (train, _) = train_test_split(&data, &spec(3)).unwrap();
        let method = MethodSpec::new(MethodKind::Lasso);
        let calib = calibrate(
            &train,
            &method,
            Task::Rank,
            &spec(3),
            &[1e9, 2e9],
            &CalibrationOptions { folds: 3 },
        )
        .unwrap();
        assert_eq!(calib.chosen_lambda, 2e9);
    }

    #[test]
    fn calibrate_ridge_matches_scripted_cv_loop() {
        // independent re-implementation of the Monte Carlo CV loop
        let data = synthetic(150, 4, 7);
        let sp = spec(7);
        let (train, _) = train_test_split(&data, &sp).unwrap();
        let grid = [0.125, 1.0, 8.0, 64.0];
        let folds = 8;
        let method = MethodSpec::new(MethodKind::Ridge);
        let calib = calibrate(
            &train,
            &method,
            Task::Classify,
            &sp,
            &grid,
            &CalibrationOptions { folds },
        )
        .unwrap();

        // oracle loop, written against the same documented fold-draw rule
        let fold_size = (sp.bag_fraction * train.len() as f64).round() as usize;
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (gi, &lambda) in grid.iter().enumerate() {
            let mut total = 0.0;
            for fold in 0..folds {
                let (ft, fv) =
                    draw_fold(&train, &sp, fold, fold_size, Task::Classify).unwrap();
                let scaler = TargetScaler::fit(&ft.targets, ft.seq_length as f64).unwrap();
                let normalized = EncodedDataset {
                    targets: scaler.apply_all(&ft.targets),
                    ..ft.clone()
                };
                let model = ridge_fit(&normalized, lambda).unwrap();
                let preds = predictions(&model.weights, &fv).unwrap();
                let labels = threshold_labels(&fv.targets, 80.0).unwrap();
                total += auprc(&preds, &labels.labels).unwrap();
            }
            let mean = total / folds as f64;
            if mean > best.0 || (mean == best.0 && gi > best.1) {
                best = (mean, gi);
            }
        }
        assert_eq!(calib.chosen_lambda, grid[best.1]);
    }

    #[test]
    fn train_single_bag_and_determinism() {
        let data = synthetic(60, 3, 11);
        let sp = SplitSpec {
            bag_count: 1,
            ..spec(11)
        };
        let (train, _) = train_test_split(&data, &sp).unwrap();
        let method = MethodSpec::new(MethodKind::Ridge);
        let calib = CalibrationResult {
            method: MethodKind::Ridge,
            task: Task::Rank,
            lambda_grid: vec![1.0],
            chosen_lambda: 1.0,
            chosen_k: None,
            fold_scores: vec![vec![0.0]],
        };
        let w1 = train_instances(&train, &method, &calib, &sp).unwrap();
        assert_eq!(w1.len(), 1);
        let w2 = train_instances(&train, &method, &calib, &sp).unwrap();
        assert_eq!(w1, w2);
    }

    #[test]
    fn exact_qubo_k1_weights_are_binary() {
        let data = synthetic(50, 3, 13); // dim 12 <= brute force limit
        let sp = SplitSpec {
            bag_count: 2,
            ..spec(13)
        };
        let (train, _) = train_test_split(&data, &sp).unwrap();
        let mut method = MethodSpec::new(MethodKind::ExactQubo);
        method.ensemble_k = Some(1);
        let calib = CalibrationResult {
            method: MethodKind::ExactQubo,
            task: Task::Classify,
            lambda_grid: vec![0.5],
            chosen_lambda: 0.5,
            chosen_k: Some(1),
            fold_scores: vec![vec![0.0]],
        };
        let trained = train_instances(&train, &method, &calib, &sp).unwrap();
        for t in &trained {
            assert!(t.weights.iter().all(|&w| w == 0.0 || w == 1.0));
        }
    }

    #[test]
    fn evaluate_refuses_overlap() {
        let data = synthetic(50, 3, 17);
        let trained = TrainedWeights {
            weights: vec![0.5; data.dim()],
            scaler: TargetScaler::fit(&data.targets, 3.0).unwrap(),
        };
        assert!(matches!(
            evaluate(&data, &data, &[trained], &[80.0]),
            Err(Error::TrainTestOverlap { .. })
        ));
    }

    #[test]
    fn evaluate_identical_weights_zero_std() {
        let data = synthetic(120, 4, 19);
        let sp = spec(19);
        let (train, test) = train_test_split(&data, &sp).unwrap();
        let trained = TrainedWeights {
            weights: (0..data.dim()).map(|i| i as f64 * 0.1).collect(),
            scaler: TargetScaler::fit(&train.targets, 3.0).unwrap(),
        };
        let metrics = evaluate(&train, &test, &[trained.clone(), trained.clone(), trained], &[80.0]).unwrap();
        let (_, std) = metrics.auprc_mean_std();
        assert!(std.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn evaluate_planted_weights_near_perfect_tau() {
        // noise-free synthetic data with known ordering
        let mut rng = stream_rng(23, 500);
        let l = 4;
        let planted: Vec<f64> = (0..4 * l).map(|_| rng.gen_range(0.0..1.0)).collect();
        let mut seen = std::collections::HashSet::new();
        let mut ds = EncodedDataset {
            features: vec![],
            targets: vec![],
            seq_length: l,
            sequence_labels: vec![],
        };
        while ds.len() < 150 {
            let seq: String = (0..l).map(|_| NUCLEOTIDES[rng.gen_range(0..4)]).collect();
            if !seen.insert(seq.clone()) {
                continue;
            }
            let phi = encode_one_hot(&seq).unwrap();
            let y = predict(&planted, &phi).unwrap();
            ds.features.push(phi);
            ds.targets.push(y);
            ds.sequence_labels.push(seq);
        }
        let sp = spec(23);
        let (train, test) = train_test_split(&ds, &sp).unwrap();
        let trained = TrainedWeights {
            weights: planted,
            scaler: TargetScaler::fit(&train.targets, l as f64).unwrap(),
        };
        let metrics = evaluate(&train, &test, &[trained], &[80.0]).unwrap();
        assert!(metrics.per_instance_tau[0] > 0.999);
    }

    #[test]
    fn evaluate_composes_direct_metric_calls() {
        let data = synthetic(100, 4, 29);
        let sp = spec(29);
        let (train, test) = train_test_split(&data, &sp).unwrap();
        let trained = TrainedWeights {
            weights: (0..data.dim()).map(|i| (i % 3) as f64).collect(),
            scaler: TargetScaler::fit(&train.targets, 3.0).unwrap(),
        };
        let metrics = evaluate(&train, &test, &[trained.clone()], &[80.0]).unwrap();
        let preds = predictions(&trained.weights, &test).unwrap();
        let labels = threshold_labels(&test.targets, 80.0).unwrap();
        assert_eq!(
            metrics.per_instance_auprc[0][0],
            auprc(&preds, &labels.labels).unwrap()
        );
        assert_eq!(
            metrics.per_instance_tau[0],
            kendall_tau(&test.targets, &preds).unwrap()
        );
    }

    #[test]
    fn bags_identical_across_methods() {
        let data = synthetic(100, 4, 31);
        let sp = spec(31);
        let (train, _) = train_test_split(&data, &sp).unwrap();
        // bag content depends only on (seed, index)
        let a = bag_sample(&train, &sp, 3).unwrap();
        let b = bag_sample(&train, &sp, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_parse_round_trip() {
        let text = "\
# experiment
input = data.tsv
seed = 42
methods = ridge, lasso, sa
bag_fractions = 0.02, 0.10
lambda_grid = 0.5, 1.0
thresholds = 70, 80
sweeps = 500
reads = 100
log2 = true
";
        let cfg = ExperimentConfig::parse(text.as_bytes()).unwrap();
        assert_eq!(cfg.seed, 42);
        assert_eq!(
            cfg.methods,
            vec![MethodKind::Ridge, MethodKind::Lasso, MethodKind::SaQubo]
        );
        assert_eq!(cfg.lambda_grid, vec![0.5, 1.0]);
        assert_eq!(cfg.schedule.sweeps, 500);
        assert_eq!(cfg.schedule.reads, 100);
        assert!(cfg.log2);
    }

    #[test]
    fn config_requires_seed_and_methods() {
        assert!(matches!(
            ExperimentConfig::parse("input = x.tsv\nmethods = ridge\n".as_bytes()),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("input = x.tsv\nseed = 1\n".as_bytes()),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            ExperimentConfig::parse("bogus_key = 1\n".as_bytes()),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn report_aggregates_round_trip() {
        let metrics = InstanceMetrics {
            thresholds: vec![70.0, 80.0],
            per_instance_auprc: vec![vec![0.5, 0.6], vec![0.7, 0.8], vec![0.9, 1.0]],
            per_instance_tau: vec![0.1, 0.3, 0.2],
        };
        let (mean, std) = metrics.auprc_mean_std();
        let (q1, median, q3) = metrics.tau_quartiles();
        assert!((mean[0] - 0.7).abs() < 1e-12);
        assert!((median - 0.2).abs() < 1e-12);
        assert!(q1 <= median && median <= q3);
        let report = EvaluationReport {
            method: "ridge".into(),
            thresholds: metrics.thresholds.clone(),
            auprc_mean: mean.clone(),
            auprc_std: std.clone(),
            tau_median: median,
            tau_q1: q1,
            tau_q3: q3,
            per_instance_auprc: metrics.per_instance_auprc.clone(),
            per_instance_tau: metrics.per_instance_tau.clone(),
            provenance: Provenance {
                seed: 1,
                bag_fraction: 0.1,
                bag_count: 3,
                folds: 10,
                schedule: None,
                classify: TaskProvenance {
                    lambda: Some(1.0),
                    ensemble_k: None,
                },
                rank: TaskProvenance {
                    lambda: Some(2.0),
                    ensemble_k: None,
                },
                train_digest: "a".into(),
                test_digest: "b".into(),
            },
        };
        let (m2, s2, q1b, medb, q3b) = report.recompute_aggregates();
        assert_eq!(m2, mean);
        assert_eq!(s2, std);
        assert_eq!((q1b, medb, q3b), (q1, median, q3));
        // JSON round trip
        let json = serde_json::to_string(&report).unwrap();
        let back: EvaluationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn external_adapter_runs_command() {
        // identity predictor: copies the test y column as predictions
        let data = synthetic(60, 3, 37);
        let sp = SplitSpec {
            bag_count: 2,
            ..spec(37)
        };
        let (train, test) = train_test_split(&data, &sp).unwrap();
        let mut method = MethodSpec::new(MethodKind::External);
        method.external_command =
            Some("awk -F'\\t' '{print $2}' \"$2\" > \"$3\"; true".into());
        // the command sees train as $1, test as $2, out as $3 after sh -c;
        // wrap so positional args line up
        method.external_command = Some(
            "sh -c 'awk -F\"\\t\" \"{print \\$2}\" \"$2\" > \"$3\"' --".into(),
        );
        let metrics = evaluate_external(&train, &test, &method, &sp, &[80.0]).unwrap();
        // predictions equal the truth: tau = 1, auprc = 1
        assert!(metrics.per_instance_tau.iter().all(|&t| t > 0.999));
        assert!(metrics.per_instance_auprc[0][0] > 0.999);
    }
}
