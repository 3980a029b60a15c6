//! Experiment harness: block-model contraction stages, sampled graphs, and
//! three curves per stage (the true f-mutual information, a plug-in
//! baseline on the noisy frequency matrix, and the f-modularity estimator).
//!
//! Every trial draws from its own RNG stream keyed by (alpha index, stage,
//! trial), so results do not depend on the worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fdiv::{divergence_between, f_mutual_information, DistributionMatrix, DivergenceFamily};
use crate::io::write_matrix_csv;
use crate::modularity::{EstimatorConfig, Method, PreparedGraph};
use crate::netcore::{frequency_from_graph, null_model, FrequencyMatrix};
use crate::synth::{
    run_schedule, sample_graph_with, sbm_distribution, stream_rng, BlockGroups, BlockModelConfig,
    ContractionSchedule,
};

pub fn theoretical_mi(p: &DistributionMatrix, family: DivergenceFamily) -> Result<f64> {
    f_mutual_information(family, p)
}

/// Reference measure for the plug-in baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineReference {
    /// Product of the empirical degree vectors of `F`.
    #[default]
    Empirical,
    /// The unbiased null model `J`.
    Unbiased,
}

impl std::str::FromStr for BaselineReference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "empirical" => Ok(BaselineReference::Empirical),
            "unbiased" => Ok(BaselineReference::Unbiased),
            other => Err(Error::invalid(format!(
                "unknown baseline reference '{other}'"
            ))),
        }
    }
}

/// f-mutual information of the empirical joint `F`.
pub fn baseline_mi(fm: &FrequencyMatrix, family: DivergenceFamily) -> Result<f64> {
    baseline_mi_with(fm, family, BaselineReference::Empirical)
}

pub fn baseline_mi_with(
    fm: &FrequencyMatrix,
    family: DivergenceFamily,
    reference: BaselineReference,
) -> Result<f64> {
    match reference {
        BaselineReference::Empirical => f_mutual_information(family, &fm.to_distribution()?),
        BaselineReference::Unbiased => {
            divergence_between(family, fm.matrix(), null_model(fm)?.matrix())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub families: Vec<DivergenceFamily>,
    /// Number of communities.
    pub m: usize,
    /// Vertices per community per side.
    pub n: usize,
    pub alphas: Vec<f64>,
    /// Edges per sampled graph.
    pub edges: u64,
    pub trials: usize,
    pub theta: f64,
    /// Fixed rank for every trial instead of threshold selection.
    pub rank_override: Option<usize>,
    pub epsilon: f64,
    pub method: Method,
    pub nmf_max_iter: usize,
    pub nmf_tol: f64,
    /// Merge steps; defaults to the five-block reference sequence when
    /// `m = 5` and to sequential merging otherwise.
    pub schedule: Option<ContractionSchedule>,
    pub seed: u64,
    pub baseline_reference: BaselineReference,
    /// Keep every trial's values in the results.
    pub keep_trials: bool,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    pub output: Option<PathBuf>,
    pub json: Option<PathBuf>,
    pub heatmaps: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let est = EstimatorConfig::default();
        ExperimentConfig {
            families: vec![DivergenceFamily::JensenShannon],
            m: 5,
            n: 40,
            alphas: vec![0.1],
            edges: 40_000,
            trials: 100,
            theta: est.theta,
            rank_override: None,
            epsilon: est.epsilon,
            method: est.method,
            nmf_max_iter: est.nmf_max_iter,
            nmf_tol: est.nmf_tol,
            schedule: None,
            seed: 0,
            baseline_reference: BaselineReference::Empirical,
            keep_trials: false,
            threads: None,
            output: None,
            json: None,
            heatmaps: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() {
            return Err(Error::invalid("experiment needs at least one family"));
        }
        if self.alphas.is_empty() {
            return Err(Error::invalid("experiment needs at least one alpha"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        if self.edges < 2 {
            return Err(Error::invalid("graphs need at least 2 edges"));
        }
        if self.threads == Some(0) {
            return Err(Error::invalid("threads must be >= 1"));
        }
        for &alpha in &self.alphas {
            self.block_model(alpha).validate()?;
        }
        self.estimator(self.families[0], 0).validate()?;
        self.schedule()
            .validate(&BlockGroups::singletons(&self.block_model(0.0).layout()))
    }

    pub fn block_model(&self, alpha: f64) -> BlockModelConfig {
        BlockModelConfig {
            m: self.m,
            n: self.n,
            alpha,
        }
    }

    pub fn schedule(&self) -> ContractionSchedule {
        match &self.schedule {
            Some(s) => s.clone(),
            None if self.m == 5 => ContractionSchedule::five_block_reference(),
            None => ContractionSchedule::sequential(self.m),
        }
    }

    pub fn estimator(&self, family: DivergenceFamily, seed: u64) -> EstimatorConfig {
        EstimatorConfig {
            family,
            theta: self.theta,
            epsilon: self.epsilon,
            rank_override: self.rank_override,
            method: self.method,
            nmf_max_iter: self.nmf_max_iter,
            nmf_tol: self.nmf_tol,
            seed,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageResult {
    pub family: DivergenceFamily,
    pub alpha: f64,
    pub stage: usize,
    pub theory: f64,
    pub baseline_mean: f64,
    pub baseline_std: f64,
    pub estimator_mean: f64,
    pub estimator_std: f64,
    /// Trials that produced a value.
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimator_values: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub family: DivergenceFamily,
    pub alpha_index: usize,
    pub stage: usize,
    pub trial: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExperimentResults {
    pub stages: Vec<StageResult>,
    #[serde(default)]
    pub failures: Vec<TrialFailure>,
}

/// Stage distributions per alpha, in config order.
pub fn stage_distributions(cfg: &ExperimentConfig) -> Result<Vec<Vec<DistributionMatrix>>> {
    let schedule = cfg.schedule();
    cfg.alphas
        .iter()
        .map(|&alpha| {
            let bm = cfg.block_model(alpha);
            let p = sbm_distribution(&bm)?;
            run_schedule(&p, &BlockGroups::singletons(&bm.layout()), &schedule)
        })
        .collect()
}

fn trial_stream(alpha_index: usize, stage: usize, trial: usize) -> u64 {
    ((alpha_index as u64) << 48) | ((stage as u64) << 32) | trial as u64
}

type FamilyOutcome = std::result::Result<(f64, f64), String>;

fn run_trial(
    cfg: &ExperimentConfig,
    p: &DistributionMatrix,
    stream: u64,
) -> std::result::Result<Vec<FamilyOutcome>, String> {
    let mut rng = stream_rng(cfg.seed, stream);
    let graph = sample_graph_with(p, cfg.edges, &mut rng).map_err(|e| e.to_string())?;
    let fm = frequency_from_graph(&graph).map_err(|e| e.to_string())?;
    let prepared = PreparedGraph::new(&fm, cfg.epsilon).map_err(|e| e.to_string())?;
    let nmf_seed = cfg.seed.wrapping_add(stream);
    Ok(cfg
        .families
        .iter()
        .map(|&family| {
            let baseline =
                baseline_mi_with(&fm, family, cfg.baseline_reference).map_err(|e| e.to_string())?;
            let report = prepared
                .evaluate(&cfg.estimator(family, nmf_seed))
                .map_err(|e| e.to_string())?;
            Ok((baseline, report.value))
        })
        .collect())
}

/// Mean and sample standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    cfg.validate()?;
    match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?
            .install(|| run_experiment_inner(cfg)),
        None => run_experiment_inner(cfg),
    }
}

/// Theory value, baseline values, estimator values.
type FamilySamples = (f64, Vec<f64>, Vec<f64>);

fn run_experiment_inner(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    let stages_per_alpha = stage_distributions(cfg)?;
    let fams = cfg.families.len();
    // collected[alpha][stage][family]
    let mut collected: Vec<Vec<Vec<FamilySamples>>> = Vec::new();
    let mut failures = Vec::new();

    for (ai, stages) in stages_per_alpha.iter().enumerate() {
        let mut per_stage = Vec::new();
        for (si, p) in stages.iter().enumerate() {
            let outcomes: Vec<_> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(cfg, p, trial_stream(ai, si, t)))
                .collect();
            let mut per_family: Vec<FamilySamples> = cfg
                .families
                .iter()
                .map(|&f| Ok((theoretical_mi(p, f)?, Vec::new(), Vec::new())))
                .collect::<Result<_>>()?;
            for (trial, outcome) in outcomes.into_iter().enumerate() {
                let results = match outcome {
                    Ok(r) => r,
                    Err(e) => vec![Err(e); fams],
                };
                for (fi, r) in results.into_iter().enumerate() {
                    match r {
                        Ok((b, e)) => {
                            per_family[fi].1.push(b);
                            per_family[fi].2.push(e);
                        }
                        Err(error) => failures.push(TrialFailure {
                            family: cfg.families[fi],
                            alpha_index: ai,
                            stage: si,
                            trial,
                            error,
                        }),
                    }
                }
            }
            per_stage.push(per_family);
        }
        collected.push(per_stage);
    }

    let mut out = Vec::new();
    for (fi, &family) in cfg.families.iter().enumerate() {
        for (ai, &alpha) in cfg.alphas.iter().enumerate() {
            for (si, per_family) in collected[ai].iter().enumerate() {
                let (theory, baseline, estimator) = &per_family[fi];
                if baseline.is_empty() {
                    continue;
                }
                let (baseline_mean, baseline_std) = mean_std(baseline);
                let (estimator_mean, estimator_std) = mean_std(estimator);
                out.push(StageResult {
                    family,
                    alpha,
                    stage: si,
                    theory: *theory,
                    baseline_mean,
                    baseline_std,
                    estimator_mean,
                    estimator_std,
                    trials: baseline.len(),
                    baseline_values: cfg.keep_trials.then(|| baseline.clone()),
                    estimator_values: cfg.keep_trials.then(|| estimator.clone()),
                });
            }
        }
    }
    failures.sort_by_key(|f| (f.alpha_index, f.stage, f.trial));
    Ok(ExperimentResults {
        stages: out,
        failures,
    })
}

pub const CSV_HEADER: &str =
    "family,alpha,stage,theory,baseline_mean,baseline_std,estimator_mean,estimator_std";

pub fn results_csv(results: &ExperimentResults) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &results.stages {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.family,
            r.alpha,
            r.stage,
            r.theory,
            r.baseline_mean,
            r.baseline_std,
            r.estimator_mean,
            r.estimator_std
        )
        .expect("writing to a String cannot fail");
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

pub fn export(
    results: &ExperimentResults,
    format: ExportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    if results.stages.is_empty() {
        return Err(Error::invalid("no stage results to export"));
    }
    let text = match format {
        ExportFormat::Csv => results_csv(results),
        ExportFormat::Json => serde_json::to_string_pretty(results)? + "\n",
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn import_json(path: impl AsRef<Path>) -> Result<ExperimentResults> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Writes `stage_<t>.csv` for every stage. With several alphas each gets
/// its own `alpha_<alpha>/` subdirectory.
pub fn export_heatmaps(
    dir: impl AsRef<Path>,
    alphas: &[f64],
    stages: &[Vec<DistributionMatrix>],
) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let mut written = Vec::new();
    for (alpha, per_alpha) in alphas.iter().zip(stages) {
        let target = if alphas.len() == 1 {
            dir.to_path_buf()
        } else {
            dir.join(format!("alpha_{alpha}"))
        };
        fs::create_dir_all(&target).map_err(|e| Error::io(&target, e))?;
        for (t, p) in per_alpha.iter().enumerate() {
            let path = target.join(format!("stage_{t}.csv"));
            write_matrix_csv(&path, p.matrix())?;
            written.push(path);
        }
    }
    Ok(written)
}
