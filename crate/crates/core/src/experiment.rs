//! Experiment configuration and the `sample`, `benchmark` and `gen-data`
//! commands behind the command-line tool.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::integrators::IntegratorConfig;
use crate::models::{
    load_dataset, synthesize_banana, synthesize_gmm, synthesize_logreg, BananaModel, Dataset,
    fmt_f64, DatasetFormat, GaussianMixtureModel, LogisticRegressionModel, MixtureRecipe,
    TargetModel,
};
use crate::samplers::{run_chain_with, ChainSummary, Method, SamplerSpec};

pub type BoxedModel = Box<dyn TargetModel + Send + Sync>;

fn default_alpha() -> f64 {
    LogisticRegressionModel::DEFAULT_ALPHA
}
fn default_sigma_y() -> f64 {
    2.0
}
fn default_sigma_theta() -> f64 {
    1.0
}
fn default_components() -> usize {
    2
}

/// A target model and where its data come from.
///
/// Each family reads `data` (a CSV path) when given and otherwise
/// synthesizes a dataset from `n`, its family-specific parameters and
/// `data_seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Logistic {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        /// Covariates, intercept excluded.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        d: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_seed: Option<u64>,
        #[serde(default = "default_alpha")]
        alpha: f64,
    },
    Banana {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_seed: Option<u64>,
        #[serde(default = "default_sigma_y")]
        sigma_y: f64,
        #[serde(default = "default_sigma_theta")]
        sigma_theta: f64,
    },
    Gmm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data: Option<PathBuf>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        recipe: Option<MixtureRecipe>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        data_seed: Option<u64>,
        #[serde(default = "default_components")]
        components: usize,
    },
}

impl ModelSpec {
    pub fn name(&self) -> String {
        let (name, data) = match self {
            ModelSpec::Logistic { name, data, .. }
            | ModelSpec::Banana { name, data, .. }
            | ModelSpec::Gmm { name, data, .. } => (name, data),
        };
        if let Some(n) = name {
            return n.clone();
        }
        if let Some(stem) = data.as_ref().and_then(|p| p.file_stem()) {
            return stem.to_string_lossy().into_owned();
        }
        match self {
            ModelSpec::Logistic { n, d, .. } => {
                format!("logistic_n{}_d{}", n.unwrap_or(0), d.unwrap_or(0))
            }
            ModelSpec::Banana { .. } => "banana".into(),
            ModelSpec::Gmm { recipe, .. } => {
                recipe.map_or("gmm".into(), |r| r.name().to_string())
            }
        }
    }

    fn data_path(&self) -> Option<&Path> {
        match self {
            ModelSpec::Logistic { data, .. }
            | ModelSpec::Banana { data, .. }
            | ModelSpec::Gmm { data, .. } => data.as_deref(),
        }
    }

    fn validate(&self, base: &Path) -> Result<()> {
        if let Some(p) = self.data_path() {
            let full = base.join(p);
            if !full.is_file() {
                return Err(Error::Config(format!("data file {} not found", full.display())));
            }
            return Ok(());
        }
        let missing = |what: &str| {
            Err(Error::Config(format!(
                "{} model needs either `data` or `{what}`",
                self.name()
            )))
        };
        match self {
            ModelSpec::Logistic { n, d, .. } if n.is_none() || d.is_none() => missing("n` and `d"),
            ModelSpec::Banana { n: None, .. } => missing("n"),
            ModelSpec::Gmm { n, recipe, .. } if n.is_none() || recipe.is_none() => {
                missing("n` and `recipe")
            }
            _ => Ok(()),
        }
    }

    /// Loads or synthesizes the data. `base` resolves relative data paths.
    pub fn dataset(&self, base: &Path) -> Result<Dataset> {
        let format = match self {
            ModelSpec::Logistic { .. } => DatasetFormat::Classification,
            _ => DatasetFormat::Observations,
        };
        if let Some(p) = self.data_path() {
            return load_dataset(&base.join(p), format);
        }
        self.validate(base)?;
        match self {
            ModelSpec::Logistic { n, d, data_seed, .. } => {
                synthesize_logreg(n.unwrap_or(0), d.unwrap_or(0), data_seed.unwrap_or(0))
            }
            ModelSpec::Banana { n, data_seed, .. } => {
                synthesize_banana(n.unwrap_or(0), data_seed.unwrap_or(0))
            }
            ModelSpec::Gmm {
                recipe, n, data_seed, ..
            } => synthesize_gmm(
                recipe.expect("validated"),
                n.unwrap_or(0),
                data_seed.unwrap_or(0),
            ),
        }
    }

    pub fn build(&self, base: &Path) -> Result<BoxedModel> {
        let data = self.dataset(base)?;
        Ok(match self {
            ModelSpec::Logistic { alpha, .. } => {
                Box::new(LogisticRegressionModel::from_dataset(&data, *alpha)?)
            }
            ModelSpec::Banana {
                sigma_y,
                sigma_theta,
                ..
            } => Box::new(BananaModel::from_dataset(&data, *sigma_y, *sigma_theta)?),
            ModelSpec::Gmm { components, .. } => {
                Box::new(GaussianMixtureModel::from_dataset(&data, *components)?)
            }
        })
    }
}

/// Sampler settings as written in a config file; the seed comes from the
/// experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerEntry {
    pub method: Method,
    pub epsilon: f64,
    pub steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fp_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fp_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fp_fixed: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass_diag: Option<Vec<f64>>,
}

impl SamplerEntry {
    pub fn spec(&self, seed: u64) -> SamplerSpec {
        let defaults = IntegratorConfig::default();
        SamplerSpec {
            method: self.method,
            integrator: IntegratorConfig {
                epsilon: self.epsilon,
                steps: self.steps,
                fp_tol: self.fp_tol.unwrap_or(defaults.fp_tol),
                fp_max: self.fp_max.unwrap_or(defaults.fp_max),
                fp_fixed: self.fp_fixed,
            },
            mass_diag: self.mass_diag.clone(),
            seed,
            volume_correction: true,
        }
    }
}

fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_iters: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub trace: bool,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub samplers: Vec<SamplerEntry>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks everything that can be checked without running a chain.
    /// `base` resolves relative data paths.
    pub fn validate(&self, base: &Path) -> Result<()> {
        if self.n_iters <= self.burn_in {
            return Err(Error::Config(format!(
                "n_iters ({}) must exceed burn_in ({})",
                self.n_iters, self.burn_in
            )));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        for m in &self.models {
            m.validate(base)?;
        }
        for s in &self.samplers {
            s.spec(self.seed).integrator.validate()?;
        }
        Ok(())
    }
}

fn header(dim: usize) -> Vec<String> {
    (1..=dim).map(|i| format!("theta{i}")).collect()
}

/// Files written by [`cmd_sample`].
#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub samples: PathBuf,
    pub summary: PathBuf,
    pub trace: Option<PathBuf>,
    pub chain: ChainSummary,
}

fn summary_json(
    chain: &ChainSummary,
    model: &str,
    spec: &SamplerSpec,
    config: &ExperimentConfig,
) -> serde_json::Value {
    json!({
        "model": model,
        "method": chain.method,
        "seed": spec.seed,
        "kept_iterations": chain.kept(),
        "acceptance_rate": chain.acceptance_rate,
        "seconds_per_iteration": chain.seconds_per_iteration,
        "total_seconds": chain.total_seconds,
        "ess": {
            "min": chain.ess.min,
            "median": chain.ess.median,
            "max": chain.ess.max,
            "per_dimension": chain.ess.per_dimension,
        },
        "min_ess_per_second": chain.ess.min_ess_per_second,
        "divergences": chain.divergences,
        "fp_failures": chain.fp_failures,
        "mean_fp_iterations": chain.mean_fp_iters,
        "negative_determinants": chain.negative_determinants,
        "posterior_mean": chain.mean().as_slice(),
        "config": config,
    })
}

/// Runs one chain on the config's single model and sampler.
pub fn cmd_sample(config: &ExperimentConfig, base: &Path) -> Result<SampleOutput> {
    config.validate(base)?;
    let (model_spec, entry) = match (config.models.as_slice(), config.samplers.as_slice()) {
        ([m], [s]) => (m, s),
        (ms, ss) => {
            return Err(Error::Config(format!(
                "sample needs exactly one model and one sampler, got {} and {}",
                ms.len(),
                ss.len()
            )))
        }
    };
    let model = model_spec.build(base)?;
    let spec = entry.spec(config.seed);
    fs::create_dir_all(&config.output_dir)?;

    let trace_path = config.output_dir.join("trace.csv");
    let mut trace_writer = if config.trace {
        let mut w = csv::Writer::from_path(&trace_path)?;
        let mut h = vec!["iteration".to_string(), "step".to_string()];
        h.extend(header(model.dim()));
        w.write_record(&h)?;
        Some(w)
    } else {
        None
    };
    let mut trace_error: Option<csv::Error> = None;
    let mut sink = |it: usize, path: &[DVector<f64>]| {
        if let Some(w) = trace_writer.as_mut() {
            for (step, theta) in path.iter().enumerate() {
                let mut rec = vec![it.to_string(), step.to_string()];
                rec.extend(theta.iter().map(|v| fmt_f64(*v)));
                if let Err(e) = w.write_record(&rec) {
                    trace_error.get_or_insert(e);
                }
            }
        }
    };
    let chain = run_chain_with(
        &model,
        &spec,
        None,
        config.n_iters,
        config.burn_in,
        if config.trace { Some(&mut sink) } else { None },
    )?;
    if let Some(e) = trace_error {
        return Err(e.into());
    }
    if let Some(mut w) = trace_writer {
        w.flush()?;
    }

    let samples_path = config.output_dir.join("samples.csv");
    let mut w = csv::Writer::from_path(&samples_path)?;
    w.write_record(header(model.dim()))?;
    for row in chain.samples.row_iter() {
        w.write_record(row.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush()?;

    let summary_path = config.output_dir.join("summary.json");
    let summary = summary_json(&chain, &model_spec.name(), &spec, config);
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)? + "\n")?;

    Ok(SampleOutput {
        samples: samples_path,
        summary: summary_path,
        trace: config.trace.then_some(trace_path),
        chain,
    })
}

/// One line of a benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub data: String,
    pub method: Method,
    pub acceptance_rate: f64,
    pub seconds_per_iteration: f64,
    pub ess_min: f64,
    pub ess_median: f64,
    pub ess_max: f64,
    pub min_ess_per_second: f64,
    /// Set when the cell failed; the numeric fields are then NaN.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl BenchmarkRow {
    fn from_chain(data: String, chain: &ChainSummary) -> Self {
        Self {
            data,
            method: chain.method,
            acceptance_rate: chain.acceptance_rate,
            seconds_per_iteration: chain.seconds_per_iteration,
            ess_min: chain.ess.min,
            ess_median: chain.ess.median,
            ess_max: chain.ess.max,
            min_ess_per_second: chain.ess.min_ess_per_second,
            note: None,
        }
    }

    fn failed(data: String, method: Method, error: &Error) -> Self {
        Self {
            data,
            method,
            acceptance_rate: f64::NAN,
            seconds_per_iteration: f64::NAN,
            ess_min: f64::NAN,
            ess_median: f64::NAN,
            ess_max: f64::NAN,
            min_ess_per_second: f64::NAN,
            note: Some(error.to_string()),
        }
    }
}

/// Renders rows as an aligned table with columns AP, s, ESS, min(ESS)/s.
pub fn format_table(rows: &[BenchmarkRow]) -> String {
    let cells: Vec<[String; 6]> = rows
        .iter()
        .map(|r| {
            if let Some(note) = &r.note {
                return [
                    r.data.clone(),
                    r.method.label().into(),
                    "-".into(),
                    "-".into(),
                    format!("failed: {note}"),
                    "-".into(),
                ];
            }
            [
                r.data.clone(),
                r.method.label().into(),
                format!("{:.2}", r.acceptance_rate),
                format!("{:.2e}", r.seconds_per_iteration),
                format!("({:.0},{:.0},{:.0})", r.ess_min, r.ess_median, r.ess_max),
                format!("{:.2}", r.min_ess_per_second),
            ]
        })
        .collect();
    let titles = ["Data", "Method", "AP", "s", "ESS", "min(ESS)/s"];
    let mut widths = titles.map(str::len);
    for c in &cells {
        for (w, s) in widths.iter_mut().zip(c) {
            *w = (*w).max(s.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, fields: &[&str]| {
        let parts: Vec<String> = fields
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (f, w))| {
                if i < 2 {
                    format!("{f:<w$}")
                } else {
                    format!("{f:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &titles);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(out, "{}", rule.join("  "));
    for c in &cells {
        let refs: Vec<&str> = c.iter().map(String::as_str).collect();
        line(&mut out, &refs);
    }
    out
}

/// Files written by [`cmd_benchmark`].
#[derive(Debug, Clone)]
pub struct BenchmarkOutput {
    pub csv: PathBuf,
    pub table: PathBuf,
    pub rows: Vec<BenchmarkRow>,
}

/// Runs every model × sampler cell, each with its own seed
/// `seed + cell index`, on up to `workers` threads.
pub fn cmd_benchmark(config: &ExperimentConfig, base: &Path) -> Result<BenchmarkOutput> {
    config.validate(base)?;
    if config.models.is_empty() || config.samplers.is_empty() {
        return Err(Error::Config("benchmark grid is empty".into()));
    }
    let cells: Vec<(usize, &ModelSpec, &SamplerEntry)> = config
        .models
        .iter()
        .flat_map(|m| config.samplers.iter().map(move |s| (m, s)))
        .enumerate()
        .map(|(i, (m, s))| (i, m, s))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let rows: Vec<BenchmarkRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, model_spec, entry)| {
                let name = model_spec.name();
                let spec = entry.spec(config.seed.wrapping_add(i as u64));
                model_spec
                    .build(base)
                    .and_then(|model| {
                        run_chain_with(&model, &spec, None, config.n_iters, config.burn_in, None)
                    })
                    .map(|chain| BenchmarkRow::from_chain(name.clone(), &chain))
                    .unwrap_or_else(|e| BenchmarkRow::failed(name, entry.method, &e))
            })
            .collect()
    });

    fs::create_dir_all(&config.output_dir)?;
    let csv_path = config.output_dir.join("benchmark.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record([
        "data",
        "method",
        "ap",
        "s",
        "ess_min",
        "ess_median",
        "ess_max",
        "min_ess_per_s",
        "note",
    ])?;
    for r in &rows {
        w.write_record([
            r.data.clone(),
            r.method.name().to_string(),
            fmt_f64(r.acceptance_rate),
            fmt_f64(r.seconds_per_iteration),
            fmt_f64(r.ess_min),
            fmt_f64(r.ess_median),
            fmt_f64(r.ess_max),
            fmt_f64(r.min_ess_per_second),
            r.note.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    let table_path = config.output_dir.join("benchmark.txt");
    fs::write(&table_path, format_table(&rows))?;
    Ok(BenchmarkOutput {
        csv: csv_path,
        table: table_path,
        rows,
    })
}

/// Parameters of [`cmd_gen_data`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GenSpec {
    Logistic { n: usize, d: usize },
    Banana { n: usize },
    Gmm { recipe: MixtureRecipe, n: usize },
}

/// Writes a synthetic dataset to `out` and its metadata to
/// `out` with the extension `.json`. Returns the metadata path.
pub fn cmd_gen_data(spec: &GenSpec, seed: u64, out: &Path) -> Result<PathBuf> {
    let (data, format) = match *spec {
        GenSpec::Logistic { n, d } => (synthesize_logreg(n, d, seed)?, DatasetFormat::Classification),
        GenSpec::Banana { n } => (synthesize_banana(n, seed)?, DatasetFormat::Observations),
        GenSpec::Gmm { recipe, n } => (synthesize_gmm(recipe, n, seed)?, DatasetFormat::Observations),
    };
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    data.write_csv(out, format)?;
    let meta_path = out.with_extension("json");
    let meta = json!({
        "name": data.name,
        "rows": data.n_obs(),
        "format": format,
        "seed": seed,
        "spec": spec,
        "provenance": data.provenance,
    });
    fs::write(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(meta_path)
}

/// Exit status for an error: 1 for configuration problems, 2 otherwise.
pub fn exit_code(error: &Error) -> u8 {
    match error {
        Error::Config(_) => 1,
        _ => 2,
    }
}
