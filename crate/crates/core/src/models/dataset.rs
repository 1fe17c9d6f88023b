use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::logistic;
use crate::error::{Error, Result};

/// Where a dataset came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Provenance {
    File { path: PathBuf },
    Synthesized { generator: String, seed: u64, params: Value },
}

/// A design matrix and response vector.
///
/// Observation-only data (banana, mixtures) keep `x` with zero columns and
/// store the observations in `y`.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    /// Writes the dataset in the format [`load_dataset`] reads back.
    ///
    /// Classification data are written without the intercept column.
    pub fn write_csv(&self, path: &Path, format: DatasetFormat) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        match format {
            DatasetFormat::Classification => {
                let covariates: Vec<usize> = (1..self.x.ncols()).collect();
                let mut header: Vec<String> = covariates.iter().map(|j| format!("x{j}")).collect();
                header.push("y".into());
                w.write_record(&header)?;
                for i in 0..self.n_obs() {
                    let mut rec: Vec<String> =
                        covariates.iter().map(|&j| fmt_f64(self.x[(i, j)])).collect();
                    rec.push(format!("{}", self.y[i] as i64));
                    w.write_record(&rec)?;
                }
            }
            DatasetFormat::Observations => {
                w.write_record(["y"])?;
                for v in self.y.iter() {
                    w.write_record([fmt_f64(*v)])?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    /// Header row, covariate columns, 0/1 label in the last column.
    /// Covariates are standardized and an intercept column is prepended.
    Classification,
    /// Header row and a single column of observations.
    Observations,
}

/// Reads a CSV file with a header row.
pub fn load_dataset(path: &Path, format: DatasetFormat) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Parse(format!("{}: missing header row", path.display())));
    }
    let width = headers.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        if rec.len() != width {
            return Err(Error::DimensionMismatch {
                expected: width,
                got: rec.len(),
            });
        }
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>().map_err(|_| {
                    Error::Parse(format!("{}: row {}: not a number: {f:?}", path.display(), line + 2))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "data".into());
    let provenance = Provenance::File {
        path: path.to_path_buf(),
    };
    let n = rows.len();
    match format {
        DatasetFormat::Observations => {
            if width != 1 {
                return Err(Error::DimensionMismatch {
                    expected: 1,
                    got: width,
                });
            }
            Ok(Dataset {
                name,
                x: DMatrix::zeros(n, 0),
                y: DVector::from_iterator(n, rows.iter().map(|r| r[0])),
                provenance,
            })
        }
        DatasetFormat::Classification => {
            if width < 2 {
                return Err(Error::Parse(format!(
                    "{}: need at least one covariate and a label column",
                    path.display()
                )));
            }
            let p = width - 1;
            let mut x = DMatrix::from_element(n, p + 1, 1.0);
            for (i, r) in rows.iter().enumerate() {
                for j in 0..p {
                    x[(i, j + 1)] = r[j];
                }
            }
            standardize_covariates(&mut x);
            let y = DVector::from_iterator(n, rows.iter().map(|r| r[p]));
            Ok(Dataset {
                name,
                x,
                y,
                provenance,
            })
        }
    }
}

/// Zero mean, unit variance for every column except the intercept.
fn standardize_covariates(x: &mut DMatrix<f64>) {
    let n = x.nrows() as f64;
    for j in 1..x.ncols() {
        let mut col = x.column_mut(j);
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
        let sd = (col.norm_squared() / (n - 1.0).max(1.0)).sqrt();
        if sd > 0.0 {
            col /= sd;
        }
    }
}

/// Logistic regression data with `N(0, 1)` covariates, an intercept column,
/// and a true coefficient vector drawn from `N(0, I)`.
pub fn synthesize_logreg(n: usize, d: usize, seed: u64) -> Result<Dataset> {
    if n == 0 || d == 0 {
        return Err(Error::Config(format!("need positive n and d, got n={n}, d={d}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let truth: Vec<f64> = (0..=d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut x = DMatrix::from_element(n, d + 1, 1.0);
    let mut y = DVector::zeros(n);
    for i in 0..n {
        let mut eta = truth[0];
        for j in 1..=d {
            let v: f64 = StandardNormal.sample(&mut rng);
            x[(i, j)] = v;
            eta += truth[j] * v;
        }
        y[i] = if rng.random::<f64>() < logistic(eta) { 1.0 } else { 0.0 };
    }
    Ok(Dataset {
        name: format!("sim_n{n}_d{d}"),
        x,
        y,
        provenance: Provenance::Synthesized {
            generator: "logistic".into(),
            seed,
            params: json!({ "n": n, "d": d, "true_theta": truth }),
        },
    })
}

/// Banana observations `y_i ~ N(1, 2²)`, i.e. `θ₁ + θ₂² = 1`, `σ_y = 2`.
pub fn synthesize_banana(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("need at least one observation".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dist = Normal::new(1.0, 2.0).expect("valid normal");
    let y = DVector::from_iterator(n, (0..n).map(|_| dist.sample(&mut rng)));
    Ok(Dataset {
        name: "banana".into(),
        x: DMatrix::zeros(n, 0),
        y,
        provenance: Provenance::Synthesized {
            generator: "banana".into(),
            seed,
            params: json!({ "n": n, "mean": 1.0, "sigma_y": 2.0 }),
        },
    })
}

/// The five classical univariate test mixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixtureRecipe {
    Kurtotic,
    Bimodal,
    Skewed,
    Trimodal,
    Claw,
}

impl MixtureRecipe {
    pub const ALL: [MixtureRecipe; 5] = [
        MixtureRecipe::Kurtotic,
        MixtureRecipe::Bimodal,
        MixtureRecipe::Skewed,
        MixtureRecipe::Trimodal,
        MixtureRecipe::Claw,
    ];

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|r| r.name() == name.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown mixture recipe {name:?}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            MixtureRecipe::Kurtotic => "kurtotic",
            MixtureRecipe::Bimodal => "bimodal",
            MixtureRecipe::Skewed => "skewed",
            MixtureRecipe::Trimodal => "trimodal",
            MixtureRecipe::Claw => "claw",
        }
    }

    /// `(weight, mean, sd)` for every component.
    pub fn components(self) -> Vec<(f64, f64, f64)> {
        match self {
            MixtureRecipe::Kurtotic => vec![(2.0 / 3.0, 0.0, 1.0), (1.0 / 3.0, 0.0, 0.1)],
            MixtureRecipe::Bimodal => vec![(0.5, -1.0, 2.0 / 3.0), (0.5, 1.0, 2.0 / 3.0)],
            MixtureRecipe::Skewed => vec![(0.75, 0.0, 1.0), (0.25, 1.5, 1.0 / 3.0)],
            MixtureRecipe::Trimodal => vec![
                (0.45, -1.2, 0.6),
                (0.45, 1.2, 0.6),
                (0.1, 0.0, 0.25),
            ],
            MixtureRecipe::Claw => {
                let mut c = vec![(0.5, 0.0, 1.0)];
                c.extend((0..5).map(|i| (0.1, i as f64 / 2.0 - 1.0, 0.1)));
                c
            }
        }
    }

    pub fn density(self, x: f64) -> f64 {
        self.components()
            .iter()
            .map(|(w, m, s)| {
                let z = (x - m) / s;
                w * (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
            })
            .sum()
    }
}

pub fn synthesize_gmm(recipe: MixtureRecipe, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("need at least one observation".into()));
    }
    let comps = recipe.components();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let y = DVector::from_iterator(
        n,
        (0..n).map(|_| {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = comps.len() - 1;
            for (idx, (w, _, _)) in comps.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = idx;
                    break;
                }
            }
            let (_, m, s) = comps[pick];
            let z: f64 = StandardNormal.sample(&mut rng);
            m + s * z
        }),
    );
    Ok(Dataset {
        name: recipe.name().into(),
        x: DMatrix::zeros(n, 0),
        y,
        provenance: Provenance::Synthesized {
            generator: format!("gmm/{}", recipe.name()),
            seed,
            params: json!({ "n": n, "components": comps }),
        },
    })
}

/// A classification benchmark that is fetched rather than shipped.
#[derive(Debug, Clone, Copy)]
pub struct BenchmarkDataset {
    pub name: &'static str,
    /// Number of covariates, intercept excluded.
    pub covariates: usize,
    pub n_obs: usize,
    pub source: &'static str,
}

impl BenchmarkDataset {
    pub fn fetch_instructions(&self) -> String {
        format!(
            "{name}: obtain from {src}; convert to CSV with a header row, {p} numeric covariate \
             columns and a final 0/1 label column ({n} rows), and save as {name}.csv",
            name = self.name,
            src = self.source,
            p = self.covariates,
            n = self.n_obs
        )
    }

    /// Checks that a loaded file has the published shape.
    pub fn verify(&self, data: &Dataset) -> Result<()> {
        if data.n_obs() != self.n_obs {
            return Err(Error::DimensionMismatch {
                expected: self.n_obs,
                got: data.n_obs(),
            });
        }
        if data.x.ncols() != self.covariates + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.covariates + 1,
                got: data.x.ncols(),
            });
        }
        Ok(())
    }
}

pub const BENCHMARK_DATASETS: [BenchmarkDataset; 5] = [
    BenchmarkDataset {
        name: "australian",
        covariates: 14,
        n_obs: 690,
        source: "UCI Machine Learning Repository, Statlog (Australian Credit Approval)",
    },
    BenchmarkDataset {
        name: "german",
        covariates: 24,
        n_obs: 1000,
        source: "UCI Machine Learning Repository, Statlog (German Credit Data), numeric version",
    },
    BenchmarkDataset {
        name: "heart",
        covariates: 13,
        n_obs: 270,
        source: "UCI Machine Learning Repository, Statlog (Heart)",
    },
    BenchmarkDataset {
        name: "pima",
        covariates: 7,
        n_obs: 532,
        source: "Pima Indians diabetes data (MASS::Pima.tr and Pima.te combined)",
    },
    BenchmarkDataset {
        name: "ripley",
        covariates: 2,
        n_obs: 250,
        source: "Ripley's synthetic two-class data (MASS::synth.tr)",
    },
];
