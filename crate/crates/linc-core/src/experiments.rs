//! Experiment specifications, data generation and the extraction of
//! directly observed experimental effects.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LinearCyclicModel;
use crate::vars::{names_to_set, var_name, VarSet};

/// Identifier of one experimental effect `t(source ~> target || J)`.
///
/// The intervention set always contains the source and never the target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EffectKey {
    pub source: usize,
    pub target: usize,
    pub j: VarSet,
}

impl EffectKey {
    pub fn new(source: usize, target: usize, j: VarSet) -> Self {
        EffectKey { source, target, j }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.source >= n {
            return Err(Error::IndexOutOfRange {
                index: self.source,
                n,
            });
        }
        if self.target >= n {
            return Err(Error::IndexOutOfRange {
                index: self.target,
                n,
            });
        }
        if let Some(bad) = self.j.iter().find(|&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, n });
        }
        if self.source == self.target {
            return Err(Error::InvalidKey(format!("{self} has source == target")));
        }
        if !self.j.contains(self.source) {
            return Err(Error::InvalidKey(format!(
                "{self} does not intervene on its source"
            )));
        }
        if self.j.contains(self.target) {
            return Err(Error::InvalidKey(format!("{self} intervenes on its target")));
        }
        Ok(())
    }

    /// True when this key denotes the direct effect `b(source -> target)`,
    /// i.e. the intervention set is everything but the target.
    pub fn is_direct(&self, n: usize) -> bool {
        self.j == VarSet::full(n).without(self.target)
    }
}

impl std::fmt::Display for EffectKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "t({}~>{}||{})",
            var_name(self.source),
            var_name(self.target),
            self.j
        )
    }
}

/// A partition of the variables into intervened, observed and hidden sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentSpec {
    n: usize,
    j: VarSet,
    u: VarSet,
    l: VarSet,
}

impl ExperimentSpec {
    pub fn new(n: usize, j: VarSet, u: VarSet, l: VarSet) -> Result<Self> {
        let full = VarSet::full(n);
        if j.union(u).union(l) != full
            || !j.intersect(u).is_empty()
            || !j.intersect(l).is_empty()
            || !u.intersect(l).is_empty()
        {
            return Err(Error::InvalidSpec(format!(
                "J={j}, U={u}, L={l} is not a partition of {full}"
            )));
        }
        Ok(ExperimentSpec { n, j, u, l })
    }

    /// Fully observed experiment intervening on `j`.
    pub fn fully_observed(n: usize, j: VarSet) -> Result<Self> {
        Self::new(n, j, j.complement(n), VarSet::empty())
    }

    /// Passive observation of every variable.
    pub fn null_experiment(n: usize) -> Self {
        ExperimentSpec {
            n,
            j: VarSet::empty(),
            u: VarSet::full(n),
            l: VarSet::empty(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn intervened(&self) -> VarSet {
        self.j
    }

    pub fn observed(&self) -> VarSet {
        self.u
    }

    pub fn hidden(&self) -> VarSet {
        self.l
    }

    /// All measured variables, `J ∪ U`, in ascending index order.
    pub fn measured(&self) -> VarSet {
        self.j.union(self.u)
    }

    pub fn is_null(&self) -> bool {
        self.j.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Payload {
    /// N x |J ∪ U| sample matrix, column order = ascending variable index.
    Samples(DMatrix<f64>),
    /// Exact covariance over J ∪ U (the infinite-sample limit).
    Exact(DMatrix<f64>),
}

/// Data observed in one experiment: finite samples or an exact covariance
/// over the measured variables, with hidden variables marginalized away.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    spec: ExperimentSpec,
    columns: Vec<usize>,
    payload: Payload,
    cov: DMatrix<f64>,
}

impl DataSet {
    pub fn spec(&self) -> &ExperimentSpec {
        &self.spec
    }

    /// Measured variable index of each payload column.
    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.payload, Payload::Exact(_))
    }

    pub fn sample_count(&self) -> Option<usize> {
        match &self.payload {
            Payload::Samples(m) => Some(m.nrows()),
            Payload::Exact(_) => None,
        }
    }

    /// Covariance over the measured variables (ML `1/N` normalization for
    /// samples; disturbances and interventions are zero-mean by model
    /// definition, so no recentering is applied).
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Position of variable `var` in the payload columns.
    pub fn column_of(&self, var: usize) -> Option<usize> {
        self.columns.iter().position(|&v| v == var)
    }

    /// Covariance entry for a pair of measured variables.
    pub fn cov_between(&self, a: usize, b: usize) -> Option<f64> {
        let (ca, cb) = (self.column_of(a)?, self.column_of(b)?);
        Some(self.cov[(ca, cb)])
    }

    fn from_samples(spec: ExperimentSpec, samples: DMatrix<f64>) -> Self {
        let columns: Vec<usize> = spec.measured().iter().collect();
        let n = samples.nrows() as f64;
        let cov = samples.transpose() * &samples / n;
        let cov = 0.5 * (&cov + cov.transpose());
        DataSet {
            spec,
            columns,
            payload: Payload::Samples(samples),
            cov,
        }
    }
}

/// Draw `n_samples` equilibrium observations from the manipulated model.
///
/// Disturbances are Gaussian with covariance `Sigma_e~`; intervened
/// variables receive independent unit-variance Gaussian values. The
/// equilibrium is solved directly per batch, which is valid for every
/// weakly stable model regardless of spectral radius.
pub fn sample_data(
    model: &LinearCyclicModel,
    spec: &ExperimentSpec,
    n_samples: usize,
    seed: u64,
) -> Result<DataSet> {
    assert!(n_samples >= 1, "need at least one sample");
    check_spec(model, spec)?;
    let n = model.n();
    let mm = model.manipulate(spec.intervened())?;
    let t_tilde = mm.total_effects_tilde()?;
    let noise_cov = mm.sigma_e_tilde() + mm.sigma_c();
    let factor = psd_factor(&noise_cov);

    let mut rng = StdRng::seed_from_u64(seed);
    let mut raw = DMatrix::zeros(n_samples, n);
    let mut z = nalgebra::DVector::<f64>::zeros(n);
    for row in 0..n_samples {
        for i in 0..n {
            z[i] = rng.sample(StandardNormal);
        }
        let e = &factor * &z;
        let x = &t_tilde * e;
        for i in 0..n {
            raw[(row, i)] = x[i];
        }
    }
    let columns: Vec<usize> = spec.measured().iter().collect();
    let mut samples = DMatrix::zeros(n_samples, columns.len());
    for (c, &var) in columns.iter().enumerate() {
        for row in 0..n_samples {
            samples[(row, c)] = raw[(row, var)];
        }
    }
    Ok(DataSet::from_samples(*spec, samples))
}

/// The infinite-sample-limit dataset: the exact equilibrium covariance
/// restricted to the measured variables.
pub fn exact_dataset(model: &LinearCyclicModel, spec: &ExperimentSpec) -> Result<DataSet> {
    check_spec(model, spec)?;
    let cov = model
        .manipulate(spec.intervened())?
        .equilibrium_covariance()?;
    let columns: Vec<usize> = spec.measured().iter().collect();
    let k = columns.len();
    let sub = DMatrix::from_fn(k, k, |r, c| cov[(columns[r], columns[c])]);
    Ok(DataSet {
        spec: *spec,
        columns,
        payload: Payload::Exact(sub.clone()),
        cov: sub,
    })
}

fn check_spec(model: &LinearCyclicModel, spec: &ExperimentSpec) -> Result<()> {
    if spec.n() != model.n() {
        return Err(Error::UniverseMismatch(format!(
            "spec over {} variables, model over {}",
            spec.n(),
            model.n()
        )));
    }
    Ok(())
}

/// Square root factor of a PSD matrix via symmetric eigendecomposition,
/// clamping tiny negative eigenvalues to zero.
fn psd_factor(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let n = m.nrows();
    let mut scaled = eig.eigenvectors.clone();
    for c in 0..n {
        let l = eig.eigenvalues[c].max(0.0).sqrt();
        for r in 0..n {
            scaled[(r, c)] *= l;
        }
    }
    scaled
}

/// Every directly observed experimental effect of a dataset: for each
/// intervened `x_i` and observed `x_u`, the covariance `cov(x_i, x_u)`
/// keyed by `t(x_i ~> x_u || J)`. Hidden targets yield no keys.
pub fn observed_effects(dataset: &DataSet) -> BTreeMap<EffectKey, f64> {
    let mut out = BTreeMap::new();
    let spec = dataset.spec();
    for i in spec.intervened().iter() {
        for u in spec.observed().iter() {
            let value = dataset
                .cov_between(i, u)
                .expect("intervened and observed variables are measured");
            out.insert(EffectKey::new(i, u, spec.intervened()), value);
        }
    }
    out
}

/// Resample the rows of a finite dataset with replacement.
pub fn bootstrap_resample(
    dataset: &DataSet,
    replicate_count: usize,
    seed: u64,
) -> Result<Vec<DataSet>> {
    let samples = match &dataset.payload {
        Payload::Samples(m) => m,
        Payload::Exact(_) => return Err(Error::ExactPayload),
    };
    let mut rng = StdRng::seed_from_u64(seed);
    let n_rows = samples.nrows();
    let mut out = Vec::with_capacity(replicate_count);
    for _ in 0..replicate_count {
        let mut resampled = DMatrix::zeros(n_rows, samples.ncols());
        for row in 0..n_rows {
            let pick = rng.gen_range(0..n_rows);
            for c in 0..samples.ncols() {
                resampled[(row, c)] = samples[(pick, c)];
            }
        }
        out.push(DataSet::from_samples(*dataset.spec(), resampled));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// File formats
// ---------------------------------------------------------------------------

/// JSON sidecar stored next to a sample CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    #[serde(rename = "J")]
    pub j: Vec<String>,
    #[serde(rename = "U")]
    pub u: Vec<String>,
    #[serde(rename = "L")]
    pub l: Vec<String>,
    #[serde(rename = "N")]
    pub n_samples: usize,
}

/// Self-contained JSON file for an exact-covariance dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactDatasetJson {
    #[serde(rename = "J")]
    pub j: Vec<String>,
    #[serde(rename = "U")]
    pub u: Vec<String>,
    #[serde(rename = "L")]
    pub l: Vec<String>,
    pub variables: Vec<String>,
    pub covariance: Vec<Vec<f64>>,
}

/// JSON list describing experiment specs (used by `gen-experiments`,
/// `check-id` and `plan`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecsFile {
    pub n: usize,
    pub experiments: Vec<SpecJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpecJson {
    #[serde(rename = "J")]
    pub j: Vec<String>,
    #[serde(rename = "U")]
    pub u: Vec<String>,
    #[serde(rename = "L")]
    pub l: Vec<String>,
}

impl SpecJson {
    pub fn from_spec(spec: &ExperimentSpec) -> Self {
        SpecJson {
            j: spec.intervened().names(),
            u: spec.observed().names(),
            l: spec.hidden().names(),
        }
    }

    pub fn into_spec(&self, n: usize) -> Result<ExperimentSpec> {
        ExperimentSpec::new(
            n,
            names_to_set(&self.j, n)?,
            names_to_set(&self.u, n)?,
            names_to_set(&self.l, n)?,
        )
    }
}

/// Write a finite dataset as `<stem>.csv` plus `<stem>.meta.json`, or an
/// exact dataset as `<stem>.exact.json`. Returns the written paths.
pub fn write_dataset(dataset: &DataSet, dir: &Path, stem: &str) -> Result<Vec<std::path::PathBuf>> {
    let spec = dataset.spec();
    match &dataset.payload {
        Payload::Samples(samples) => {
            let csv_path = dir.join(format!("{stem}.csv"));
            let meta_path = dir.join(format!("{stem}.meta.json"));
            let mut writer = csv::Writer::from_path(&csv_path)?;
            let header: Vec<String> = dataset.columns.iter().map(|&v| var_name(v)).collect();
            writer.write_record(&header)?;
            for row in 0..samples.nrows() {
                let record: Vec<String> =
                    (0..samples.ncols()).map(|c| samples[(row, c)].to_string()).collect();
                writer.write_record(&record)?;
            }
            writer.flush()?;
            let meta = DatasetMeta {
                j: spec.intervened().names(),
                u: spec.observed().names(),
                l: spec.hidden().names(),
                n_samples: samples.nrows(),
            };
            serde_json::to_writer_pretty(std::fs::File::create(&meta_path)?, &meta)?;
            Ok(vec![csv_path, meta_path])
        }
        Payload::Exact(cov) => {
            let path = dir.join(format!("{stem}.exact.json"));
            let json = ExactDatasetJson {
                j: spec.intervened().names(),
                u: spec.observed().names(),
                l: spec.hidden().names(),
                variables: dataset.columns.iter().map(|&v| var_name(v)).collect(),
                covariance: crate::model::matrix_to_rows(cov),
            };
            serde_json::to_writer_pretty(std::fs::File::create(&path)?, &json)?;
            Ok(vec![path])
        }
    }
}

/// Read a dataset previously written by [`write_dataset`]. `n` is the size
/// of the joint variable universe. Accepts either a `.csv` path (expecting
/// the `.meta.json` sidecar) or a `.exact.json` path.
pub fn read_dataset(path: &Path, n: usize) -> Result<DataSet> {
    let name = path.to_string_lossy();
    if name.ends_with(".exact.json") {
        let json: ExactDatasetJson = serde_json::from_reader(std::fs::File::open(path)?)?;
        let spec = ExperimentSpec::new(
            n,
            names_to_set(&json.j, n)?,
            names_to_set(&json.u, n)?,
            names_to_set(&json.l, n)?,
        )?;
        let k = json.variables.len();
        if json.covariance.len() != k || json.covariance.iter().any(|r| r.len() != k) {
            return Err(Error::InvalidSpec("covariance shape mismatch".into()));
        }
        let expected: Vec<String> = spec.measured().iter().map(var_name).collect();
        if json.variables != expected {
            return Err(Error::InvalidSpec(format!(
                "variables {:?} do not match J ∪ U {:?}",
                json.variables, expected
            )));
        }
        let cov = DMatrix::from_fn(k, k, |r, c| json.covariance[r][c]);
        let sym_err = (cov.clone() - cov.transpose()).norm();
        if sym_err > 1e-9 {
            return Err(Error::InvalidSpec("covariance not symmetric".into()));
        }
        Ok(DataSet {
            spec,
            columns: spec.measured().iter().collect(),
            payload: Payload::Exact(cov.clone()),
            cov,
        })
    } else {
        let meta_path = path.with_extension("").with_extension("meta.json");
        let meta_path = if meta_path.exists() {
            meta_path
        } else {
            // `foo.csv` -> `foo.meta.json`
            path.with_file_name(format!(
                "{}.meta.json",
                path.file_stem().unwrap_or_default().to_string_lossy()
            ))
        };
        let meta: DatasetMeta = serde_json::from_reader(std::fs::File::open(&meta_path)?)?;
        let spec = ExperimentSpec::new(
            n,
            names_to_set(&meta.j, n)?,
            names_to_set(&meta.u, n)?,
            names_to_set(&meta.l, n)?,
        )?;
        let mut reader = csv::Reader::from_path(path)?;
        let header: Vec<String> = reader
            .headers()?
            .iter()
            .map(|s| s.to_string())
            .collect();
        let expected: Vec<String> = spec.measured().iter().map(var_name).collect();
        if header != expected {
            return Err(Error::InvalidSpec(format!(
                "csv header {header:?} does not match J ∪ U {expected:?}"
            )));
        }
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for record in reader.records() {
            let record = record?;
            let row: std::result::Result<Vec<f64>, _> =
                record.iter().map(|s| s.parse::<f64>()).collect();
            rows.push(row.map_err(|e| Error::InvalidSpec(format!("bad csv value: {e}")))?);
        }
        if rows.len() != meta.n_samples {
            return Err(Error::InvalidSpec(format!(
                "meta says N={}, csv has {} rows",
                meta.n_samples,
                rows.len()
            )));
        }
        let samples = DMatrix::from_fn(rows.len(), header.len(), |r, c| rows[r][c]);
        Ok(DataSet::from_samples(spec, samples))
    }
}
