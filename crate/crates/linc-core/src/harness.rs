//! Simulation harness: random overlapping experiments, prediction scoring,
//! and the reproducible benchmark over random models.

use std::collections::BTreeMap;
use std::fmt;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    run_bilin, run_ehs, run_heh, run_lininf, AlgorithmConfig, EdgePredictionMatrix, EdgeStatus,
};
use crate::error::Result;
use crate::experiments::{exact_dataset, sample_data, DataSet, ExperimentSpec};
use crate::model::{random_model, LinearCyclicModel, RandomModelConfig};
use crate::par::par_map;
use crate::vars::VarSet;

/// Mix a base seed with salts into a stream-specific seed.
pub fn derive_seed(base: u64, salt_a: u64, salt_b: u64) -> u64 {
    let mut z = base
        .wrapping_add(salt_a.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(salt_b.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Draw `count` random experiments: each variable lands uniformly in
/// J, U or L, resampled until both J and U are nonempty.
pub fn random_experiments(n: usize, count: usize, seed: u64) -> Vec<ExperimentSpec> {
    assert!(n >= 2 && count >= 1);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut j = VarSet::empty();
        let mut u = VarSet::empty();
        let mut l = VarSet::empty();
        for v in 0..n {
            match rng.gen_range(0..3) {
                0 => j = j.with(v),
                1 => u = u.with(v),
                _ => l = l.with(v),
            }
        }
        if j.is_empty() || u.is_empty() {
            continue;
        }
        out.push(ExperimentSpec::new(n, j, u, l).expect("partition by construction"));
    }
    out
}

/// Which algorithms the benchmark runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Ehs,
    Heh,
    Bilin,
    Lininf,
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AlgorithmKind::Ehs => "ehs",
            AlgorithmKind::Heh => "heh",
            AlgorithmKind::Bilin => "bilin",
            AlgorithmKind::Lininf => "lininf",
        };
        write!(f, "{s}")
    }
}

/// Per-experiment sample size; `Infinite` means exact covariances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SampleSize {
    Finite(usize),
    Infinite,
}

impl fmt::Display for SampleSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SampleSize::Finite(n) => write!(f, "{n}"),
            SampleSize::Infinite => write!(f, "infinite"),
        }
    }
}

impl Serialize for SampleSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SampleSize::Finite(n) => s.serialize_u64(*n as u64),
            SampleSize::Infinite => s.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for SampleSize {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let value = serde_json::Value::deserialize(d)?;
        match value {
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|v| SampleSize::Finite(v as usize))
                .ok_or_else(|| D::Error::custom("sample size must be a positive integer")),
            serde_json::Value::String(s) if s == "infinite" => Ok(SampleSize::Infinite),
            other => Err(D::Error::custom(format!(
                "sample size must be an integer or \"infinite\", got {other}"
            ))),
        }
    }
}

/// Benchmark configuration; the defaults are 100 six-variable models with
/// five overlapping experiments each at 1000 / 10000 / infinite samples.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchmarkConfig {
    pub model_count: usize,
    pub n: usize,
    pub edge_prob: f64,
    pub confounder_prob: f64,
    pub coeff_low: f64,
    pub coeff_high: f64,
    pub experiments_per_model: usize,
    pub sample_sizes: Vec<SampleSize>,
    pub algorithms: Vec<AlgorithmKind>,
    pub seed: u64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            model_count: 100,
            n: 6,
            edge_prob: 0.2,
            confounder_prob: 0.15,
            coeff_low: 0.2,
            coeff_high: 0.8,
            experiments_per_model: 5,
            sample_sizes: vec![
                SampleSize::Finite(1000),
                SampleSize::Finite(10_000),
                SampleSize::Infinite,
            ],
            algorithms: vec![
                AlgorithmKind::Ehs,
                AlgorithmKind::Heh,
                AlgorithmKind::Bilin,
                AlgorithmKind::Lininf,
            ],
            seed: 0,
        }
    }
}

impl BenchmarkConfig {
    /// The 20-model configuration used for quick runs and CI.
    pub fn desk_scale() -> Self {
        BenchmarkConfig {
            model_count: 20,
            ..Default::default()
        }
    }

    fn model_config(&self) -> RandomModelConfig {
        RandomModelConfig {
            n: self.n,
            edge_prob: self.edge_prob,
            confounder_prob: self.confounder_prob,
            coeff_low: self.coeff_low,
            coeff_high: self.coeff_high,
        }
    }
}

/// Counts of one prediction matrix against ground truth. Confounding is not
/// part of either count; only the entries of `B` are scored.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionCounts {
    pub correct_absent: usize,
    pub incorrect_absent: usize,
    pub correct_present: usize,
    pub incorrect_present: usize,
    pub unknown: usize,
}

impl PredictionCounts {
    pub fn total(&self) -> usize {
        self.correct_absent
            + self.incorrect_absent
            + self.correct_present
            + self.incorrect_present
            + self.unknown
    }

    pub fn predictions(&self) -> usize {
        self.total() - self.unknown
    }

    fn add(&mut self, other: &PredictionCounts) {
        self.correct_absent += other.correct_absent;
        self.incorrect_absent += other.incorrect_absent;
        self.correct_present += other.correct_present;
        self.incorrect_present += other.incorrect_present;
        self.unknown += other.unknown;
    }
}

/// Score a prediction matrix: an "absent" is correct iff the true
/// coefficient magnitude is below `zero_tol`, a "present" iff it is not.
pub fn evaluate_predictions(
    predictions: &EdgePredictionMatrix,
    truth: &LinearCyclicModel,
    zero_tol: f64,
) -> PredictionCounts {
    assert_eq!(predictions.n(), truth.n());
    let mut counts = PredictionCounts::default();
    for (s, t) in predictions.pairs() {
        let true_absent = truth.direct_effect(s, t).abs() < zero_tol;
        match predictions.get(s, t) {
            EdgeStatus::Unknown => counts.unknown += 1,
            EdgeStatus::Absent => {
                if true_absent {
                    counts.correct_absent += 1;
                } else {
                    counts.incorrect_absent += 1;
                }
            }
            EdgeStatus::Present(_) => {
                if true_absent {
                    counts.incorrect_present += 1;
                } else {
                    counts.correct_present += 1;
                }
            }
        }
    }
    counts
}

/// One benchmark measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    pub model_index: usize,
    pub algorithm: AlgorithmKind,
    pub sample_size: SampleSize,
    pub counts: PredictionCounts,
    pub true_edges: usize,
    pub error: Option<String>,
}

/// Aggregated scores for one (algorithm, sample size) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRow {
    pub algorithm: AlgorithmKind,
    pub sample_size: SampleSize,
    pub counts: PredictionCounts,
    pub percent_correct_absent: Option<f64>,
    pub percent_correct_present: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreTable {
    pub rows: Vec<ScoreRow>,
    pub models_scored: usize,
    pub models_failed: usize,
    pub total_true_edges: usize,
}

impl ScoreTable {
    pub fn row(&self, algorithm: AlgorithmKind, size: SampleSize) -> Option<&ScoreRow> {
        self.rows
            .iter()
            .find(|r| r.algorithm == algorithm && r.sample_size == size)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "algorithm,sample_size,correct_absent,incorrect_absent,correct_present,\
             incorrect_present,unknown,percent_correct_absent,percent_correct_present\n",
        );
        for r in &self.rows {
            let pa = r
                .percent_correct_absent
                .map_or(String::new(), |p| format!("{p:.2}"));
            let pp = r
                .percent_correct_present
                .map_or(String::new(), |p| format!("{p:.2}"));
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.algorithm,
                r.sample_size,
                r.counts.correct_absent,
                r.counts.incorrect_absent,
                r.counts.correct_present,
                r.counts.incorrect_present,
                r.counts.unknown,
                pa,
                pp
            ));
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub config: BenchmarkConfig,
    pub table: ScoreTable,
    pub raw: Vec<RawRecord>,
}

fn run_algorithm(
    kind: AlgorithmKind,
    n: usize,
    datasets: &[DataSet],
    cfg: &AlgorithmConfig,
    seed: u64,
) -> Result<EdgePredictionMatrix> {
    Ok(match kind {
        AlgorithmKind::Ehs => run_ehs(n, datasets, cfg)?.predictions,
        AlgorithmKind::Heh => run_heh(n, datasets, cfg)?.predictions,
        AlgorithmKind::Bilin => run_bilin(n, datasets, cfg, seed)?.predictions,
        AlgorithmKind::Lininf => run_lininf(n, datasets, cfg, seed)?.predictions,
    })
}

/// Run the benchmark: generate models and experiments, simulate every
/// sample size, run every requested algorithm, and aggregate the scores.
/// Fully deterministic given the config (models are processed in parallel
/// with per-model derived seeds and aggregated in index order).
pub fn run_benchmark(config: &BenchmarkConfig) -> Result<BenchReport> {
    let model_cfg = config.model_config();
    let per_model: Vec<Result<Vec<RawRecord>>> =
        par_map((0..config.model_count).collect(), |idx| {
            let model_seed = derive_seed(config.seed, idx as u64, 1);
            let model = random_model(&model_cfg, model_seed)?;
            let true_edges = model.b().iter().filter(|&&v| v != 0.0).count();
            let specs = random_experiments(
                config.n,
                config.experiments_per_model,
                derive_seed(config.seed, idx as u64, 2),
            );
            let mut records = Vec::new();
            for &size in &config.sample_sizes {
                let datasets: Result<Vec<DataSet>> = specs
                    .iter()
                    .enumerate()
                    .map(|(e, spec)| match size {
                        SampleSize::Infinite => exact_dataset(&model, spec),
                        SampleSize::Finite(count) => sample_data(
                            &model,
                            spec,
                            count,
                            derive_seed(config.seed, idx as u64, 1000 + e as u64),
                        ),
                    })
                    .collect();
                let datasets = datasets?;
                let algo_cfg = match size {
                    SampleSize::Infinite => AlgorithmConfig::exact(),
                    SampleSize::Finite(_) => AlgorithmConfig::finite(),
                };
                for &kind in &config.algorithms {
                    let run_seed = derive_seed(config.seed, idx as u64, 5000 + kind as u64);
                    let record = match run_algorithm(kind, config.n, &datasets, &algo_cfg, run_seed)
                    {
                        Ok(predictions) => RawRecord {
                            model_index: idx,
                            algorithm: kind,
                            sample_size: size,
                            counts: evaluate_predictions(&predictions, &model, 1e-9),
                            true_edges,
                            error: None,
                        },
                        Err(e) => RawRecord {
                            model_index: idx,
                            algorithm: kind,
                            sample_size: size,
                            counts: PredictionCounts::default(),
                            true_edges,
                            error: Some(e.to_string()),
                        },
                    };
                    records.push(record);
                }
            }
            Ok(records)
        });

    let mut raw = Vec::new();
    let mut failed_models = 0usize;
    let mut total_true_edges = 0usize;
    let mut seen_models = std::collections::BTreeSet::new();
    for result in per_model {
        match result {
            Ok(records) => {
                for r in &records {
                    if seen_models.insert(r.model_index) {
                        total_true_edges += r.true_edges;
                    }
                }
                raw.extend(records);
            }
            Err(_) => failed_models += 1,
        }
    }
    raw.sort_by_key(|r| (r.model_index, r.algorithm, r.sample_size));

    let mut cells: BTreeMap<(AlgorithmKind, SampleSize), PredictionCounts> = BTreeMap::new();
    let mut cell_errors: BTreeMap<(AlgorithmKind, SampleSize), usize> = BTreeMap::new();
    for r in &raw {
        let key = (r.algorithm, r.sample_size);
        if r.error.is_some() {
            *cell_errors.entry(key).or_default() += 1;
        } else {
            cells.entry(key).or_default().add(&r.counts);
        }
    }
    let rows = cells
        .into_iter()
        .map(|((algorithm, sample_size), counts)| {
            let pct = |correct: usize, incorrect: usize| {
                let reported = correct + incorrect;
                (reported > 0).then(|| 100.0 * correct as f64 / reported as f64)
            };
            ScoreRow {
                algorithm,
                sample_size,
                percent_correct_absent: pct(counts.correct_absent, counts.incorrect_absent),
                percent_correct_present: pct(counts.correct_present, counts.incorrect_present),
                counts,
            }
        })
        .collect();

    Ok(BenchReport {
        config: config.clone(),
        table: ScoreTable {
            rows,
            models_scored: seen_models.len(),
            models_failed: failed_models,
            total_true_edges,
        },
        raw,
    })
}
