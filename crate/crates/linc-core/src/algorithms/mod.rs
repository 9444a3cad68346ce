//! The four discovery algorithms: EHS, HEH, BILIN and LININF.
//!
//! Each maps a collection of overlapping datasets to an
//! [`EdgePredictionMatrix`] answering, for every ordered pair, whether the
//! direct effect is present (with a value), absent, or unknown.

mod bilin;
mod ehs;
mod heh;
mod lininf;

pub use bilin::{bilin_objective, run_bilin, BilinOutcome};
pub use ehs::{run_ehs, EhsOutcome};
pub use heh::{run_heh, HehOutcome};
pub use lininf::{run_lininf, LininfOutcome};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::DataSet;
use crate::faithfulness::{derive_constraints, ConstraintStore, ZeroConstraint};
use crate::independence::{find_minimal_records, CiCriterion};
use crate::solver::SolveOptions;
use crate::vars::var_name;

/// Status of one ordered pair in an algorithm's output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EdgeStatus {
    /// Identified with a concrete value estimate.
    Present(f64),
    Absent,
    Unknown,
}

impl EdgeStatus {
    pub fn is_unknown(&self) -> bool {
        matches!(self, EdgeStatus::Unknown)
    }
}

/// Per ordered pair `(source -> target)`, one of present / absent / unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgePredictionMatrix {
    n: usize,
    statuses: Vec<EdgeStatus>,
}

impl EdgePredictionMatrix {
    pub fn all_unknown(n: usize) -> Self {
        EdgePredictionMatrix {
            n,
            statuses: vec![EdgeStatus::Unknown; n * n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, source: usize, target: usize) -> EdgeStatus {
        self.statuses[source * self.n + target]
    }

    pub fn set(&mut self, source: usize, target: usize, status: EdgeStatus) {
        assert_ne!(source, target, "diagonal entries carry no status");
        if let EdgeStatus::Present(v) = status {
            assert!(v.is_finite() && v != 0.0, "present requires a nonzero value");
        }
        self.statuses[source * self.n + target] = status;
    }

    /// Classify a determined value against the zero tolerance.
    pub fn set_determined(&mut self, source: usize, target: usize, value: f64, zero_tol: f64) {
        if value.abs() < zero_tol {
            self.set(source, target, EdgeStatus::Absent);
        } else {
            self.set(source, target, EdgeStatus::Present(value));
        }
    }

    /// Ordered pairs, diagonal excluded.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.n;
        (0..n).flat_map(move |s| (0..n).filter(move |&t| t != s).map(move |t| (s, t)))
    }

    pub fn count_unknown(&self) -> usize {
        self.pairs()
            .filter(|&(s, t)| self.get(s, t).is_unknown())
            .count()
    }

    pub fn count_predictions(&self) -> usize {
        self.n * (self.n - 1) - self.count_unknown()
    }

    pub fn to_json(&self) -> PredictionJson {
        PredictionJson {
            n: self.n,
            edges: self
                .pairs()
                .map(|(s, t)| {
                    let (status, value) = match self.get(s, t) {
                        EdgeStatus::Present(v) => ("present", Some(v)),
                        EdgeStatus::Absent => ("absent", None),
                        EdgeStatus::Unknown => ("unknown", None),
                    };
                    EdgeJson {
                        from: var_name(s),
                        to: var_name(t),
                        status: status.to_string(),
                        value,
                    }
                })
                .collect(),
        }
    }
}

/// Serialized prediction matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionJson {
    pub n: usize,
    pub edges: Vec<EdgeJson>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeJson {
    pub from: String,
    pub to: String,
    pub status: String,
    pub value: Option<f64>,
}

impl PredictionJson {
    pub fn into_matrix(&self) -> Result<EdgePredictionMatrix> {
        let mut m = EdgePredictionMatrix::all_unknown(self.n);
        for e in &self.edges {
            let s = crate::vars::parse_var(&e.from, self.n)?;
            let t = crate::vars::parse_var(&e.to, self.n)?;
            let status = match e.status.as_str() {
                "present" => EdgeStatus::Present(e.value.ok_or_else(|| {
                    Error::InvalidSpec(format!("present edge {}->{} without value", e.from, e.to))
                })?),
                "absent" => EdgeStatus::Absent,
                "unknown" => EdgeStatus::Unknown,
                other => {
                    return Err(Error::InvalidSpec(format!("unknown edge status {other:?}")))
                }
            };
            m.set(s, t, status);
        }
        Ok(m)
    }
}

/// Tolerances and knobs shared by the algorithms.
#[derive(Debug, Clone)]
pub struct AlgorithmConfig {
    /// Determined magnitudes below this count as "absent".
    pub zero_tol: f64,
    /// A recorded magnitude above this counts as "known nonzero" when
    /// resolving product constraints.
    pub nonzero_tol: f64,
    pub solve: SolveOptions,
    /// Significance level for finite-sample independence tests.
    pub alpha: f64,
    /// Partial-correlation tolerance for exact-covariance independence.
    pub exact_ci_tol: f64,
    /// Conditioning-set cap for the minimal-record search; `None` means
    /// unbounded (up to observed - 2).
    pub max_cond_size: Option<usize>,
    pub bilin: BilinConfig,
    pub lininf: LininfConfig,
}

#[derive(Debug, Clone)]
pub struct BilinConfig {
    pub restarts: usize,
    pub max_sweeps: usize,
    pub convergence_tol: f64,
    /// An entry of `B` is determined when its variance across converged
    /// restarts stays below this.
    pub variance_tol: f64,
}

#[derive(Debug, Clone)]
pub struct LininfConfig {
    pub max_rounds: usize,
    pub bootstrap_replicates: usize,
    /// Refuse the `2^(n-2)`-sized effect enumeration beyond this many
    /// variables.
    pub max_n: usize,
}

impl AlgorithmConfig {
    /// Defaults for exact (infinite-sample) inputs.
    pub fn exact() -> Self {
        AlgorithmConfig {
            zero_tol: 1e-7,
            nonzero_tol: 1e-6,
            solve: SolveOptions::exact(),
            alpha: 0.05,
            exact_ci_tol: 1e-9,
            max_cond_size: None,
            bilin: BilinConfig {
                restarts: 20,
                max_sweeps: 500,
                convergence_tol: 1e-10,
                variance_tol: 1e-6,
            },
            lininf: LininfConfig {
                max_rounds: 16,
                bootstrap_replicates: 10,
                max_n: 8,
            },
        }
    }

    /// Defaults for finite-sample inputs.
    pub fn finite() -> Self {
        AlgorithmConfig {
            zero_tol: 0.05,
            nonzero_tol: 0.05,
            solve: SolveOptions::finite(),
            alpha: 0.05,
            exact_ci_tol: 1e-9,
            max_cond_size: Some(1),
            bilin: BilinConfig {
                restarts: 20,
                max_sweeps: 500,
                convergence_tol: 1e-10,
                variance_tol: 1e-3,
            },
            lininf: LininfConfig {
                max_rounds: 1,
                bootstrap_replicates: 10,
                max_n: 8,
            },
        }
    }

    /// Defaults matching the payload kind of the given datasets.
    pub fn for_datasets(datasets: &[DataSet]) -> Self {
        if datasets.iter().all(|d| d.is_exact()) {
            Self::exact()
        } else {
            Self::finite()
        }
    }

    pub(crate) fn ci_criterion(&self, dataset: &DataSet) -> CiCriterion {
        CiCriterion::for_dataset(dataset, self.alpha, self.exact_ci_tol)
    }

    pub(crate) fn cond_cap(&self, dataset: &DataSet) -> usize {
        let observed = dataset.spec().measured().len();
        let hard = observed.saturating_sub(2);
        self.max_cond_size.map_or(hard, |c| c.min(hard))
    }
}

/// Validate that all datasets share the `n`-variable universe.
pub(crate) fn check_universe(n: usize, datasets: &[DataSet]) -> Result<()> {
    for ds in datasets {
        if ds.spec().n() != n {
            return Err(Error::UniverseMismatch(format!(
                "dataset over {} variables, expected {n}",
                ds.spec().n()
            )));
        }
    }
    Ok(())
}

/// Run the faithfulness pipeline over every dataset and collect the
/// constraints into one store (plus the raw constraint list for audit).
pub(crate) fn faithfulness_constraints(
    datasets: &[DataSet],
    cfg: &AlgorithmConfig,
) -> Result<(ConstraintStore, Vec<ZeroConstraint>)> {
    let mut store = ConstraintStore::new();
    let mut all = Vec::new();
    for ds in datasets {
        let records = find_minimal_records(ds, cfg.cond_cap(ds), cfg.ci_criterion(ds));
        let constraints = derive_constraints(&records, ds.spec())?;
        store.add_constraints(&constraints);
        all.extend(constraints);
    }
    Ok((store, all))
}

/// The faithfulness constraints the algorithms would derive from these
/// datasets, for audit dumps.
pub fn dump_constraints(
    datasets: &[DataSet],
    cfg: &AlgorithmConfig,
) -> Result<Vec<ZeroConstraint>> {
    faithfulness_constraints(datasets, cfg).map(|(_, all)| all)
}
