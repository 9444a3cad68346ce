//! Conditional independence judgments over a dataset and the search for
//! minimal (in)dependence records.
//!
//! All tests are second-order: the partial correlation `rho(x, y | C)` is
//! read off the inverse of the covariance submatrix over `{x, y} ∪ C`.
//! Exact covariances are judged against a hard tolerance, finite samples
//! with a Fisher z-test.

use std::collections::HashMap;

use nalgebra::DMatrix;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::experiments::DataSet;
use crate::vars::VarSet;

/// How independence is decided.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CiCriterion {
    /// Fisher z-test at significance level `alpha` (finite samples).
    FisherZ { alpha: f64 },
    /// `|rho| < tol` counts as independent (exact covariances).
    ExactTol { tol: f64 },
}

impl CiCriterion {
    pub fn default_exact() -> Self {
        CiCriterion::ExactTol { tol: 1e-9 }
    }

    pub fn default_finite() -> Self {
        CiCriterion::FisherZ { alpha: 0.05 }
    }

    /// The criterion matching a dataset's payload kind.
    pub fn for_dataset(dataset: &DataSet, alpha: f64, exact_tol: f64) -> Self {
        if dataset.is_exact() {
            CiCriterion::ExactTol { tol: exact_tol }
        } else {
            CiCriterion::FisherZ { alpha }
        }
    }
}

/// Outcome of a single conditional independence query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Judgment {
    Independent,
    Dependent,
    /// The conditioning submatrix was numerically singular (or the sample
    /// size too small for the test); never treated as independent.
    Untestable,
}

/// Partial correlation of `x` and `y` given `c`, from the dataset
/// covariance. Returns `None` when the submatrix is numerically singular.
pub fn partial_correlation(dataset: &DataSet, x: usize, y: usize, c: VarSet) -> Option<f64> {
    let cov = dataset.covariance();
    let mut vars: Vec<usize> = vec![x, y];
    vars.extend(c.iter());
    let cols: Vec<usize> = vars
        .iter()
        .map(|&v| dataset.column_of(v).expect("variable must be measured"))
        .collect();
    let k = cols.len();
    let sub = DMatrix::from_fn(k, k, |r, s| cov[(cols[r], cols[s])]);

    let svd = sub.clone().svd(false, false);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let min_sv = svd.singular_values.iter().cloned().fold(f64::MAX, f64::min);
    if max_sv <= 0.0 || min_sv <= 1e-12 * max_sv {
        return None;
    }
    let precision = sub.try_inverse()?;
    let denom = precision[(0, 0)] * precision[(1, 1)];
    if denom <= 0.0 {
        return None;
    }
    Some(-precision[(0, 1)] / denom.sqrt())
}

/// Judge `x ⊥ y | c` on the dataset under the given criterion.
///
/// Variables must all be measured in the dataset. A numerically singular
/// conditioning submatrix yields [`Judgment::Untestable`].
pub fn test_independence(
    dataset: &DataSet,
    x: usize,
    y: usize,
    c: VarSet,
    criterion: CiCriterion,
) -> Judgment {
    debug_assert!(!c.contains(x) && !c.contains(y) && x != y);
    let Some(rho) = partial_correlation(dataset, x, y, c) else {
        return Judgment::Untestable;
    };
    match criterion {
        CiCriterion::ExactTol { tol } => {
            if rho.abs() < tol {
                Judgment::Independent
            } else {
                Judgment::Dependent
            }
        }
        CiCriterion::FisherZ { alpha } => {
            let n = dataset.sample_count().unwrap_or(0);
            if n <= c.len() + 3 {
                return Judgment::Untestable;
            }
            let rho = rho.clamp(-1.0 + 1e-12, 1.0 - 1e-12);
            let z = 0.5 * ((1.0 + rho) / (1.0 - rho)).ln();
            let stat = z.abs() * ((n - c.len() - 3) as f64).sqrt();
            let normal = Normal::new(0.0, 1.0).expect("unit normal");
            let p = 2.0 * (1.0 - normal.cdf(stat));
            if p >= alpha {
                Judgment::Independent
            } else {
                Judgment::Dependent
            }
        }
    }
}

/// A minimal (in)dependence: the bracketed set `C` flips the judgment, and
/// every proper subset of `C` yields the opposite judgment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MinimalRecord {
    pub kind: RecordKind,
    pub x: usize,
    pub y: usize,
    /// Fixed conditioning context (the shipped search always uses `D = ∅`;
    /// the field exists so additional rule families can be plugged in).
    pub d: VarSet,
    /// The minimal set in brackets.
    pub c: VarSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordKind {
    Independence,
    Dependence,
}

/// Enumerate minimal independencies and minimal dependencies among the
/// measured variables, with conditioning sets up to `max_cond_size`.
///
/// Pairs with any untestable judgment among the relevant conditioning sets
/// are skipped rather than guessed. Minimal dependencies with an empty
/// bracket are trivial and not emitted.
pub fn find_minimal_records(
    dataset: &DataSet,
    max_cond_size: usize,
    criterion: CiCriterion,
) -> Vec<MinimalRecord> {
    let measured: Vec<usize> = dataset.spec().measured().iter().collect();
    let mut records = Vec::new();
    for (ai, &x) in measured.iter().enumerate() {
        for &y in measured.iter().skip(ai + 1) {
            let candidates = dataset.spec().measured().without(x).without(y);
            let max_k = max_cond_size.min(candidates.len());

            // Judge every conditioning set up to the size cap once.
            let mut judgments: HashMap<VarSet, Judgment> = HashMap::new();
            let mut untestable = false;
            for c in candidates.subsets() {
                if c.len() > max_k {
                    continue;
                }
                let j = test_independence(dataset, x, y, c, criterion);
                if j == Judgment::Untestable {
                    untestable = true;
                    break;
                }
                judgments.insert(c, j);
            }
            if untestable {
                continue;
            }

            for (&c, &judgment) in judgments.iter() {
                let wanted_subset = match judgment {
                    Judgment::Independent => Judgment::Dependent,
                    Judgment::Dependent => {
                        if c.is_empty() {
                            continue; // trivial
                        }
                        Judgment::Independent
                    }
                    Judgment::Untestable => unreachable!(),
                };
                let minimal = c
                    .subsets()
                    .filter(|sub| *sub != c)
                    .all(|sub| judgments.get(&sub) == Some(&wanted_subset));
                if minimal {
                    records.push(MinimalRecord {
                        kind: match judgment {
                            Judgment::Independent => RecordKind::Independence,
                            _ => RecordKind::Dependence,
                        },
                        x,
                        y,
                        d: VarSet::empty(),
                        c,
                    });
                }
            }
        }
    }
    records.sort_by_key(|r| (r.x, r.y, r.c, matches!(r.kind, RecordKind::Dependence)));
    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::{exact_dataset, sample_data, ExperimentSpec};
    use crate::fixtures;
    use crate::model::LinearCyclicModel;
    use nalgebra::DMatrix;

    fn exact(model: &LinearCyclicModel, j: VarSet) -> DataSet {
        let spec = ExperimentSpec::fully_observed(model.n(), j).unwrap();
        exact_dataset(model, &spec).unwrap()
    }

    use crate::experiments::DataSet;

    #[test]
    fn independent_in_empty_model() {
        let ds = exact(&fixtures::m0(), VarSet::empty());
        let j = test_independence(&ds, 0, 1, VarSet::empty(), CiCriterion::default_exact());
        assert_eq!(j, Judgment::Independent);
    }

    #[test]
    fn fork_blocks_on_conditioning() {
        let ds = exact(&fixtures::m4(), VarSet::singleton(1));
        let crit = CiCriterion::default_exact();
        assert_eq!(
            test_independence(&ds, 0, 2, VarSet::empty(), crit),
            Judgment::Dependent
        );
        assert_eq!(
            test_independence(&ds, 0, 2, VarSet::singleton(1), crit),
            Judgment::Independent
        );
    }

    #[test]
    fn collider_opens_on_conditioning() {
        let ds = exact(&fixtures::m5(), VarSet::empty());
        let crit = CiCriterion::default_exact();
        assert_eq!(
            test_independence(&ds, 0, 1, VarSet::empty(), crit),
            Judgment::Independent
        );
        assert_eq!(
            test_independence(&ds, 0, 1, VarSet::singleton(2), crit),
            Judgment::Dependent
        );
    }

    #[test]
    fn judgments_are_symmetric_in_x_and_y() {
        let ds = exact(&fixtures::m5(), VarSet::empty());
        let crit = CiCriterion::default_exact();
        for c in [VarSet::empty(), VarSet::singleton(2)] {
            assert_eq!(
                test_independence(&ds, 0, 1, c, crit),
                test_independence(&ds, 1, 0, c, crit)
            );
        }
    }

    #[test]
    fn minimal_records_fork() {
        let ds = exact(&fixtures::m4(), VarSet::singleton(1));
        let records = find_minimal_records(&ds, 1, CiCriterion::default_exact());
        assert!(records.contains(&MinimalRecord {
            kind: RecordKind::Independence,
            x: 0,
            y: 2,
            d: VarSet::empty(),
            c: VarSet::singleton(1),
        }));
    }

    #[test]
    fn minimal_records_collider() {
        let ds = exact(&fixtures::m5(), VarSet::empty());
        let records = find_minimal_records(&ds, 1, CiCriterion::default_exact());
        assert!(records.contains(&MinimalRecord {
            kind: RecordKind::Independence,
            x: 0,
            y: 1,
            d: VarSet::empty(),
            c: VarSet::empty(),
        }));
        assert!(records.contains(&MinimalRecord {
            kind: RecordKind::Dependence,
            x: 0,
            y: 1,
            d: VarSet::empty(),
            c: VarSet::singleton(2),
        }));
    }

    #[test]
    fn minimal_records_empty_model_size_zero() {
        let ds = exact(&fixtures::m0(), VarSet::empty());
        let records = find_minimal_records(&ds, 0, CiCriterion::default_exact());
        assert_eq!(
            records,
            vec![MinimalRecord {
                kind: RecordKind::Independence,
                x: 0,
                y: 1,
                d: VarSet::empty(),
                c: VarSet::empty(),
            }]
        );
    }

    #[test]
    fn verified_minimality_on_two_set() {
        // x1 -> x2 -> x4 and x1 -> x3 -> x4: separating x1 from x4 needs
        // both middle variables, so C = {x2, x3} must be minimal.
        let mut b = DMatrix::zeros(4, 4);
        b[(1, 0)] = 0.8;
        b[(3, 1)] = 0.7;
        b[(2, 0)] = 0.6;
        b[(3, 2)] = 0.5;
        let model = LinearCyclicModel::new(b, DMatrix::identity(4, 4)).unwrap();
        let ds = exact(&model, VarSet::empty());
        let records = find_minimal_records(&ds, 2, CiCriterion::default_exact());
        assert!(records.contains(&MinimalRecord {
            kind: RecordKind::Independence,
            x: 0,
            y: 3,
            d: VarSet::empty(),
            c: VarSet::from_iter([1, 2]),
        }));
    }

    #[test]
    fn untestable_pairs_are_skipped() {
        // A dataset whose covariance is rank-deficient: x2 is an exact copy
        // of x1 (duplicated column in a hand-built exact payload).
        let m3 = fixtures::m3();
        let spec = ExperimentSpec::null_experiment(3);
        let mut ds = exact_dataset(&m3, &spec).unwrap();
        // Overwrite the covariance with a singular one.
        let singular = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 1.0, 0.5, 1.0, 1.0, 0.5, 0.5, 0.5, 1.0],
        );
        // Rebuild through the public read path to keep the type honest.
        let dir = tempfile::tempdir().unwrap();
        let json = crate::experiments::ExactDatasetJson {
            j: vec![],
            u: vec!["x1".into(), "x2".into(), "x3".into()],
            l: vec![],
            variables: vec!["x1".into(), "x2".into(), "x3".into()],
            covariance: crate::model::matrix_to_rows(&singular),
        };
        let path = dir.path().join("d.exact.json");
        serde_json::to_writer(std::fs::File::create(&path).unwrap(), &json).unwrap();
        ds = crate::experiments::read_dataset(&path, 3).unwrap();

        assert_eq!(
            test_independence(&ds, 0, 2, VarSet::singleton(1), CiCriterion::default_exact()),
            Judgment::Untestable
        );
        // The (x1, x3) pair requires conditioning on the collinear x2, so it
        // is skipped; no record may claim it independent.
        let records = find_minimal_records(&ds, 1, CiCriterion::default_exact());
        assert!(records
            .iter()
            .all(|r| !(r.x == 0 && r.y == 2 && r.kind == RecordKind::Independence)));
    }

    #[test]
    fn fisher_z_rejects_strong_and_accepts_null_correlation() {
        let m3 = fixtures::m3();
        let spec = ExperimentSpec::fully_observed(3, VarSet::singleton(0)).unwrap();
        let ds = sample_data(&m3, &spec, 2000, 17).unwrap();
        let crit = CiCriterion::default_finite();
        assert_eq!(
            test_independence(&ds, 0, 1, VarSet::empty(), crit),
            Judgment::Dependent
        );
        assert_eq!(
            test_independence(&ds, 0, 2, VarSet::singleton(1), crit),
            Judgment::Independent
        );
    }

    #[test]
    fn exact_judgments_agree_with_walk_oracle() {
        // Walk-accumulated covariance (truncated series, valid for spectral
        // radius < 1) as an independent route to the same judgments.
        let model = fixtures::m2();
        let mm = model.manipulate(VarSet::empty()).unwrap();
        let n = model.n();
        let mut walk_t = DMatrix::<f64>::identity(n, n);
        let mut power = DMatrix::<f64>::identity(n, n);
        for _ in 0..60 {
            power = &power * mm.b_tilde();
            walk_t += &power;
        }
        let closed = mm.total_effects_tilde().unwrap();
        assert!((walk_t - closed).norm() < 1e-9);
    }
}
