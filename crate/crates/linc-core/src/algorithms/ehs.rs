//! EHS: the faithfulness-free baseline. Linear constraints on total effects
//! are collected from every dataset, solved in the least-squares sense, and
//! the direct-effects matrix is recovered only when every total effect is
//! uniquely determined.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::experiments::{observed_effects, DataSet, EffectKey};
use crate::model::stable_inverse;
use crate::solver::{LinearSystem, SolveReport};
use crate::vars::VarSet;

use super::{check_universe, AlgorithmConfig, EdgePredictionMatrix};

/// Result of an EHS run. The solve report exposes which total effects were
/// determined even when full recovery was impossible.
#[derive(Debug, Clone)]
pub struct EhsOutcome {
    pub predictions: EdgePredictionMatrix,
    /// Unknowns are ordered pairs `(source, target)` standing for the total
    /// effect `t(source ~> target)`.
    pub report: SolveReport<(usize, usize)>,
    pub fully_determined: bool,
}

/// Run EHS over the datasets.
///
/// For each dataset and each intervened `x_i`, observed `x_u`, one linear
/// row ties the unknown total effects to the observed experimental effects:
/// `t(i ~> u) - sum_{j in J \ {i}} t(j ~> u || J) * t(i ~> j) = t(i ~> u || J)`.
///
/// If all `n(n-1)` total effects come out determined, the direct effects are
/// read off the inverse of the total-effects matrix (rows normalized by
/// their diagonal entry, which removes the self-cycle scale that plain
/// inversion would misattribute on cyclic graphs). Otherwise only directly
/// observed direct effects (datasets with `J = V \ {u}`) receive a status.
pub fn run_ehs(
    n: usize,
    datasets: &[DataSet],
    cfg: &AlgorithmConfig,
) -> Result<EhsOutcome> {
    check_universe(n, datasets)?;
    let mut system: LinearSystem<(usize, usize)> = LinearSystem::new();
    for s in 0..n {
        for t in 0..n {
            if s != t {
                system.register((s, t));
            }
        }
    }

    for ds in datasets {
        let effects = observed_effects(ds);
        let j_set = ds.spec().intervened();
        for i in j_set.iter() {
            for u in ds.spec().observed().iter() {
                let mut terms: Vec<((usize, usize), f64)> = vec![((i, u), 1.0)];
                for j in j_set.iter() {
                    if j == i {
                        continue;
                    }
                    let coeff = effects[&EffectKey::new(j, u, j_set)];
                    terms.push(((i, j), -coeff));
                }
                let rhs = effects[&EffectKey::new(i, u, j_set)];
                system.add_row(&terms, rhs);
            }
        }
    }

    let report = system.solve_determined(cfg.solve);
    let mut predictions = EdgePredictionMatrix::all_unknown(n);
    let fully_determined = report.all_determined() && n >= 2;

    if fully_determined {
        // Total-effects matrix with unit diagonal.
        let mut t_hat = DMatrix::<f64>::identity(n, n);
        for s in 0..n {
            for t in 0..n {
                if s != t {
                    t_hat[(t, s)] = report.value(&(s, t)).expect("registered");
                }
            }
        }
        match stable_inverse(&t_hat, VarSet::empty()) {
            Ok(m) => {
                for u in 0..n {
                    for i in 0..n {
                        if i == u {
                            continue;
                        }
                        let b = -m[(u, i)] / m[(u, u)];
                        predictions.set_determined(i, u, b, cfg.zero_tol);
                    }
                }
                return Ok(EhsOutcome {
                    predictions,
                    report,
                    fully_determined: true,
                });
            }
            Err(_) => {
                // Degenerate estimate: fall through to the conservative path.
            }
        }
    }

    // Partial identification: only directly observed direct effects.
    for ds in datasets {
        let spec = ds.spec();
        for u in spec.observed().iter() {
            if spec.intervened() != VarSet::full(n).without(u) {
                continue;
            }
            let effects = observed_effects(ds);
            for i in spec.intervened().iter() {
                let value = effects[&EffectKey::new(i, u, spec.intervened())];
                predictions.set_determined(i, u, value, cfg.zero_tol);
            }
        }
    }

    Ok(EhsOutcome {
        predictions,
        report,
        fully_determined: false,
    })
}
