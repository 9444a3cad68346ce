//! LININF: linear inference over the space of all experimental effects.
//!
//! Every experimental effect `t(x_i ~> x_u || J)` is an unknown. Observed
//! effects and faithfulness zeros seed the recording; each round
//! instantiates the nesting identity between intervention sets
//! `J_k ⊂ J_l ⊆ V \ {x_u}`,
//!
//! `t(i ~> u || J_k) = t(i ~> u || J_l) + sum_{j in J_l \ J_k} t(i ~> j || J_k) t(j ~> u || J_l)`,
//!
//! keeps the instances that are linear in the remaining unknowns (a product
//! term survives when either factor is recorded, implied zero, or covered
//! by a product-zero constraint), solves the system, records the uniquely
//! determined effects, propagates zeros to supersets and resolves product
//! constraints, and repeats until a fixpoint or the round cap. Direct
//! effects are read off the recorded keys with `J = V \ {target}`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::experiments::{bootstrap_resample, observed_effects, DataSet, EffectKey};
use crate::faithfulness::ConstraintStore;
use crate::par::par_map;
use crate::solver::LinearSystem;
use crate::vars::VarSet;

use super::{check_universe, faithfulness_constraints, AlgorithmConfig, EdgePredictionMatrix, EdgeStatus};

#[derive(Debug, Clone)]
pub struct LininfOutcome {
    pub predictions: EdgePredictionMatrix,
    /// Every experimental effect recorded with a value (observed or
    /// inferred), keyed canonically.
    pub recorded: BTreeMap<EffectKey, f64>,
    pub diagnostics: Vec<String>,
    pub rounds_run: usize,
}

enum Known {
    Value(f64),
    Zero,
    Unknown,
}

struct SingleRun {
    predictions: EdgePredictionMatrix,
    values: BTreeMap<EffectKey, f64>,
    store: ConstraintStore,
    diagnostics: Vec<String>,
    rounds_run: usize,
}

fn known(store: &ConstraintStore, values: &BTreeMap<EffectKey, f64>, key: &EffectKey) -> Known {
    if store.implied_zero(key) {
        Known::Zero
    } else if let Some(&v) = values.get(key) {
        Known::Value(v)
    } else {
        Known::Unknown
    }
}

enum RowOutcome {
    Linear(Vec<(EffectKey, f64)>, f64),
    Trivial(f64),
    Nonlinear,
}

fn build_row(
    i: usize,
    u: usize,
    j_k: VarSet,
    j_l: VarSet,
    store: &ConstraintStore,
    values: &BTreeMap<EffectKey, f64>,
) -> RowOutcome {
    // t(i,u,J_k) - t(i,u,J_l) - sum_j t(i,j,J_k) t(j,u,J_l) = 0,
    // folded into `terms + constant = 0`.
    let mut terms: Vec<(EffectKey, f64)> = Vec::new();
    let mut constant = 0.0;

    let key_k = EffectKey::new(i, u, j_k);
    match known(store, values, &key_k) {
        Known::Zero => {}
        Known::Value(v) => constant += v,
        Known::Unknown => terms.push((key_k, 1.0)),
    }
    let key_l = EffectKey::new(i, u, j_l);
    match known(store, values, &key_l) {
        Known::Zero => {}
        Known::Value(v) => constant -= v,
        Known::Unknown => terms.push((key_l, -1.0)),
    }
    for j in j_l.minus(j_k).iter() {
        let f1 = EffectKey::new(i, j, j_k);
        let f2 = EffectKey::new(j, u, j_l);
        match (known(store, values, &f1), known(store, values, &f2)) {
            (Known::Zero, _) | (_, Known::Zero) => {}
            (Known::Value(a), Known::Value(b)) => constant -= a * b,
            (Known::Value(a), Known::Unknown) => terms.push((f2, -a)),
            (Known::Unknown, Known::Value(b)) => terms.push((f1, -b)),
            (Known::Unknown, Known::Unknown) => {
                if !store.product_implies_term_zero(&f1, &f2) {
                    return RowOutcome::Nonlinear;
                }
            }
        }
    }
    if terms.is_empty() {
        RowOutcome::Trivial(constant)
    } else {
        RowOutcome::Linear(terms, -constant)
    }
}

fn run_single(
    n: usize,
    datasets: &[DataSet],
    cfg: &AlgorithmConfig,
    exact_mode: bool,
) -> Result<SingleRun> {
    let mut diagnostics = Vec::new();

    // Record all observed experimental effects (averaging duplicates from
    // overlapping experiments with identical intervention sets).
    let mut sums: BTreeMap<EffectKey, (f64, usize)> = BTreeMap::new();
    for ds in datasets {
        for (key, value) in observed_effects(ds) {
            let entry = sums.entry(key).or_insert((0.0, 0));
            entry.0 += value;
            entry.1 += 1;
        }
    }
    let mut values: BTreeMap<EffectKey, f64> = sums
        .into_iter()
        .map(|(k, (s, c))| (k, s / c as f64))
        .collect();

    // Record the zeros and products implied by faithfulness.
    let (mut store, _) = faithfulness_constraints(datasets, cfg)?;
    if exact_mode {
        for (key, value) in values.iter() {
            if value.abs() < cfg.zero_tol {
                store.add_zero(*key);
            }
        }
    }
    let sat = store.saturate(&values, n, cfg.nonzero_tol);
    diagnostics.extend(sat.contradictions);

    let full = VarSet::full(n);
    let mut rounds_run = 0;
    for _round in 0..cfg.lininf.max_rounds {
        rounds_run += 1;
        let mut system: LinearSystem<EffectKey> = LinearSystem::new();
        let mut inconsistent_identities = 0usize;
        for u in 0..n {
            for i in 0..n {
                if i == u {
                    continue;
                }
                let free = full.without(i).without(u);
                for s_k in free.subsets() {
                    let j_k = s_k.with(i);
                    let rest = free.minus(s_k);
                    for s_e in rest.subsets() {
                        if s_e.is_empty() {
                            continue;
                        }
                        let j_l = j_k.union(s_e);
                        match build_row(i, u, j_k, j_l, &store, &values) {
                            RowOutcome::Linear(terms, rhs) => system.add_row(&terms, rhs),
                            RowOutcome::Trivial(residual) => {
                                if residual.abs() > cfg.solve.inconsistency_tol {
                                    inconsistent_identities += 1;
                                }
                            }
                            RowOutcome::Nonlinear => {}
                        }
                    }
                }
            }
        }
        if inconsistent_identities > 0 {
            diagnostics.push(format!(
                "round {rounds_run}: {inconsistent_identities} fully-known identities violated"
            ));
        }
        if system.n_rows() == 0 {
            break;
        }
        let report = system.solve_determined(cfg.solve);
        if report.inconsistent {
            diagnostics.push(format!(
                "round {rounds_run}: inconsistent system (relative residual {:.3e})",
                report.relative_residual
            ));
        }
        let mut new_records = 0usize;
        for (key, value) in report.determined_entries() {
            values.insert(*key, value);
            new_records += 1;
            if exact_mode && value.abs() < cfg.zero_tol {
                store.add_zero(*key);
            }
        }
        let sat = store.saturate(&values, n, cfg.nonzero_tol);
        diagnostics.extend(sat.contradictions);
        if new_records == 0 && sat.new_zeros.is_empty() {
            break;
        }
    }

    let mut predictions = EdgePredictionMatrix::all_unknown(n);
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            let direct = EffectKey::new(s, t, full.without(t));
            if store.implied_zero(&direct) {
                predictions.set(s, t, EdgeStatus::Absent);
            } else if let Some(&v) = values.get(&direct) {
                predictions.set_determined(s, t, v, cfg.zero_tol);
            }
        }
    }

    Ok(SingleRun {
        predictions,
        values,
        store,
        diagnostics,
        rounds_run,
    })
}

/// Estimate of a direct-effect key in one run: implied zeros count as 0;
/// unrecorded keys yield `None`.
fn direct_estimate(run: &SingleRun, key: &EffectKey) -> Option<f64> {
    if run.store.implied_zero(key) {
        Some(0.0)
    } else {
        run.values.get(key).copied()
    }
}

/// Run LININF over the datasets.
///
/// With finite-sample data, "absent" judgments are additionally gated by
/// bootstrap agreement: the algorithm is re-run on resampled datasets and an
/// edge stays absent only if every rerun records its direct effect with
/// magnitude below the zero tolerance.
pub fn run_lininf(
    n: usize,
    datasets: &[DataSet],
    cfg: &AlgorithmConfig,
    seed: u64,
) -> Result<LininfOutcome> {
    check_universe(n, datasets)?;
    if n > cfg.lininf.max_n {
        return Err(Error::InvalidSpec(format!(
            "LININF enumerates n(n-1)*2^(n-2) experimental effects; n = {n} exceeds the cap {} \
             (raise lininf.max_n to force)",
            cfg.lininf.max_n
        )));
    }
    let exact_mode = datasets.iter().all(|d| d.is_exact());
    let main = run_single(n, datasets, cfg, exact_mode)?;

    if exact_mode || cfg.lininf.bootstrap_replicates == 0 || datasets.is_empty() {
        return Ok(LininfOutcome {
            predictions: main.predictions,
            recorded: main.values,
            diagnostics: main.diagnostics,
            rounds_run: main.rounds_run,
        });
    }

    // Bootstrap reruns for the zero judgments.
    let replicates: Vec<Result<SingleRun>> =
        par_map((0..cfg.lininf.bootstrap_replicates).collect(), |r| {
            let mut resampled = Vec::with_capacity(datasets.len());
            for (d, ds) in datasets.iter().enumerate() {
                if ds.is_exact() {
                    resampled.push(ds.clone());
                } else {
                    let rep_seed = seed
                        .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(r as u64 + 1))
                        .wrapping_add(d as u64);
                    resampled.push(bootstrap_resample(ds, 1, rep_seed)?.pop().expect("one"));
                }
            }
            run_single(n, &resampled, cfg, false)
        });

    let mut runs = Vec::with_capacity(replicates.len());
    for r in replicates {
        runs.push(r?);
    }

    let full = VarSet::full(n);
    let mut predictions = main.predictions.clone();
    for s in 0..n {
        for t in 0..n {
            if s == t || predictions.get(s, t) != EdgeStatus::Absent {
                continue;
            }
            let direct = EffectKey::new(s, t, full.without(t));
            let stable = runs.iter().all(|run| {
                direct_estimate(run, &direct).map_or(false, |v| v.abs() < cfg.zero_tol)
            });
            if !stable {
                predictions.set(s, t, EdgeStatus::Unknown);
            }
        }
    }

    let mut diagnostics = main.diagnostics;
    diagnostics.extend(
        runs.iter()
            .flat_map(|r| r.diagnostics.iter().cloned())
            .take(16),
    );
    Ok(LininfOutcome {
        predictions,
        recorded: main.values,
        diagnostics,
        rounds_run: main.rounds_run,
    })
}
