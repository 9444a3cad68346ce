//! Pair-condition analysis and experiment planning.
//!
//! A set of experiments identifies the full model exactly when every ordered
//! pair `(x_i, x_j)` has some experiment intervening on `x_i` while
//! observing (not hiding) `x_j`. The planner completes a given collection of
//! experiments using antichain intervention sets, whose minimal count is
//! governed by the central binomial bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::ExperimentSpec;
use crate::vars::{var_name, VarSet};

/// Boolean matrix: entry `(i, j)` is true iff some experiment intervenes on
/// `x_i` and observes `x_j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairConditionMatrix {
    n: usize,
    covered: Vec<bool>,
}

impl PairConditionMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_covered(&self, source: usize, target: usize) -> bool {
        self.covered[source * self.n + target]
    }

    /// Ordered pairs not yet covered.
    pub fn missing_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && !self.is_covered(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn all_covered(&self) -> bool {
        self.missing_pairs().is_empty()
    }
}

/// Compute the pair-condition matrix of a collection of experiments.
pub fn pair_condition_matrix(specs: &[ExperimentSpec]) -> Result<PairConditionMatrix> {
    let n = specs
        .first()
        .map(|s| s.n())
        .ok_or_else(|| Error::InvalidSpec("no experiments given".into()))?;
    if let Some(bad) = specs.iter().find(|s| s.n() != n) {
        return Err(Error::UniverseMismatch(format!(
            "experiment over {} variables among experiments over {n}",
            bad.n()
        )));
    }
    let mut covered = vec![false; n * n];
    for spec in specs {
        for i in spec.intervened().iter() {
            for j in spec.observed().iter() {
                covered[i * n + j] = true;
            }
        }
    }
    Ok(PairConditionMatrix { n, covered })
}

/// Full identifiability check: true iff the pair condition holds for every
/// ordered pair; otherwise the missing pairs (each genuinely ambiguous in
/// the worst case) are returned.
pub fn is_fully_identifiable(specs: &[ExperimentSpec], n: usize) -> (bool, Vec<(usize, usize)>) {
    if specs.is_empty() {
        let mut missing = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    missing.push((i, j));
                }
            }
        }
        return (missing.is_empty(), missing);
    }
    match pair_condition_matrix(specs) {
        Ok(matrix) => {
            let missing = matrix.missing_pairs();
            (missing.is_empty(), missing)
        }
        Err(_) => (false, Vec::new()),
    }
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u64 = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// Smallest `K` such that `C(K, floor(K/2)) >= n`: the minimal number of
/// specifically chosen experiments that satisfies the pair condition for `n`
/// variables. By convention `n = 1` needs no experiments.
pub fn spencer_min_experiments(n: usize) -> usize {
    assert!(n >= 1);
    if n == 1 {
        return 0;
    }
    let mut k = 1u64;
    loop {
        if binomial(k, k / 2) >= n as u64 {
            return k as usize;
        }
        k += 1;
    }
}

/// Candidate intervention sets from the antichain construction: variable `v`
/// is assigned the `v`-th size-`floor(K/2)` subset of `{0..K-1}` (in
/// ascending bitmask order), and candidate experiment `t` intervenes on the
/// variables whose subset contains `t`.
fn antichain_candidates(n: usize) -> Vec<VarSet> {
    let k = spencer_min_experiments(n);
    if k == 0 {
        return Vec::new();
    }
    let half = k / 2;
    let mut assignments = Vec::with_capacity(n);
    let mut mask: u32 = 0;
    while assignments.len() < n {
        if mask >= (1u32 << k) {
            break;
        }
        if mask.count_ones() as usize == half {
            assignments.push(VarSet::from_bits(mask));
        }
        mask += 1;
    }
    (0..k)
        .map(|t| {
            assignments
                .iter()
                .enumerate()
                .filter(|(_, s)| s.contains(t))
                .map(|(v, _)| v)
                .collect()
        })
        .collect()
}

/// Plan additional fully observed experiments so the union with `existing`
/// satisfies the pair condition for all ordered pairs.
///
/// Greedy cover over the antichain candidates plus all singletons; ties are
/// broken toward the lexicographically smallest intervention set. The
/// result is verified before returning.
pub fn plan_experiments(n: usize, existing: &[ExperimentSpec]) -> Result<Vec<ExperimentSpec>> {
    let mut covered = vec![false; n * n];
    if !existing.is_empty() {
        let matrix = pair_condition_matrix(existing)?;
        if matrix.n() != n {
            return Err(Error::UniverseMismatch(format!(
                "existing experiments cover {} variables, planning for {n}",
                matrix.n()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                covered[i * n + j] = matrix.is_covered(i, j);
            }
        }
    }
    let uncovered = |covered: &[bool]| -> usize {
        let mut c = 0;
        for i in 0..n {
            for j in 0..n {
                if i != j && !covered[i * n + j] {
                    c += 1;
                }
            }
        }
        c
    };

    let mut candidates = antichain_candidates(n);
    candidates.retain(|j| !j.is_empty() && j.len() < n);
    candidates.sort();
    candidates.dedup();

    let mut plan = Vec::new();
    // Greedy over the antichain candidates. They jointly cover every ordered
    // pair, so this loop reaches full coverage in at most
    // spencer_min_experiments(n) <= n picks.
    while uncovered(&covered) > 0 {
        let mut best: Option<(usize, VarSet)> = None;
        for &j in &candidates {
            let mut gain = 0;
            for i in j.iter() {
                for u in j.complement(n).iter() {
                    if !covered[i * n + u] {
                        gain += 1;
                    }
                }
            }
            let better = match best {
                None => gain > 0,
                Some((best_gain, best_j)) => {
                    gain > best_gain || (gain == best_gain && j < best_j)
                }
            };
            if better {
                best = Some((gain, j));
            }
        }
        let Some((_, j)) = best else { break };
        for i in j.iter() {
            for u in j.complement(n).iter() {
                covered[i * n + u] = true;
            }
        }
        plan.push(ExperimentSpec::fully_observed(n, j)?);
    }
    // Fallback: cover any straggler source with a singleton intervention.
    for i in 0..n {
        if (0..n).any(|u| u != i && !covered[i * n + u]) {
            for u in 0..n {
                if u != i {
                    covered[i * n + u] = true;
                }
            }
            plan.push(ExperimentSpec::fully_observed(n, VarSet::singleton(i))?);
        }
    }

    let mut all: Vec<ExperimentSpec> = existing.to_vec();
    all.extend(plan.iter().cloned());
    let (ok, missing) = is_fully_identifiable(&all, n);
    debug_assert!(ok, "planner left pairs uncovered: {missing:?}");
    Ok(plan)
}

/// JSON coverage report for the CLI.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub n: usize,
    pub fully_identifiable: bool,
    pub matrix: Vec<Vec<bool>>,
    pub missing_pairs: Vec<[String; 2]>,
}

impl CoverageReport {
    pub fn new(specs: &[ExperimentSpec], n: usize) -> Self {
        let (ok, missing) = is_fully_identifiable(specs, n);
        let matrix = match pair_condition_matrix(specs) {
            Ok(m) => (0..n)
                .map(|i| (0..n).map(|j| i != j && m.is_covered(i, j)).collect())
                .collect(),
            Err(_) => vec![vec![false; n]; n],
        };
        CoverageReport {
            n,
            fully_identifiable: ok,
            matrix,
            missing_pairs: missing
                .into_iter()
                .map(|(i, j)| [var_name(i), var_name(j)])
                .collect(),
        }
    }
}
