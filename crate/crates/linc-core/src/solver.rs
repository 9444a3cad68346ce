//! Sparse assembly of linear systems over named unknowns, minimum-norm
//! least-squares solving, and per-unknown determinedness classification.
//!
//! An unknown is *determined* when its unit coordinate vector lies in the
//! row space of the coefficient matrix — equivalently, when it takes the
//! same value in every least-squares solution.

use std::collections::HashMap;
use std::hash::Hash;

use nalgebra::DMatrix;

/// Solver tolerances.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Singular values below `rank_tol_rel * sigma_max` are treated as zero.
    pub rank_tol_rel: f64,
    /// Maximum null-space projection norm for an unknown to count as
    /// determined.
    pub det_tol: f64,
    /// Relative residual above which the system is flagged inconsistent.
    pub inconsistency_tol: f64,
}

impl SolveOptions {
    /// Tolerances for exact (infinite-sample) inputs.
    pub fn exact() -> Self {
        SolveOptions {
            rank_tol_rel: 1e-9,
            det_tol: 1e-7,
            inconsistency_tol: 1e-6,
        }
    }

    /// Looser tolerances for noisy finite-sample inputs.
    pub fn finite() -> Self {
        SolveOptions {
            rank_tol_rel: 1e-6,
            det_tol: 1e-5,
            inconsistency_tol: 0.5,
        }
    }
}

/// A linear system with sparse rows over unknowns identified by `K`.
#[derive(Debug, Clone)]
pub struct LinearSystem<K> {
    index: HashMap<K, usize>,
    keys: Vec<K>,
    rows: Vec<(Vec<(usize, f64)>, f64)>,
    zero_rows_nonzero_rhs: usize,
}

impl<K: Clone + Eq + Hash + Ord> Default for LinearSystem<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: Clone + Eq + Hash + Ord> LinearSystem<K> {
    pub fn new() -> Self {
        LinearSystem {
            index: HashMap::new(),
            keys: Vec::new(),
            rows: Vec::new(),
            zero_rows_nonzero_rhs: 0,
        }
    }

    /// Register an unknown (idempotent) and return its column.
    pub fn register(&mut self, key: K) -> usize {
        if let Some(&col) = self.index.get(&key) {
            return col;
        }
        let col = self.keys.len();
        self.index.insert(key.clone(), col);
        self.keys.push(key);
        col
    }

    /// Append the row `sum coeff * unknown = rhs`. Terms on the same unknown
    /// are accumulated. Rows with no surviving coefficient and a nonzero
    /// right-hand side are counted and flagged in the report.
    pub fn add_row(&mut self, terms: &[(K, f64)], rhs: f64) {
        let mut acc: HashMap<usize, f64> = HashMap::new();
        for (key, coeff) in terms {
            let col = self.register(key.clone());
            *acc.entry(col).or_insert(0.0) += coeff;
        }
        let mut row: Vec<(usize, f64)> = acc.into_iter().filter(|(_, c)| *c != 0.0).collect();
        row.sort_by_key(|&(col, _)| col);
        if row.is_empty() && rhs != 0.0 {
            self.zero_rows_nonzero_rhs += 1;
        }
        self.rows.push((row, rhs));
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_unknowns(&self) -> usize {
        self.keys.len()
    }

    /// Minimum-norm least-squares solve with rank-revealing SVD.
    pub fn solve_determined(&self, opts: SolveOptions) -> SolveReport<K> {
        let m = self.rows.len();
        let n = self.keys.len();
        if m == 0 || n == 0 {
            return SolveReport {
                keys: self.keys.clone(),
                index: self.index.clone(),
                values: vec![0.0; n],
                determined: vec![false; n],
                rank: 0,
                residual: 0.0,
                relative_residual: 0.0,
                inconsistent: self.zero_rows_nonzero_rhs > 0,
            };
        }
        let mut a = DMatrix::zeros(m, n);
        let mut b = nalgebra::DVector::zeros(m);
        for (r, (terms, rhs)) in self.rows.iter().enumerate() {
            for &(c, coeff) in terms {
                a[(r, c)] = coeff;
            }
            b[r] = *rhs;
        }
        let svd = a.clone().svd(true, true);
        let u = svd.u.as_ref().expect("u requested");
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        let sigma = &svd.singular_values;
        let sigma_max = sigma.iter().cloned().fold(0.0, f64::max);
        let rank = if sigma_max == 0.0 {
            0
        } else {
            sigma.iter().filter(|&&s| s > opts.rank_tol_rel * sigma_max).count()
        };

        // Minimum-norm solution: x = sum_{i<rank} (u_i . b / sigma_i) v_i.
        let mut x = nalgebra::DVector::zeros(n);
        for i in 0..rank {
            let ui_b: f64 = (0..m).map(|r| u[(r, i)] * b[r]).sum();
            let scale = ui_b / sigma[i];
            for c in 0..n {
                x[c] += scale * v_t[(i, c)];
            }
        }

        // e_c lies in the row space iff its coordinates on the first `rank`
        // right singular vectors carry (almost) all of its unit norm.
        let mut determined = vec![false; n];
        for c in 0..n {
            let in_row_space: f64 = (0..rank).map(|i| v_t[(i, c)].powi(2)).sum();
            let null_norm = (1.0 - in_row_space).max(0.0).sqrt();
            determined[c] = null_norm < opts.det_tol;
        }

        let residual = (&a * &x - &b).norm();
        let b_norm = b.norm();
        let relative_residual = if b_norm > 0.0 { residual / b_norm } else { residual };
        SolveReport {
            keys: self.keys.clone(),
            index: self.index.clone(),
            values: x.iter().cloned().collect(),
            determined,
            rank,
            residual,
            relative_residual,
            inconsistent: self.zero_rows_nonzero_rhs > 0
                || relative_residual > opts.inconsistency_tol,
        }
    }
}

/// Outcome of [`LinearSystem::solve_determined`].
#[derive(Debug, Clone)]
pub struct SolveReport<K> {
    keys: Vec<K>,
    index: HashMap<K, usize>,
    values: Vec<f64>,
    determined: Vec<bool>,
    pub rank: usize,
    pub residual: f64,
    pub relative_residual: f64,
    pub inconsistent: bool,
}

impl<K: Clone + Eq + Hash + Ord> SolveReport<K> {
    pub fn value(&self, key: &K) -> Option<f64> {
        self.index.get(key).map(|&c| self.values[c])
    }

    pub fn is_determined(&self, key: &K) -> bool {
        self.index.get(key).map_or(false, |&c| self.determined[c])
    }

    /// Value of `key` if it is uniquely determined by the system.
    pub fn determined_value(&self, key: &K) -> Option<f64> {
        match self.index.get(key) {
            Some(&c) if self.determined[c] => Some(self.values[c]),
            _ => None,
        }
    }

    pub fn all_determined(&self) -> bool {
        !self.determined.is_empty() && self.determined.iter().all(|&d| d)
    }

    /// Keys of all determined unknowns with their values.
    pub fn determined_entries(&self) -> impl Iterator<Item = (&K, f64)> {
        self.keys
            .iter()
            .enumerate()
            .filter(|(c, _)| self.determined[*c])
            .map(|(c, k)| (k, self.values[c]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn partially_determined_system() {
        // {x = 2, y + z = 3}: x determined, y and z not.
        let mut sys: LinearSystem<&str> = LinearSystem::new();
        sys.add_row(&[("x", 1.0)], 2.0);
        sys.add_row(&[("y", 1.0), ("z", 1.0)], 3.0);
        let report = sys.solve_determined(SolveOptions::exact());
        assert_eq!(report.determined_value(&"x"), Some(2.0));
        assert!(!report.is_determined(&"y"));
        assert!(!report.is_determined(&"z"));
        assert!(!report.inconsistent);
    }

    #[test]
    fn chain_substitution_determines_both() {
        // t13 = 0.7 * t12, t12 = 0.8 (the chain instance).
        let mut sys: LinearSystem<&str> = LinearSystem::new();
        sys.add_row(&[("t13", 1.0), ("t12", -0.7)], 0.0);
        sys.add_row(&[("t12", 1.0)], 0.8);
        let report = sys.solve_determined(SolveOptions::exact());
        let t13 = report.determined_value(&"t13").unwrap();
        assert!((t13 - 0.56).abs() < 1e-12);
        assert!(report.all_determined());
    }

    #[test]
    fn unused_unknown_is_undetermined_with_zero_value() {
        let mut sys: LinearSystem<&str> = LinearSystem::new();
        sys.register("orphan");
        sys.add_row(&[("x", 1.0)], 1.0);
        let report = sys.solve_determined(SolveOptions::exact());
        assert!(!report.is_determined(&"orphan"));
        assert!(report.value(&"orphan").unwrap().abs() < 1e-12);
    }

    #[test]
    fn zero_row_with_nonzero_rhs_is_flagged() {
        let mut sys: LinearSystem<&str> = LinearSystem::new();
        sys.add_row(&[], 1.0);
        sys.add_row(&[("x", 1.0)], 1.0);
        let report = sys.solve_determined(SolveOptions::exact());
        assert!(report.inconsistent);
    }

    #[test]
    fn redundant_rows_change_nothing() {
        let mut sys: LinearSystem<&str> = LinearSystem::new();
        sys.add_row(&[("a", 1.0), ("b", 2.0)], 3.0);
        sys.add_row(&[("a", 2.0), ("b", 1.0)], 3.0);
        let before = sys.solve_determined(SolveOptions::exact());
        // Append a linear combination of the first two rows.
        sys.add_row(&[("a", 3.0), ("b", 3.0)], 6.0);
        let after = sys.solve_determined(SolveOptions::exact());
        for key in ["a", "b"] {
            assert_eq!(before.is_determined(&key), after.is_determined(&key));
            let (x, y) = (before.value(&key).unwrap(), after.value(&key).unwrap());
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn row_scaling_changes_nothing() {
        let mut a: LinearSystem<&str> = LinearSystem::new();
        a.add_row(&[("x", 1.0), ("y", 1.0)], 2.0);
        a.add_row(&[("x", 1.0), ("y", -1.0)], 0.0);
        let mut b: LinearSystem<&str> = LinearSystem::new();
        b.add_row(&[("x", 17.0), ("y", 17.0)], 34.0);
        b.add_row(&[("x", -0.03), ("y", 0.03)], 0.0);
        let ra = a.solve_determined(SolveOptions::exact());
        let rb = b.solve_determined(SolveOptions::exact());
        for key in ["x", "y"] {
            assert!((ra.value(&key).unwrap() - rb.value(&key).unwrap()).abs() < 1e-9);
            assert_eq!(ra.is_determined(&key), rb.is_determined(&key));
        }
    }

    /// Gram-Schmidt based null-space sampler, independent of the SVD path.
    fn random_null_vector(rows: &[Vec<f64>], n: usize, rng: &mut StdRng) -> Vec<f64> {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for row in rows {
            let mut v = row.clone();
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= dot * bi;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-10 {
                for vi in v.iter_mut() {
                    *vi /= norm;
                }
                basis.push(v);
            }
        }
        let mut z: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for b in &basis {
            let dot: f64 = z.iter().zip(b).map(|(x, y)| x * y).sum();
            for (zi, bi) in z.iter_mut().zip(b) {
                *zi -= dot * bi;
            }
        }
        z
    }

    #[test]
    fn determined_flags_match_null_space_oracle() {
        let mut rng = StdRng::seed_from_u64(77);
        for _ in 0..50 {
            let n = rng.gen_range(2..=8);
            let m = rng.gen_range(1..=10);
            let mut rows: Vec<Vec<f64>> = Vec::new();
            let mut sys: LinearSystem<usize> = LinearSystem::new();
            for c in 0..n {
                sys.register(c);
            }
            let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            for _ in 0..m {
                let row: Vec<f64> = (0..n)
                    .map(|_| {
                        if rng.gen::<f64>() < 0.5 {
                            rng.gen_range(-1.0..1.0)
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let rhs: f64 = row.iter().zip(&x0).map(|(a, b)| a * b).sum();
                let terms: Vec<(usize, f64)> = row
                    .iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(c, &v)| (c, v))
                    .collect();
                sys.add_row(&terms, rhs);
                rows.push(row);
            }
            let report = sys.solve_determined(SolveOptions::exact());
            let z1 = random_null_vector(&rows, n, &mut rng);
            let z2 = random_null_vector(&rows, n, &mut rng);
            for c in 0..n {
                let oracle = z1[c].abs() < 1e-7 && z2[c].abs() < 1e-7;
                assert_eq!(
                    report.is_determined(&c),
                    oracle,
                    "disagreement on unknown {c}: null coords {} {}",
                    z1[c],
                    z2[c]
                );
            }
        }
    }
}
