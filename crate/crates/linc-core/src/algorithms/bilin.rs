//! BILIN: alternating least-squares over the combined direct-effects and
//! total-effects parameterization.
//!
//! The objective is quadratic in `B` for fixed `T` and quadratic in `T` for
//! fixed `B`; neither step is convex jointly, so the search restarts from
//! random initial points and classifies each entry of `B` as determined by
//! its variance across converged restarts. The procedure is not consistent
//! (its two linear blocks pin the covariance-observable effects, which on
//! cyclic graphs differ from the raw entries of `(I - B)^-1` that the
//! coupling term targets), and may therefore err even on exact input.

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::Result;
use crate::experiments::{observed_effects, DataSet, EffectKey};
use crate::par::par_map;
 
use crate::vars::VarSet;

use super::{check_universe, faithfulness_constraints, AlgorithmConfig, EdgePredictionMatrix};

/// A sparse linear row: terms over `(source, target)` pairs (for `B`) or
/// `(row, col)` positions (for `T`), with a right-hand side.
pub type Row = (Vec<((usize, usize), f64)>, f64);

/// An eligible product penalty: a total-effect factor at `T[pos]` times a
/// direct-effect factor `b(pair)`.
pub type ProductTerm = ((usize, usize), (usize, usize));

#[derive(Debug, Clone)]
pub struct BilinOutcome {
    pub predictions: EdgePredictionMatrix,
    pub converged_restarts: usize,
    pub best_objective: f64,
}

/// The BILIN objective
/// `|K1 vec(B) - k1|^2 + |K2 vec(T) - k2|^2 + |T(I - B) - I|^2`
/// plus the included product penalties `(T_factor * B_factor)^2`.
pub fn bilin_objective(
    b: &DMatrix<f64>,
    t: &DMatrix<f64>,
    constraints_b: &[Row],
    constraints_t: &[Row],
    product_terms: &[ProductTerm],
) -> f64 {
    let n = b.nrows();
    debug_assert!(b.diagonal().iter().all(|&v| v == 0.0));
    let mut obj = 0.0;
    for (terms, rhs) in constraints_b {
        let lhs: f64 = terms
            .iter()
            .map(|&((s, tgt), c)| c * b[(tgt, s)])
            .sum();
        obj += (lhs - rhs).powi(2);
    }
    for (terms, rhs) in constraints_t {
        let lhs: f64 = terms.iter().map(|&((r, c), w)| w * t[(r, c)]).sum();
        obj += (lhs - rhs).powi(2);
    }
    let coupling = t * (DMatrix::identity(n, n) - b) - DMatrix::<f64>::identity(n, n);
    obj += coupling.norm_squared();
    for &((tr, tc), (bs, bt)) in product_terms {
        obj += (t[(tr, tc)] * b[(bt, bs)]).powi(2);
    }
    obj
}

/// Assemble the linear constraint blocks from the datasets: Eq.-2-shaped
/// rows on `T`, Eq.-3-shaped rows on `B` (latent-free datasets only),
/// faithfulness zeros on direct effects, and the product penalties pairing
/// one total effect with one direct effect.
fn build_constraints(
    n: usize,
    datasets: &[DataSet],
    cfg: &AlgorithmConfig,
) -> Result<(Vec<Row>, Vec<Row>, Vec<ProductTerm>)> {
    let mut rows_b: Vec<Row> = Vec::new();
    let mut rows_t: Vec<Row> = Vec::new();

    for ds in datasets {
        let spec = ds.spec();
        let j_set = spec.intervened();
        let effects = observed_effects(ds);
        for i in j_set.iter() {
            for u in spec.observed().iter() {
                // T rows: t(i ~> u) - sum_j t(j ~> u || J) t(i ~> j) = t(i ~> u || J).
                let mut terms: Vec<((usize, usize), f64)> = vec![((u, i), 1.0)];
                for j in j_set.iter() {
                    if j != i {
                        terms.push(((j, i), -effects[&EffectKey::new(j, u, j_set)]));
                    }
                }
                rows_t.push((terms, effects[&EffectKey::new(i, u, j_set)]));

                // B rows need every non-intervened variable observed.
                if spec.hidden().is_empty() {
                    let mut terms: Vec<((usize, usize), f64)> = vec![((i, u), 1.0)];
                    for j in 0..n {
                        if j != u && !j_set.contains(j) {
                            terms.push(((j, u), effects[&EffectKey::new(i, j, j_set)]));
                        }
                    }
                    rows_b.push((terms, effects[&EffectKey::new(i, u, j_set)]));
                }
            }
        }
    }

    let (store, _) = faithfulness_constraints(datasets, cfg)?;
    let full = VarSet::full(n);
    for s in 0..n {
        for t in 0..n {
            if s == t {
                continue;
            }
            if store.implied_zero(&EffectKey::new(s, t, full.without(t))) {
                rows_b.push((vec![((s, t), 1.0)], 0.0));
            }
        }
    }

    // A stored product is representable here when its first factor is a
    // plain total effect; the second factor then weakens soundly to the
    // direct effect (adding interventions only removes paths).
    let mut products: Vec<ProductTerm> = Vec::new();
    for (a, b) in store.products() {
        if a.j == VarSet::singleton(a.source) {
            products.push(((a.target, a.source), (b.source, b.target)));
        }
    }
    products.sort();
    products.dedup();

    Ok((rows_b, rows_t, products))
}

struct Restart {
    b: DMatrix<f64>,
    objective: f64,
    /// Met the objective-delta rule before the sweep budget ran out.
    converged: bool,
    /// Finite objective and monotone descent; usable as a solution sample
    /// even when the delta rule was not reached within the budget.
    usable: bool,
}

/// Preassembled step matrices. Row layouts are fixed across sweeps; only
/// the coupling and product coefficients are refilled from the current
/// iterate, so each half-sweep is one dense fill plus one SVD solve.
struct StepWorkspace {
    n: usize,
    /// Column of the B unknown `b(source -> target)`.
    col_b: Vec<usize>,
    a_b: DMatrix<f64>,
    rhs_b: nalgebra::DVector<f64>,
    b_fixed_rows: usize,
    a_t: DMatrix<f64>,
    rhs_t: nalgebra::DVector<f64>,
    t_fixed_rows: usize,
}

impl StepWorkspace {
    fn new(n: usize, rows_b: &[Row], rows_t: &[Row], products: &[ProductTerm]) -> Self {
        let nb = n * (n - 1);
        let mut col_b = vec![usize::MAX; n * n];
        let mut next = 0;
        for s in 0..n {
            for t in 0..n {
                if s != t {
                    col_b[s * n + t] = next;
                    next += 1;
                }
            }
        }

        let b_fixed_rows = rows_b.len();
        let b_rows = b_fixed_rows + n * n + products.len();
        let mut a_b = DMatrix::zeros(b_rows, nb);
        let mut rhs_b = nalgebra::DVector::zeros(b_rows);
        for (r, (terms, rhs)) in rows_b.iter().enumerate() {
            for &((s, t), coeff) in terms {
                a_b[(r, col_b[s * n + t])] += coeff;
            }
            rhs_b[r] = *rhs;
        }

        let t_fixed_rows = rows_t.len();
        let t_rows = t_fixed_rows + n * n + products.len();
        let mut a_t = DMatrix::zeros(t_rows, n * n);
        let mut rhs_t = nalgebra::DVector::zeros(t_rows);
        for (r, (terms, rhs)) in rows_t.iter().enumerate() {
            for &((row, c), coeff) in terms {
                a_t[(r, row * n + c)] += coeff;
            }
            rhs_t[r] = *rhs;
        }
        // Coupling right-hand sides for the T-step are the identity entries.
        for r in 0..n {
            for c in 0..n {
                rhs_t[t_fixed_rows + r * n + c] = if r == c { 1.0 } else { 0.0 };
            }
        }

        StepWorkspace {
            n,
            col_b,
            a_b,
            rhs_b,
            b_fixed_rows,
            a_t,
            rhs_t,
            t_fixed_rows,
        }
    }

    /// Minimum-norm least-squares update of B for fixed T.
    fn solve_b(&mut self, t: &DMatrix<f64>, products: &[ProductTerm], b: &mut DMatrix<f64>) {
        let n = self.n;
        // T[r,c] - sum_{j != c} T[r,j] B[j,c] = delta_rc.
        for r in 0..n {
            for c in 0..n {
                let row = self.b_fixed_rows + r * n + c;
                for j in 0..n {
                    if j != c {
                        self.a_b[(row, self.col_b[c * n + j])] = t[(r, j)];
                    }
                }
                let delta = if r == c { 1.0 } else { 0.0 };
                self.rhs_b[row] = t[(r, c)] - delta;
            }
        }
        for (k, &((tr, tc), (bs, bt))) in products.iter().enumerate() {
            let row = self.b_fixed_rows + n * n + k;
            self.a_b[(row, self.col_b[bs * n + bt])] = t[(tr, tc)];
        }
        let x = min_norm_lsq(&self.a_b, &self.rhs_b);
        for s in 0..n {
            for tgt in 0..n {
                if s != tgt {
                    b[(tgt, s)] = x[self.col_b[s * n + tgt]];
                }
            }
        }
    }

    /// Minimum-norm least-squares update of T for fixed B.
    fn solve_t(&mut self, b: &DMatrix<f64>, products: &[ProductTerm], t: &mut DMatrix<f64>) {
        let n = self.n;
        // sum_j T[r,j] (I - B)[j,c] = delta_rc.
        for r in 0..n {
            for c in 0..n {
                let row = self.t_fixed_rows + r * n + c;
                for j in 0..n {
                    let m = if j == c { 1.0 } else { 0.0 } - b[(j, c)];
                    self.a_t[(row, r * n + j)] = m;
                }
            }
        }
        for (k, &((tr, tc), (bs, bt))) in products.iter().enumerate() {
            let row = self.t_fixed_rows + n * n + k;
            self.a_t[(row, tr * n + tc)] = b[(bt, bs)];
        }
        let x = min_norm_lsq(&self.a_t, &self.rhs_t);
        for r in 0..n {
            for c in 0..n {
                t[(r, c)] = x[r * n + c];
            }
        }
    }
}

/// Minimum-norm least squares through the normal equations: the unknown
/// counts here are tiny (at most n^2), so the eigendecomposition of A^T A is
/// much cheaper than a full SVD of A and accurate enough for these
/// well-scaled step matrices.
fn min_norm_lsq(a: &DMatrix<f64>, rhs: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
    let ata = a.transpose() * a;
    let atb = a.transpose() * rhs;
    let eig = ata.symmetric_eigen();
    let lambda_max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let k = a.ncols();
    let mut x = nalgebra::DVector::zeros(k);
    if lambda_max == 0.0 {
        return x;
    }
    let cutoff = 1e-18 * lambda_max;
    for i in 0..k {
        let lambda = eig.eigenvalues[i];
        if lambda > cutoff {
            let vi = eig.eigenvectors.column(i);
            let scale = vi.dot(&atb) / lambda;
            x.axpy(scale, &vi, 1.0);
        }
    }
    x
}

fn run_restart(
    n: usize,
    rows_b: &[Row],
    rows_t: &[Row],
    products: &[ProductTerm],
    cfg: &AlgorithmConfig,
    seed: u64,
) -> Restart {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut b = DMatrix::<f64>::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            if r != c {
                b[(r, c)] = rng.gen_range(-1.0..1.0);
            }
        }
    }
    let mut t = DMatrix::<f64>::identity(n, n);
    for r in 0..n {
        for c in 0..n {
            t[(r, c)] += rng.gen_range(-1.0..1.0);
        }
    }

    let mut workspace = StepWorkspace::new(n, rows_b, rows_t, products);
    let mut previous = f64::INFINITY;
    let mut converged = false;
    let mut usable = true;
    for _ in 0..cfg.bilin.max_sweeps {
        workspace.solve_b(&t, products, &mut b);
        workspace.solve_t(&b, products, &mut t);
        let objective = bilin_objective(&b, &t, rows_b, rows_t, products);
        if !objective.is_finite() || objective > previous + 1e-9 {
            usable = false;
            previous = objective;
            break;
        }
        if (previous - objective).abs() < cfg.bilin.convergence_tol {
            converged = true;
            previous = objective;
            break;
        }
        previous = objective;
    }

    Restart {
        b,
        objective: previous,
        converged,
        usable,
    }
}

/// Run BILIN: `restarts` alternating minimizations from random starting
/// points; an entry of `B` is reported only when its variance across the
/// converged restarts stays below `variance_tol`.
pub fn run_bilin(
    n: usize,
    datasets: &[DataSet],
    cfg: &AlgorithmConfig,
    seed: u64,
) -> Result<BilinOutcome> {
    check_universe(n, datasets)?;
    let (rows_b, rows_t, products) = build_constraints(n, datasets, cfg)?;

    let restarts: Vec<Restart> = par_map((0..cfg.bilin.restarts).collect(), |r| {
        run_restart(
            n,
            &rows_b,
            &rows_t,
            &products,
            cfg,
            seed.wrapping_add(0x9E37_79B9u64.wrapping_mul(r as u64 + 1)),
        )
    });

    // Restarts that diverged (non-finite or increasing objective) are
    // dropped; the rest form the solution sample, whether or not they hit
    // the delta rule before the sweep budget ran out.
    let usable: Vec<&Restart> = restarts.iter().filter(|r| r.usable).collect();
    let mut predictions = EdgePredictionMatrix::all_unknown(n);
    if usable.is_empty() {
        return Ok(BilinOutcome {
            predictions,
            converged_restarts: 0,
            best_objective: f64::INFINITY,
        });
    }
    let k = usable.len() as f64;
    for s in 0..n {
        for tgt in 0..n {
            if s == tgt {
                continue;
            }
            let values: Vec<f64> = usable.iter().map(|r| r.b[(tgt, s)]).collect();
            let mean = values.iter().sum::<f64>() / k;
            let variance = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
            if variance < cfg.bilin.variance_tol {
                predictions.set_determined(s, tgt, mean, cfg.zero_tol);
            }
        }
    }
    let best = usable
        .iter()
        .map(|r| r.objective)
        .fold(f64::INFINITY, f64::min);
    Ok(BilinOutcome {
        predictions,
        converged_restarts: restarts.iter().filter(|r| r.converged).count(),
        best_objective: best,
    })
}
