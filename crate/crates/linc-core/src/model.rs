//! Linear cyclic models with latent confounding: surgical manipulation,
//! equilibrium statistics and exact experimental effects.
//!
//! A model is `x := Bx + e` with `B[j][i] = b(x_i -> x_j)` and
//! `cov(e) = Sigma_e`. Latent confounding is carried by the off-diagonal
//! entries of `Sigma_e`. Intervening on a set `J` zeroes the `J`-rows of `B`
//! (cutting all edges into intervened variables), zeroes the `J`-rows and
//! columns of `Sigma_e`, and adds fresh unit-variance randomization on `J`.
//! Every quantity observable in an experiment then follows from the
//! equilibrium covariance `(I - B~)^-1 (Sigma_e~ + Sigma_c) (I - B~)^-T`.

use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::EffectKey;
use crate::vars::VarSet;

/// Relative singular-value threshold below which a matrix counts as singular.
pub const SINGULARITY_TOL: f64 = 1e-9;

/// Invert `m`, failing if its smallest singular value is below
/// `SINGULARITY_TOL` times its largest.
pub fn stable_inverse(m: &DMatrix<f64>, subset: VarSet) -> Result<DMatrix<f64>> {
    let svd = m.clone().svd(false, false);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let min_sv = svd.singular_values.iter().cloned().fold(f64::MAX, f64::min);
    if max_sv == 0.0 || min_sv <= SINGULARITY_TOL * max_sv {
        return Err(Error::UnstableModel { subset });
    }
    m.clone()
        .try_inverse()
        .ok_or(Error::UnstableModel { subset })
}

/// A linear cyclic model with latent confounding.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCyclicModel {
    n: usize,
    b: DMatrix<f64>,
    sigma_e: DMatrix<f64>,
}

impl LinearCyclicModel {
    /// Build a model, validating the type invariants: `B` square with a zero
    /// diagonal, `Sigma_e` symmetric positive semidefinite of matching size.
    pub fn new(b: DMatrix<f64>, sigma_e: DMatrix<f64>) -> Result<Self> {
        let n = b.nrows();
        if b.ncols() != n {
            return Err(Error::InvalidModel(format!(
                "B must be square, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if n == 0 || n > 32 {
            return Err(Error::InvalidModel(format!(
                "variable count {n} outside supported range 1..=32"
            )));
        }
        if sigma_e.nrows() != n || sigma_e.ncols() != n {
            return Err(Error::InvalidModel(format!(
                "Sigma_e must be {n}x{n}, got {}x{}",
                sigma_e.nrows(),
                sigma_e.ncols()
            )));
        }
        for i in 0..n {
            if b[(i, i)] != 0.0 {
                return Err(Error::InvalidModel(format!(
                    "B has a nonzero diagonal entry at ({i},{i}); self-loops are not represented"
                )));
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if (sigma_e[(i, j)] - sigma_e[(j, i)]).abs() > 1e-9 {
                    return Err(Error::InvalidModel(format!(
                        "Sigma_e is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let eigs = sigma_e.clone().symmetric_eigenvalues();
        if eigs.iter().any(|&l| l < -1e-9) {
            return Err(Error::InvalidModel(
                "Sigma_e is not positive semidefinite".into(),
            ));
        }
        Ok(LinearCyclicModel { n, b, sigma_e })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn sigma_e(&self) -> &DMatrix<f64> {
        &self.sigma_e
    }

    /// The direct effect `b(x_i -> x_j)`, i.e. `B[j, i]`.
    pub fn direct_effect(&self, source: usize, target: usize) -> f64 {
        self.b[(target, source)]
    }

    /// Surgically intervene on the variables in `j`.
    ///
    /// `j = ∅` is the null experiment and returns an identical copy.
    pub fn manipulate(&self, j: VarSet) -> Result<ManipulatedModel> {
        if let Some(bad) = j.iter().find(|&i| i >= self.n) {
            return Err(Error::IndexOutOfRange {
                index: bad,
                n: self.n,
            });
        }
        let n = self.n;
        let mut b_tilde = self.b.clone();
        let mut sigma_tilde = self.sigma_e.clone();
        let mut sigma_c = DMatrix::zeros(n, n);
        for i in j.iter() {
            for k in 0..n {
                b_tilde[(i, k)] = 0.0;
                sigma_tilde[(i, k)] = 0.0;
                sigma_tilde[(k, i)] = 0.0;
            }
            sigma_c[(i, i)] = 1.0;
        }
        Ok(ManipulatedModel {
            n,
            j,
            b_tilde,
            sigma_tilde,
            sigma_c,
        })
    }

    /// The raw total-effects matrix `T = (I - B)^-1`, so `T[j, i]` sums the
    /// directed walks from `x_i` to `x_j` (including walks that revisit
    /// `x_i`; the covariance-observable single-intervention effect is the
    /// column-normalized version, see [`EffectKey`]-based queries).
    pub fn total_effects(&self) -> Result<DMatrix<f64>> {
        let i_minus_b = DMatrix::identity(self.n, self.n) - &self.b;
        stable_inverse(&i_minus_b, VarSet::empty())
    }

    /// The exact experimental effect `t(source ~> target || J)`: the
    /// covariance of the intervened source and the observed target in the
    /// experiment intervening exactly `key.j`.
    pub fn true_experimental_effect(&self, key: &EffectKey) -> Result<f64> {
        key.validate(self.n)?;
        let mm = self.manipulate(key.j)?;
        // cov(x_s, x_t) equals the (t, s) entry of (I - B~)^-1 because the
        // intervened source is exogenous with unit variance.
        let t_tilde = mm.total_effects_tilde()?;
        Ok(t_tilde[(key.target, key.source)])
    }

    /// Check invertibility of `I - B~` across intervention subsets.
    ///
    /// Exhaustive mode checks all `2^n` subsets; otherwise the null
    /// experiment and all singletons are checked.
    pub fn check_weak_stability(&self, exhaustive: bool) -> StabilityReport {
        let subsets: Vec<VarSet> = if exhaustive {
            VarSet::full(self.n).subsets().collect()
        } else {
            std::iter::once(VarSet::empty())
                .chain((0..self.n).map(VarSet::singleton))
                .collect()
        };
        let mut checked = 0;
        for j in subsets {
            checked += 1;
            let mm = self.manipulate(j).expect("subset within range");
            if mm.total_effects_tilde().is_err() {
                return StabilityReport {
                    pass: false,
                    first_violation: Some(j),
                    subsets_checked: checked,
                };
            }
        }
        StabilityReport {
            pass: true,
            first_violation: None,
            subsets_checked: checked,
        }
    }

    pub fn to_json(&self) -> ModelJson {
        ModelJson {
            n: self.n,
            b: matrix_to_rows(&self.b),
            sigma_e: matrix_to_rows(&self.sigma_e),
        }
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(file, &self.to_json())?;
        Ok(())
    }

    pub fn read_json(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let json: ModelJson = serde_json::from_reader(file)?;
        json.into_model()
    }
}

/// A model after surgical intervention on `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ManipulatedModel {
    n: usize,
    j: VarSet,
    b_tilde: DMatrix<f64>,
    sigma_tilde: DMatrix<f64>,
    sigma_c: DMatrix<f64>,
}

impl ManipulatedModel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn intervened(&self) -> VarSet {
        self.j
    }

    pub fn b_tilde(&self) -> &DMatrix<f64> {
        &self.b_tilde
    }

    pub fn sigma_e_tilde(&self) -> &DMatrix<f64> {
        &self.sigma_tilde
    }

    pub fn sigma_c(&self) -> &DMatrix<f64> {
        &self.sigma_c
    }

    /// `(I - B~)^-1`, reported as a stability violation when singular.
    pub fn total_effects_tilde(&self) -> Result<DMatrix<f64>> {
        let i_minus_b = DMatrix::identity(self.n, self.n) - &self.b_tilde;
        stable_inverse(&i_minus_b, self.j)
    }

    /// The equilibrium covariance
    /// `(I - B~)^-1 (Sigma_e~ + Sigma_c) (I - B~)^-T`.
    pub fn equilibrium_covariance(&self) -> Result<DMatrix<f64>> {
        let t = self.total_effects_tilde()?;
        let noise = &self.sigma_tilde + &self.sigma_c;
        let cov = &t * noise * t.transpose();
        // Clean up the asymmetry left by floating-point products.
        Ok(0.5 * (&cov + cov.transpose()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StabilityReport {
    pub pass: bool,
    pub first_violation: Option<VarSet>,
    pub subsets_checked: usize,
}

/// Parameters for random model generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RandomModelConfig {
    pub n: usize,
    /// Probability that any off-diagonal entry of `B` is nonzero.
    pub edge_prob: f64,
    /// Probability that any unordered pair gets a correlated disturbance.
    pub confounder_prob: f64,
    /// Edge coefficient magnitudes are uniform in `[coeff_low, coeff_high]`
    /// with a random sign, keeping them bounded away from zero.
    pub coeff_low: f64,
    pub coeff_high: f64,
}

impl RandomModelConfig {
    pub fn new(n: usize) -> Self {
        RandomModelConfig {
            n,
            edge_prob: 0.2,
            confounder_prob: 0.15,
            coeff_low: 0.2,
            coeff_high: 0.8,
        }
    }
}

const CONFOUNDER_LOW: f64 = 0.1;
const CONFOUNDER_HIGH: f64 = 0.4;
const MAX_GENERATION_ATTEMPTS: usize = 64;

/// Draw a random weakly stable model.
///
/// Edge and confounder sparsity follow the config; positive semidefiniteness
/// of `Sigma_e` is enforced by a diagonal shift plus renormalization, and the
/// candidate is regenerated until it passes the weak-stability check
/// (exhaustive over all intervention subsets for `n <= 12`).
pub fn random_model(config: &RandomModelConfig, seed: u64) -> Result<LinearCyclicModel> {
    assert!(
        (0.0..=1.0).contains(&config.edge_prob) && (0.0..=1.0).contains(&config.confounder_prob),
        "probabilities must lie in [0, 1]"
    );
    assert!(
        0.0 < config.coeff_low && config.coeff_low < config.coeff_high,
        "coefficient range must satisfy 0 < low < high"
    );
    let n = config.n;
    let mut rng = StdRng::seed_from_u64(seed);
    for _ in 0..MAX_GENERATION_ATTEMPTS {
        let mut b = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                if i != j && rng.gen::<f64>() < config.edge_prob {
                    b[(j, i)] = random_coeff(&mut rng, config.coeff_low, config.coeff_high);
                }
            }
        }
        let mut sigma = DMatrix::identity(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.gen::<f64>() < config.confounder_prob {
                    let v = random_coeff(&mut rng, CONFOUNDER_LOW, CONFOUNDER_HIGH);
                    sigma[(i, j)] = v;
                    sigma[(j, i)] = v;
                }
            }
        }
        enforce_psd(&mut sigma);
        let model = LinearCyclicModel::new(b, sigma)?;
        if model.check_weak_stability(n <= 12).pass {
            return Ok(model);
        }
    }
    Err(Error::GenerationFailed {
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

fn random_coeff(rng: &mut StdRng, low: f64, high: f64) -> f64 {
    let magnitude = rng.gen_range(low..high);
    if rng.gen::<bool>() {
        magnitude
    } else {
        -magnitude
    }
}

/// Shift the diagonal until the minimum eigenvalue clears 1e-6, then rescale
/// back to a unit diagonal.
fn enforce_psd(sigma: &mut DMatrix<f64>) {
    let n = sigma.nrows();
    let min_eig = sigma
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::MAX, f64::min);
    if min_eig < 1e-6 {
        let shift = 1e-6 - min_eig;
        for i in 0..n {
            sigma[(i, i)] += shift;
        }
        let scale = 1.0 / (1.0 + shift);
        // Renormalize so the diagonal is exactly 1 again.
        *sigma *= scale;
        for i in 0..n {
            sigma[(i, i)] = 1.0;
        }
    }
}

/// On-disk model format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelJson {
    pub n: usize,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Sigma_e")]
    pub sigma_e: Vec<Vec<f64>>,
}

impl ModelJson {
    pub fn into_model(self) -> Result<LinearCyclicModel> {
        let b = rows_to_matrix(self.n, &self.b, "B")?;
        let sigma = rows_to_matrix(self.n, &self.sigma_e, "Sigma_e")?;
        LinearCyclicModel::new(b, sigma)
    }
}

pub(crate) fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

pub(crate) fn rows_to_matrix(n: usize, rows: &[Vec<f64>], what: &str) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidModel(format!(
            "{what} must be a {n}x{n} row-major matrix"
        )));
    }
    Ok(DMatrix::from_fn(n, n, |r, c| rows[r][c]))
}
