//! Small reference models used across the test suites and benchmarks.

use nalgebra::DMatrix;

use crate::experiments::ExperimentSpec;
use crate::model::LinearCyclicModel;
use crate::vars::VarSet;

fn model(n: usize, edges: &[(usize, usize, f64)]) -> LinearCyclicModel {
    let mut b = DMatrix::zeros(n, n);
    for &(source, target, coeff) in edges {
        b[(target, source)] = coeff;
    }
    LinearCyclicModel::new(b, DMatrix::identity(n, n)).expect("valid fixture")
}

/// Two independent variables, no edges.
pub fn m0() -> LinearCyclicModel {
    model(2, &[])
}

/// Two-cycle: b(x1 -> x2) = 0.5, b(x2 -> x1) = 0.4.
pub fn m2() -> LinearCyclicModel {
    model(2, &[(0, 1, 0.5), (1, 0, 0.4)])
}

/// Chain x1 -> x2 -> x3 with coefficients 0.8 and 0.7.
pub fn m3() -> LinearCyclicModel {
    model(3, &[(0, 1, 0.8), (1, 2, 0.7)])
}

/// Fork: x2 -> x1 (0.8) and x2 -> x3 (0.7).
pub fn m4() -> LinearCyclicModel {
    model(3, &[(1, 0, 0.8), (1, 2, 0.7)])
}

/// Collider: x1 -> x3 (0.8) and x2 -> x3 (0.7).
pub fn m5() -> LinearCyclicModel {
    model(3, &[(0, 2, 0.8), (1, 2, 0.7)])
}

/// Four-variable case-study model: a two-cycle x1 <-> x2, x2 -> x4 and
/// x3 -> x4, with x4 childless and no arcs between x1 and x3.
///
/// Under the two case-study experiments (intervene x1 with x3 hidden;
/// passively observe everything but x1) the x2 -> x1 and x3 -> x4 arcs are
/// structurally unidentifiable while most other entries are decidable.
pub fn fig2_model() -> LinearCyclicModel {
    model(
        4,
        &[(0, 1, 0.7), (1, 0, 0.4), (1, 3, 0.8), (2, 3, 0.6)],
    )
}

/// The two case-study experiments for [`fig2_model`]: x1 and x3 are never
/// measured together.
pub fn fig2_experiments() -> Vec<ExperimentSpec> {
    vec![
        ExperimentSpec::new(
            4,
            VarSet::singleton(0),
            VarSet::from_iter([1, 3]),
            VarSet::singleton(2),
        )
        .expect("valid"),
        ExperimentSpec::new(
            4,
            VarSet::empty(),
            VarSet::from_iter([1, 2, 3]),
            VarSet::singleton(0),
        )
        .expect("valid"),
    ]
}

/// One fully observed single-intervention experiment per variable.
pub fn single_intervention_experiments(n: usize) -> Vec<ExperimentSpec> {
    (0..n)
        .map(|i| ExperimentSpec::fully_observed(n, VarSet::singleton(i)).expect("valid"))
        .collect()
}
