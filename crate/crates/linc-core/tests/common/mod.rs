//! Shared oracles for the integration suites, independent of the library's
//! algorithm code paths: effects are computed by direct matrix inversion of
//! each manipulated model, cached per intervention set.

use std::collections::HashMap;

use linc_core::model::LinearCyclicModel;
use linc_core::vars::VarSet;
use nalgebra::DMatrix;

pub struct EffectOracle {
    n: usize,
    inverses: HashMap<VarSet, DMatrix<f64>>,
}

impl EffectOracle {
    /// Precompute `(I - B~)^-1` for every intervention subset.
    pub fn new(model: &LinearCyclicModel) -> Self {
        let n = model.n();
        let eye = DMatrix::<f64>::identity(n, n);
        let mut inverses = HashMap::new();
        for j in VarSet::full(n).subsets() {
            let mut b = model.b().clone();
            for i in j.iter() {
                for c in 0..n {
                    b[(i, c)] = 0.0;
                }
            }
            let inv = (eye.clone() - b)
                .try_inverse()
                .expect("weakly stable fixture");
            inverses.insert(j, inv);
        }
        EffectOracle { n, inverses }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The true experimental effect `t(source ~> target || j)`.
    pub fn effect(&self, source: usize, target: usize, j: VarSet) -> f64 {
        debug_assert!(j.contains(source) && !j.contains(target));
        self.inverses[&j][(target, source)]
    }

    /// The true direct effect `b(source -> target)`.
    pub fn direct(&self, source: usize, target: usize) -> f64 {
        self.effect(source, target, VarSet::full(self.n).without(target))
    }
}
