//! Faithfulness rules: converting minimal (in)dependence records into zero
//! and product-zero constraints on experimental effects, plus the superset
//! closure and product resolution over a constraint store.
//!
//! The conclusions are all *graphical*: an emitted `EffectZero(x ~> y || J)`
//! asserts that no directed path from `x` to `y` avoids `J \ {x}` in the
//! data-generating graph, and an emitted `ProductZero(a, b)` asserts that at
//! least one of the two path sets is empty. Zeros therefore propagate to all
//! supersets of the intervention set, and a product with one factor known to
//! be nonzero forces the other factor to zero.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{EffectKey, ExperimentSpec};
use crate::independence::{MinimalRecord, RecordKind};
use crate::vars::VarSet;

/// A faithfulness-derived fact about experimental effects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ZeroConstraint {
    /// The effect is exactly zero (no contributing directed paths).
    EffectZero { key: EffectKey, provenance: Provenance },
    /// At least one of the two effects is zero. Two shapes are emitted: the
    /// chained form (`a.target == b.source`, no directed path through the
    /// middle variable) and the fork form (`a.source == b.source`, no common
    /// cause — the shared source may be hidden in the generating dataset).
    ProductZero {
        a: EffectKey,
        b: EffectKey,
        provenance: Provenance,
    },
}

/// Which rule produced a constraint, and from what record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub rule: String,
    pub detail: String,
}

impl Provenance {
    fn new(rule: &str, detail: String) -> Self {
        Provenance {
            rule: rule.to_string(),
            detail,
        }
    }
}

/// Apply the faithfulness rules to the minimal records of one experiment.
///
/// Emitted constraints, with `J` the experiment's intervention set and the
/// records' fixed context `D`:
///
/// - R1 (marginal independence, `C = ∅`) and R2 (minimal independence
///   through `C`): `x ⊥ y | D ∪ [C]` yields `EffectZero(x ~> y || {x} ∪ J ∪
///   D ∪ C)` and the reversed constraint, each skipped when its target is
///   intervened or conditioned (the data say nothing about edges into such
///   variables).
/// - R3 (unshielded collider): `x ⊥ y | D` plus the minimal dependence
///   `x ⊥̸ y | D ∪ [{w}]` with `w` non-intervened yields
///   `EffectZero(w ~> x || {w} ∪ J ∪ D)` and likewise for `y`.
/// - R4 (product expansion, chained): every emitted `EffectZero(x ~> y || K)`
///   is expanded over intermediates `u ∉ K ∪ {y}` into
///   `ProductZero(x ~> u || K, u ~> y || (K \ {x}) ∪ {u})`.
/// - R4 (product expansion, fork): each independence also rules out common
///   causes: for every `v` outside `D ∪ C ∪ {x, y}` — including variables
///   hidden in this experiment — `ProductZero(v ~> x || {v} ∪ J ∪ D ∪ C,
///   v ~> y || {v} ∪ J ∪ D ∪ C)`, with either side dropped when its target
///   is intervened or conditioned (the key would be malformed).
pub fn derive_constraints(
    records: &[MinimalRecord],
    spec: &ExperimentSpec,
) -> Result<Vec<ZeroConstraint>> {
    let n = spec.n();
    let measured = spec.measured();
    for r in records {
        let used = VarSet::from_iter([r.x, r.y]).union(r.c).union(r.d);
        if !used.is_subset(measured) {
            return Err(Error::InvalidSpec(format!(
                "record over {used} references variables hidden in this experiment"
            )));
        }
    }

    let mut out = Vec::new();
    let emit_zero = |out: &mut Vec<ZeroConstraint>, key: EffectKey, provenance: Provenance| {
        out.push(ZeroConstraint::EffectZero { key, provenance });
        for product in expand_product_rule(&key, n) {
            out.push(product);
        }
    };

    for record in records {
        match record.kind {
            RecordKind::Independence => {
                let context = spec.intervened().union(record.d).union(record.c);
                let rule = if record.d.union(record.c).is_empty() {
                    "R1"
                } else {
                    "R2"
                };
                for (src, tgt) in [(record.x, record.y), (record.y, record.x)] {
                    if context.contains(tgt) {
                        continue;
                    }
                    let key = EffectKey::new(src, tgt, context.with(src));
                    let detail = format!(
                        "{} ⊥ {} | {} in experiment J={}",
                        crate::vars::var_name(record.x),
                        crate::vars::var_name(record.y),
                        record.d.union(record.c),
                        spec.intervened()
                    );
                    emit_zero(&mut out, key, Provenance::new(rule, detail));
                }
                // Fork form: no common cause of x and y outside the
                // separating context, hidden or not.
                for v in 0..n {
                    if v == record.x || v == record.y || record.c.contains(v) || record.d.contains(v)
                    {
                        continue;
                    }
                    let a = EffectKey::new(v, record.x, context.with(v));
                    let b = EffectKey::new(v, record.y, context.with(v));
                    if a.validate(n).is_ok() && b.validate(n).is_ok() {
                        let detail = format!(
                            "{} ⊥ {} | {} in experiment J={}: no common cause through {}",
                            crate::vars::var_name(record.x),
                            crate::vars::var_name(record.y),
                            record.d.union(record.c),
                            spec.intervened(),
                            crate::vars::var_name(v)
                        );
                        out.push(ZeroConstraint::ProductZero {
                            a,
                            b,
                            provenance: Provenance::new("R4", detail),
                        });
                    }
                }
            }
            RecordKind::Dependence => {
                // Unshielded collider: only singleton brackets are used.
                if record.c.len() != 1 {
                    continue;
                }
                let w = record.c.iter().next().expect("singleton");
                if spec.intervened().contains(w) {
                    continue;
                }
                let context = spec.intervened().union(record.d);
                for tgt in [record.x, record.y] {
                    if context.with(w).contains(tgt) {
                        continue;
                    }
                    let key = EffectKey::new(w, tgt, context.with(w));
                    let detail = format!(
                        "{} ⊥̸ {} | {}∪[{}] in experiment J={}",
                        crate::vars::var_name(record.x),
                        crate::vars::var_name(record.y),
                        record.d,
                        crate::vars::var_name(w),
                        spec.intervened()
                    );
                    emit_zero(&mut out, key, Provenance::new("R3", detail));
                }
            }
        }
    }
    Ok(out)
}

/// Eq.-6-shaped expansion of a graphical zero: if no directed path runs from
/// `key.source` to `key.target` avoiding `key.j \ {source}`, then for every
/// other variable `u` the path pair through `u` cannot both exist.
pub fn expand_product_rule(key: &EffectKey, n: usize) -> Vec<ZeroConstraint> {
    let avoid = key.j.without(key.source);
    let mut out = Vec::new();
    for u in 0..n {
        if u == key.source || u == key.target || avoid.contains(u) {
            continue;
        }
        let a = EffectKey::new(key.source, u, avoid.with(key.source));
        let b = EffectKey::new(u, key.target, avoid.with(u));
        out.push(ZeroConstraint::ProductZero {
            a,
            b,
            provenance: Provenance::new("R4", format!("expansion of zero {key} through {u}", u = crate::vars::var_name(u))),
        });
    }
    out
}

/// Outcome of one product-resolution pass.
#[derive(Debug, Clone, Default)]
pub struct ResolveOutcome {
    /// Keys newly forced to zero.
    pub new_zeros: Vec<EffectKey>,
    /// Products whose factors are both recorded as nonzero (unfaithful or
    /// noisy data); the affected products are skipped, nothing else is
    /// poisoned.
    pub contradictions: Vec<String>,
}

/// Store of zero and product-zero constraints with lazy superset closure.
///
/// Supersets implied by Eq.-5-style propagation are never materialized:
/// [`ConstraintStore::implied_zero`] answers by subset query.
#[derive(Debug, Clone, Default)]
pub struct ConstraintStore {
    /// Explicit zeros per (source, target).
    zeros: HashMap<(usize, usize), Vec<VarSet>>,
    /// Product constraints, deduplicated.
    products: Vec<(EffectKey, EffectKey)>,
    product_set: HashSet<(EffectKey, EffectKey)>,
}

impl ConstraintStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert an explicit zero. Returns `true` when it was not already
    /// implied. Stored supersets of the new set are pruned.
    pub fn add_zero(&mut self, key: EffectKey) -> bool {
        if self.implied_zero(&key) {
            return false;
        }
        let entry = self.zeros.entry((key.source, key.target)).or_default();
        entry.retain(|&j| !key.j.is_subset(j));
        entry.push(key.j);
        true
    }

    pub fn add_product(&mut self, a: EffectKey, b: EffectKey) -> bool {
        if self.product_set.contains(&(a, b)) {
            return false;
        }
        self.product_set.insert((a, b));
        self.products.push((a, b));
        true
    }

    /// Ingest a batch of derived constraints.
    pub fn add_constraints(&mut self, constraints: &[ZeroConstraint]) {
        for c in constraints {
            match c {
                ZeroConstraint::EffectZero { key, .. } => {
                    self.add_zero(*key);
                }
                ZeroConstraint::ProductZero { a, b, .. } => {
                    self.add_product(*a, *b);
                }
            }
        }
    }

    /// Is the key zero under the stored constraints and the superset rule?
    pub fn implied_zero(&self, key: &EffectKey) -> bool {
        self.zeros
            .get(&(key.source, key.target))
            .map_or(false, |sets| sets.iter().any(|j| j.is_subset(key.j)))
    }

    pub fn n_products(&self) -> usize {
        self.products.len()
    }

    pub fn zero_keys(&self) -> impl Iterator<Item = EffectKey> + '_ {
        self.zeros
            .iter()
            .flat_map(|(&(s, t), sets)| sets.iter().map(move |&j| EffectKey::new(s, t, j)))
    }

    pub fn products(&self) -> &[(EffectKey, EffectKey)] {
        &self.products
    }

    /// True when a stored product constraint implies that the chained pair
    /// `f1 = t(x ~> v || ·)`, `f2 = t(v ~> y || ·)` multiplies to zero: a
    /// stored product with the same endpoints whose avoid-sets are contained
    /// in the queried ones (paths surviving more cuts survive fewer).
    pub fn product_implies_term_zero(&self, f1: &EffectKey, f2: &EffectKey) -> bool {
        self.products.iter().any(|(a, b)| {
            a.source == f1.source
                && a.target == f1.target
                && b.source == f2.source
                && b.target == f2.target
                && a.j.without(a.source).is_subset(f1.j.without(f1.source))
                && b.j.without(b.source).is_subset(f2.j.without(f2.source))
        })
    }

    /// One resolution pass: any product with a factor recorded nonzero (with
    /// magnitude above `nonzero_tol`) forces the other factor to zero.
    pub fn resolve_products(
        &mut self,
        values: &BTreeMap<EffectKey, f64>,
        nonzero_tol: f64,
    ) -> ResolveOutcome {
        let mut outcome = ResolveOutcome::default();
        let known_nonzero = |store: &Self, key: &EffectKey| -> bool {
            !store.implied_zero(key)
                && values.get(key).map_or(false, |v| v.abs() > nonzero_tol)
        };
        let products = self.products.clone();
        for (a, b) in products {
            let a_zero = self.implied_zero(&a);
            let b_zero = self.implied_zero(&b);
            if a_zero || b_zero {
                continue; // satisfied
            }
            let a_nonzero = known_nonzero(self, &a);
            let b_nonzero = known_nonzero(self, &b);
            match (a_nonzero, b_nonzero) {
                (true, true) => outcome
                    .contradictions
                    .push(format!("both factors of {a} * {b} = 0 are recorded nonzero")),
                (true, false) => {
                    if self.add_zero(b) {
                        outcome.new_zeros.push(b);
                    }
                }
                (false, true) => {
                    if self.add_zero(a) {
                        outcome.new_zeros.push(a);
                    }
                }
                (false, false) => {}
            }
        }
        outcome
    }

    /// Resolve products to a fixpoint, expanding each newly derived zero
    /// through the product rule so chains of resolutions can fire.
    pub fn saturate(
        &mut self,
        values: &BTreeMap<EffectKey, f64>,
        n: usize,
        nonzero_tol: f64,
    ) -> ResolveOutcome {
        let mut total = ResolveOutcome::default();
        loop {
            let pass = self.resolve_products(values, nonzero_tol);
            if pass.new_zeros.is_empty() && pass.contradictions.is_empty() {
                break;
            }
            for z in &pass.new_zeros {
                for c in expand_product_rule(z, n) {
                    if let ZeroConstraint::ProductZero { a, b, .. } = c {
                        self.add_product(a, b);
                    }
                }
            }
            let stalled = pass.new_zeros.is_empty();
            total.new_zeros.extend(pass.new_zeros);
            total.contradictions.extend(pass.contradictions);
            if stalled {
                break;
            }
        }
        total
    }
}

/// Serializable form of one constraint, for JSON-lines audit dumps.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstraintJson {
    pub kind: String,
    pub keys: Vec<KeyJson>,
    pub rule: String,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KeyJson {
    pub source: String,
    pub target: String,
    #[serde(rename = "J")]
    pub j: Vec<String>,
}

impl KeyJson {
    fn from_key(key: &EffectKey) -> Self {
        KeyJson {
            source: crate::vars::var_name(key.source),
            target: crate::vars::var_name(key.target),
            j: key.j.names(),
        }
    }
}

impl ConstraintJson {
    pub fn from_constraint(c: &ZeroConstraint) -> Self {
        match c {
            ZeroConstraint::EffectZero { key, provenance } => ConstraintJson {
                kind: "effect_zero".into(),
                keys: vec![KeyJson::from_key(key)],
                rule: provenance.rule.clone(),
                detail: provenance.detail.clone(),
            },
            ZeroConstraint::ProductZero { a, b, provenance } => ConstraintJson {
                kind: "product_zero".into(),
                keys: vec![KeyJson::from_key(a), KeyJson::from_key(b)],
                rule: provenance.rule.clone(),
                detail: provenance.detail.clone(),
            },
        }
    }
}

/// Dump constraints as JSON lines.
pub fn constraints_to_json_lines(constraints: &[ZeroConstraint]) -> String {
    constraints
        .iter()
        .map(|c| serde_json::to_string(&ConstraintJson::from_constraint(c)).expect("serializable"))
        .collect::<Vec<_>>()
        .join("\n")
}
