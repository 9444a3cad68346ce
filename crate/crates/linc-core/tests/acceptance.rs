//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its runtime once every assertion has held.

mod common;

use std::time::Instant;

use linc_core::algorithms::{
    dump_constraints, run_bilin, run_ehs, run_heh, run_lininf, AlgorithmConfig,
    EdgePredictionMatrix, EdgeStatus,
};
use linc_core::experiments::{exact_dataset, DataSet, EffectKey, ExperimentSpec};
use linc_core::faithfulness::{ConstraintStore, ZeroConstraint};
use linc_core::fixtures;
use linc_core::harness::{
    evaluate_predictions, random_experiments, run_benchmark, AlgorithmKind, BenchmarkConfig,
    SampleSize,
};
use linc_core::identifiability::{is_fully_identifiable, plan_experiments, spencer_min_experiments};
use linc_core::model::{random_model, LinearCyclicModel, RandomModelConfig};
use linc_core::solver::{LinearSystem, SolveOptions};
use linc_core::vars::VarSet;

use common::EffectOracle;

fn exact_datasets(model: &LinearCyclicModel, specs: &[ExperimentSpec]) -> Vec<DataSet> {
    specs
        .iter()
        .map(|s| exact_dataset(model, s).expect("stable fixture"))
        .collect()
}

/// Criterion 1: with the pair condition satisfied by a complete
/// single-intervention experiment set and exact covariances, EHS recovers
/// every entry of B within 1e-6 and leaves nothing unknown.
#[test]
fn criterion_1_theorem_1_end_to_end() {
    let start = Instant::now();
    let config = RandomModelConfig::new(5);
    let cfg = AlgorithmConfig::exact();
    for seed in 0..50u64 {
        let model = random_model(&config, 100 + seed).expect("generation");
        let specs = fixtures::single_intervention_experiments(5);
        let datasets = exact_datasets(&model, &specs);
        let out = run_ehs(5, &datasets, &cfg).expect("run");
        assert!(out.fully_determined, "seed {seed}: not fully determined");
        assert_eq!(out.predictions.count_unknown(), 0, "seed {seed}");
        for (s, t) in out.predictions.pairs().collect::<Vec<_>>() {
            let truth = model.direct_effect(s, t);
            match out.predictions.get(s, t) {
                EdgeStatus::Present(v) => assert!(
                    (v - truth).abs() < 1e-6,
                    "seed {seed}: b(x{}->x{}) = {v}, truth {truth}",
                    s + 1,
                    t + 1
                ),
                EdgeStatus::Absent => assert!(
                    truth.abs() < 1e-6,
                    "seed {seed}: x{}->x{} absent, truth {truth}",
                    s + 1,
                    t + 1
                ),
                EdgeStatus::Unknown => unreachable!(),
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "took {elapsed:?}, limit 30 s");
    println!(
        "ACCEPTANCE 1 (Theorem 1 end-to-end, 50 models n=5): PASS in {:.2?}",
        elapsed
    );
}

/// Criterion 2: the nesting identity between experimental effects holds on
/// oracle values for every valid (J_k, J_l, x_i, x_u) with residual < 1e-9,
/// across 200 random weakly stable models (n = 4, 5). The single-source
/// special case (J_k = {x_i}) is the total-effect decomposition.
#[test]
fn criterion_2_effect_identity_suite() {
    let start = Instant::now();
    let mut checked: u64 = 0;
    for idx in 0..200u64 {
        let n = if idx % 2 == 0 { 4 } else { 5 };
        let model = random_model(&RandomModelConfig::new(n), 200 + idx).expect("generation");
        let oracle = EffectOracle::new(&model);
        let full = VarSet::full(n);
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
                        let mut rhs = oracle.effect(i, u, j_l);
                        for j in j_l.minus(j_k).iter() {
                            rhs += oracle.effect(i, j, j_k) * oracle.effect(j, u, j_l);
                        }
                        let residual = (oracle.effect(i, u, j_k) - rhs).abs();
                        assert!(
                            residual < 1e-9,
                            "model {idx}: identity violated for i={i}, u={u}, \
                             J_k={j_k}, J_l={j_l}: residual {residual}"
                        );
                        checked += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "took {elapsed:?}, limit 60 s");
    println!(
        "ACCEPTANCE 2 (effect identity suite, {checked} instantiations): PASS in {:.2?}",
        elapsed
    );
}

fn check_constraint_soundness(
    model: &LinearCyclicModel,
    datasets: &[DataSet],
    label: &str,
) {
    let oracle = EffectOracle::new(model);
    let cfg = AlgorithmConfig::exact();
    let constraints = dump_constraints(datasets, &cfg).expect("pipeline");
    let mut store = ConstraintStore::new();
    for c in &constraints {
        match c {
            ZeroConstraint::EffectZero { key, provenance } => {
                let truth = oracle.effect(key.source, key.target, key.j);
                assert!(
                    truth.abs() < 1e-9,
                    "{label}: unsound zero {key} (rule {}, truth {truth})",
                    provenance.rule
                );
            }
            ZeroConstraint::ProductZero { a, b, provenance } => {
                let ta = oracle.effect(a.source, a.target, a.j);
                let tb = oracle.effect(b.source, b.target, b.j);
                assert!(
                    ta.abs() < 1e-9 || tb.abs() < 1e-9,
                    "{label}: unsound product {a} * {b} (rule {}, truths {ta}, {tb})",
                    provenance.rule
                );
            }
        }
        store.add_constraints(std::slice::from_ref(c));
    }
    // Saturation with the observed effects must only ever add true zeros.
    let mut values = std::collections::BTreeMap::new();
    for ds in datasets {
        values.extend(linc_core::experiments::observed_effects(ds));
    }
    let outcome = store.saturate(&values, model.n(), cfg.nonzero_tol);
    assert!(
        outcome.contradictions.is_empty(),
        "{label}: contradictions on faithful data"
    );
    for key in store.zero_keys() {
        let truth = oracle.effect(key.source, key.target, key.j);
        assert!(
            truth.abs() < 1e-9,
            "{label}: unsound saturated zero {key} (truth {truth})"
        );
    }
}

/// Criterion 3: every faithfulness-derived zero is a true zero and every
/// product constraint has a true-zero factor, on the fixture models and on
/// 50 random sparse four-variable models.
#[test]
fn criterion_3_faithfulness_soundness() {
    let start = Instant::now();

    let m3 = fixtures::m3();
    let m3_specs = vec![
        ExperimentSpec::null_experiment(3),
        ExperimentSpec::fully_observed(3, VarSet::singleton(0)).unwrap(),
        ExperimentSpec::fully_observed(3, VarSet::singleton(1)).unwrap(),
    ];
    check_constraint_soundness(&m3, &exact_datasets(&m3, &m3_specs), "M3");

    let m4 = fixtures::m4();
    let m4_specs = vec![
        ExperimentSpec::null_experiment(3),
        ExperimentSpec::fully_observed(3, VarSet::singleton(1)).unwrap(),
    ];
    check_constraint_soundness(&m4, &exact_datasets(&m4, &m4_specs), "M4");

    let m5 = fixtures::m5();
    let m5_specs = vec![
        ExperimentSpec::null_experiment(3),
        ExperimentSpec::fully_observed(3, VarSet::singleton(0)).unwrap(),
    ];
    check_constraint_soundness(&m5, &exact_datasets(&m5, &m5_specs), "M5");

    for seed in 0..50u64 {
        let model = random_model(&RandomModelConfig::new(4), 300 + seed).expect("generation");
        let specs = random_experiments(4, 4, 900 + seed);
        let datasets = exact_datasets(&model, &specs);
        check_constraint_soundness(&model, &datasets, &format!("random-4 seed {seed}"));
    }

    let elapsed = start.elapsed();
    println!(
        "ACCEPTANCE 3 (faithfulness soundness, fixtures + 50 random models): PASS in {:.2?}",
        elapsed
    );
}

/// Criterion 4: at the infinite sample limit EHS, HEH and LININF never
/// output a wrong status over 20 random 6-variable models with 5 random
/// overlapping experiments each. BILIN is exempt; its errors are counted.
#[test]
fn criterion_4_consistency_infinite_sample() {
    let start = Instant::now();
    let cfg = AlgorithmConfig::exact();
    let mut bilin_errors = 0usize;
    for seed in 0..20u64 {
        let model = random_model(&RandomModelConfig::new(6), 400 + seed).expect("generation");
        let specs = random_experiments(6, 5, 1300 + seed);
        let datasets = exact_datasets(&model, &specs);

        let runs: Vec<(&str, EdgePredictionMatrix)> = vec![
            ("ehs", run_ehs(6, &datasets, &cfg).unwrap().predictions),
            ("heh", run_heh(6, &datasets, &cfg).unwrap().predictions),
            (
                "lininf",
                run_lininf(6, &datasets, &cfg, seed).unwrap().predictions,
            ),
        ];
        for (name, predictions) in &runs {
            let counts = evaluate_predictions(predictions, &model, 1e-9);
            assert_eq!(
                counts.incorrect_absent + counts.incorrect_present,
                0,
                "seed {seed}: {name} made {} wrong absent and {} wrong present calls",
                counts.incorrect_absent,
                counts.incorrect_present
            );
        }

        let bilin = run_bilin(6, &datasets, &cfg, seed).unwrap().predictions;
        let counts = evaluate_predictions(&bilin, &model, 1e-9);
        bilin_errors += counts.incorrect_absent + counts.incorrect_present;
    }
    let elapsed = start.elapsed();
    println!(
        "ACCEPTANCE 4 (exact-mode consistency, 20 models n=6; BILIN exempt with {} errors): \
         PASS in {:.2?}",
        bilin_errors, elapsed
    );
}

/// Criterion 5: the four-variable case study. The constructed model is
/// first verified against the true-effect oracle (no x1-x3 arcs, x4 causes
/// nothing, x2 -> x1 and x3 -> x4 really present), then LININF with the two
/// overlapping experiments must mark the x1-x3 and x4-outgoing direct
/// effects absent and leave exactly x2 -> x1 and x3 -> x4 undetermined.
#[test]
fn criterion_5_figure_two_scenario() {
    let start = Instant::now();
    let model = fixtures::fig2_model();
    let oracle = EffectOracle::new(&model);

    // Oracle verification of the case-study conclusions in the model.
    let absent_truth = [(0, 2), (2, 0), (3, 0), (3, 1), (3, 2)];
    for (s, t) in absent_truth {
        assert!(
            oracle.direct(s, t).abs() < 1e-12,
            "fixture has an unexpected edge x{}->x{}",
            s + 1,
            t + 1
        );
    }
    assert!(oracle.direct(1, 0).abs() > 0.1, "x2 -> x1 must be present");
    assert!(oracle.direct(2, 3).abs() > 0.1, "x3 -> x4 must be present");

    let datasets = exact_datasets(&model, &fixtures::fig2_experiments());
    let out = run_lininf(4, &datasets, &AlgorithmConfig::exact(), 0).expect("run");

    // All arcs between x1 and x3, and every arc out of x4, are absent.
    for (s, t) in absent_truth {
        assert_eq!(
            out.predictions.get(s, t),
            EdgeStatus::Absent,
            "x{}->x{} should be discovered absent",
            s + 1,
            t + 1
        );
    }
    // Exactly the two true-but-unidentifiable arcs stay undetermined.
    let unknown: Vec<(usize, usize)> = out
        .predictions
        .pairs()
        .filter(|&(s, t)| out.predictions.get(s, t).is_unknown())
        .collect();
    assert_eq!(
        unknown,
        vec![(1, 0), (2, 3)],
        "exactly x2->x1 and x3->x4 must remain undetermined"
    );
    // Everything reported matches the ground truth.
    let counts = evaluate_predictions(&out.predictions, &model, 1e-9);
    assert_eq!(counts.incorrect_absent + counts.incorrect_present, 0);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 5, "took {elapsed:?}, limit 5 s");
    println!("ACCEPTANCE 5 (case-study scenario): PASS in {:.2?}", elapsed);
}

/// Criterion 6: qualitative orderings at desk scale (20 models, 1000
/// samples): EHS reports less than LININF, HEH finds more correct absences
/// than EHS, and more than half of the true edges stay non-"present" for
/// every algorithm.
#[test]
fn criterion_6_qualitative_orderings() {
    let start = Instant::now();
    let config = BenchmarkConfig {
        model_count: 20,
        sample_sizes: vec![SampleSize::Finite(1000)],
        seed: 7,
        ..BenchmarkConfig::default()
    };
    let report = run_benchmark(&config).expect("benchmark");
    assert_eq!(report.table.models_failed, 0);
    let size = SampleSize::Finite(1000);
    let row = |kind: AlgorithmKind| report.table.row(kind, size).expect("cell");

    let ehs = row(AlgorithmKind::Ehs);
    let heh = row(AlgorithmKind::Heh);
    let lininf = row(AlgorithmKind::Lininf);
    let bilin = row(AlgorithmKind::Bilin);

    assert!(
        ehs.counts.predictions() < lininf.counts.predictions(),
        "EHS reported {} vs LININF {}",
        ehs.counts.predictions(),
        lininf.counts.predictions()
    );
    assert!(
        heh.counts.correct_absent > ehs.counts.correct_absent,
        "HEH correct absences {} vs EHS {}",
        heh.counts.correct_absent,
        ehs.counts.correct_absent
    );
    let total_edges = report.table.total_true_edges;
    for row in [ehs, heh, lininf, bilin] {
        assert!(
            row.counts.correct_present * 2 < total_edges,
            "{}: {} of {} true edges identified; more than half should stay undetermined",
            row.algorithm,
            row.counts.correct_present,
            total_edges
        );
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 600, "took {elapsed:?}, limit 10 min");
    println!(
        "ACCEPTANCE 6 (desk-scale orderings, 20 models at 1000 samples): PASS in {:.2?}",
        elapsed
    );
}

/// Criterion 7: determined/undetermined classification agrees with a
/// brute-force null-space oracle on 500 random small systems.
#[test]
fn criterion_7_solver_oracle() {
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    let start = Instant::now();

    // Gram-Schmidt row-space basis; project a random vector onto the null
    // space. Independent of the SVD solve path.
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

    let mut rng = StdRng::seed_from_u64(7000);
    let mut disagreements = 0usize;
    for _case in 0..500 {
        let n = rng.gen_range(2..=8);
        let m = rng.gen_range(1..=10);
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        let mut sys: LinearSystem<usize> = LinearSystem::new();
        for c in 0..n {
            sys.register(c);
        }
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
            if report.is_determined(&c) != oracle {
                disagreements += 1;
            }
        }
    }
    assert_eq!(disagreements, 0, "solver oracle disagreements");
    let elapsed = start.elapsed();
    println!(
        "ACCEPTANCE 7 (solver vs null-space oracle, 500 systems): PASS in {:.2?}",
        elapsed
    );
}

/// Criterion 8: the minimal-experiment bound and the planner.
#[test]
fn criterion_8_planner_bounds() {
    let start = Instant::now();
    assert_eq!(spencer_min_experiments(6), 4);
    let plan = plan_experiments(6, &[]).expect("plan");
    assert!(plan.len() <= 6, "plan used {} experiments", plan.len());
    let (ok, missing) = is_fully_identifiable(&plan, 6);
    assert!(ok, "missing pairs: {missing:?}");
    let elapsed = start.elapsed();
    println!(
        "ACCEPTANCE 8 (minimal experiment bound and planner): PASS in {:.2?}",
        elapsed
    );
}

/// Companion check for criterion 5: the case-study recordings agree with
/// the true-effect oracle, so the scenario's derivations are exact.
#[test]
fn criterion_5_companion_recorded_effects_are_exact() {
    let model = fixtures::fig2_model();
    let oracle = EffectOracle::new(&model);
    let datasets = exact_datasets(&model, &fixtures::fig2_experiments());
    let out = run_lininf(4, &datasets, &AlgorithmConfig::exact(), 0).expect("run");
    assert!(!out.recorded.is_empty());
    for (key, value) in &out.recorded {
        let truth = oracle.effect(key.source, key.target, key.j);
        assert!(
            (value - truth).abs() < 1e-9,
            "{key}: recorded {value}, truth {truth}"
        );
    }
    // The two identified edges carry their exact coefficients.
    let b12 = EffectKey::new(0, 1, VarSet::from_iter([0, 2, 3]));
    let b24 = EffectKey::new(1, 3, VarSet::from_iter([0, 1, 2]));
    assert!((out.recorded[&b12] - 0.7).abs() < 1e-9);
    assert!((out.recorded[&b24] - 0.8).abs() < 1e-9);
}
