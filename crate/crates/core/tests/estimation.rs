mod common;

use backdoor::baselines::{allz_ate, allz_ate_cov, entner_search, marginal_ate, marginal_ate_cov, EntnerConfig, SearchStrategy};
use backdoor::estimation::{backdoor_ate, backdoor_ate_cov, backdoor_fit};
use backdoor::graph::{CausalGraph, GraphSpec, NodeSpec, Role};
use backdoor::scm::{simulation_sem, BlockDims, Dataset, LinearSem, SimulationNoise};
use backdoor::stats::{bonferroni, independence_test, sample_cov};
use common::{brute_valid_backdoor, random_sem, subsets};
use proptest::prelude::*;
use std::collections::BTreeMap;

fn cov_index(sem: &LinearSem, i: usize) -> usize {
    sem.population_dataset_view().index_of(&format!("v{i}")).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn population_backdoor_identity(seed in any::<u64>(), n in 3usize..=8) {
        let rs = random_sem(seed, n, 0.45);
        let cov = rs.sem.population_dataset_view();
        let (x, y) = (cov_index(&rs.sem, rs.x), cov_index(&rs.sem, rs.y));
        let zs: Vec<usize> = (0..n).filter(|&v| v != rs.x && v != rs.y).collect();
        for s in subsets(&zs) {
            if brute_valid_backdoor(n, &rs.edges, rs.x, rs.y, &s) {
                let idx: Vec<usize> = s.iter().map(|&v| cov_index(&rs.sem, v)).collect();
                let est = backdoor_ate_cov(&cov, x, y, &idx).unwrap();
                prop_assert!((est - rs.sem.omega()).abs() < 1e-10, "{} vs {}", est, rs.sem.omega());
            }
        }
    }

    #[test]
    fn population_baselines_match_closed_forms(seed in any::<u64>(), n in 3usize..=7) {
        let rs = random_sem(seed, n, 0.5);
        let cov = rs.sem.population_dataset_view();
        let m = cov.matrix();
        let (x, y) = (cov_index(&rs.sem, rs.x), cov_index(&rs.sem, rs.y));
        prop_assert!((marginal_ate_cov(&cov, x, y).unwrap() - m[(x, y)] / m[(x, x)]).abs() < 1e-10);
        let z: Vec<usize> = (0..cov.dim()).filter(|&v| v != x && v != y).collect();
        // X coefficient of Y ~ X + Z is Cov(X, Y | Z) / Var(X | Z).
        let c = |a: usize, b: usize| common::schur_partial_corr(m, a, b, &z)
            * (cond_var(m, a, &z) * cond_var(m, b, &z)).sqrt();
        let closed = c(x, y) / cond_var(m, x, &z);
        prop_assert!((allz_ate_cov(&cov, x, y, &z).unwrap() - closed).abs() < 1e-10);
    }
}

fn cond_var(m: &nalgebra::DMatrix<f64>, a: usize, s: &[usize]) -> f64 {
    if s.is_empty() {
        return m[(a, a)];
    }
    let ss = nalgebra::DMatrix::from_fn(s.len(), s.len(), |i, k| m[(s[i], s[k])]);
    let sa = nalgebra::DVector::from_fn(s.len(), |i, _| m[(s[i], a)]);
    m[(a, a)] - sa.dot(&ss.lu().solve(&sa).unwrap())
}

fn sim(seed: u64, sigma_x2: f64, omega: f64, n: usize) -> Dataset {
    simulation_sem(BlockDims::uniform(3), SimulationNoise::with_treatment_noise(sigma_x2), omega, 0.5, seed)
        .unwrap()
        .sample_data(n, seed + 1000, false)
        .unwrap()
        .observed()
}

fn block(data: &Dataset, prefix: &str) -> Vec<usize> {
    data.columns().iter().enumerate().filter(|(_, c)| c.id.starts_with(prefix)).map(|(i, _)| i).collect()
}

#[test]
fn oracle_valid_set_within_two_se() {
    for omega in [0.1, 0.5] {
        let mut inside = 0;
        for seed in 0..20 {
            let data = sim(seed, 0.6, omega, 10_000);
            let fit = backdoor_fit(&data, &block(&data, "z2_")).unwrap();
            inside += ((fit.ate - omega).abs() < 2.0 * fit.std_error) as usize;
        }
        // 2 SE covers about 95% of runs
        assert!(inside >= 16, "ω = {omega}: {inside}/20 within 2 SE");
    }
}

#[test]
fn exogenous_covariate_leaves_population_estimate() {
    let sem = simulation_sem(BlockDims::uniform(2), SimulationNoise::with_treatment_noise(0.6), 0.5, 0.5, 3).unwrap();
    let cov = sem.population_dataset_view();
    let l = |s: &str| cov.index_of(s).unwrap();
    let base = vec![l("z2_0"), l("z2_1")];
    let a = backdoor_ate_cov(&cov, l("x"), l("y"), &base).unwrap();
    for extra in ["z3_0", "z4_0", "z4_1"] {
        let mut s = base.clone();
        s.push(l(extra));
        assert!((backdoor_ate_cov(&cov, l("x"), l("y"), &s).unwrap() - a).abs() < 1e-10);
    }
    assert!((a - 0.5).abs() < 1e-10);
}

#[test]
fn sample_error_shrinks_with_n() {
    // Independent data streams per n; a shared seed would make the small
    // sample a prefix of the large one.
    let mean_err = |n: usize| {
        (0..100u64)
            .map(|seed| {
                let sem = simulation_sem(BlockDims::uniform(3), SimulationNoise::with_treatment_noise(0.6), 0.5, 0.5, seed).unwrap();
                let data = sem.sample_data(n, seed * 7 + n as u64, false).unwrap().observed();
                (backdoor_ate(&data, &block(&data, "z2_")).unwrap() - 0.5).abs()
            })
            .sum::<f64>()
            / 100.0
    };
    let (small, big) = (mean_err(1000), mean_err(4000));
    // quadrupling n halves the error up to noise
    assert!(big < 0.7 * small && big > 0.3 * small, "{small} -> {big}");
}

#[test]
fn empty_set_is_marginal_and_all_z_is_allz() {
    let data = sim(2, 0.6, 0.5, 2000);
    assert!((backdoor_ate(&data, &[]).unwrap() - marginal_ate(&data).unwrap()).abs() < 1e-12);
    assert!((backdoor_ate(&data, &data.z_columns()).unwrap() - allz_ate(&data).unwrap()).abs() < 1e-12);
}

fn small_graph(edges: &[(&str, &str)], coeff: f64) -> LinearSem {
    let nodes = vec![
        NodeSpec::new("w", Role::W),
        NodeSpec::new("z", Role::Z),
        NodeSpec::new("x", Role::X),
        NodeSpec::new("y", Role::Y),
    ];
    let spec = GraphSpec { nodes, edges: edges.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(), treatment_active: true };
    let g = CausalGraph::new(spec).unwrap();
    let coeffs: BTreeMap<(String, String), f64> =
        edges.iter().map(|(a, b)| ((a.to_string(), b.to_string()), if *a == "x" { 0.5 } else { coeff })).collect();
    LinearSem::new(g, &coeffs, &BTreeMap::new()).unwrap()
}

#[test]
fn entner_textbook_and_unsatisfiable() {
    let textbook = small_graph(&[("w", "x"), ("z", "x"), ("z", "y"), ("x", "y")], 0.8);
    for strategy in [SearchStrategy::Greedy, SearchStrategy::Random] {
        let data = textbook.sample_data(10_000, 5, false).unwrap();
        let r = entner_search(&data, &EntnerConfig { strategy, ..Default::default() }).unwrap();
        assert!(r.certified);
        assert_eq!(r.zstar_ids, vec!["z".to_owned()]);
        let fit = backdoor_fit(&data, &r.zstar).unwrap();
        assert!((fit.ate - 0.5).abs() < 2.0 * fit.std_error);
        self_consistent(&data, &r);
    }
    // W -> Y directly: no subset can separate W from Y given X.
    let leaky = small_graph(&[("w", "x"), ("w", "y"), ("z", "x"), ("z", "y"), ("x", "y")], 0.8);
    for seed in 0..5 {
        let data = leaky.sample_data(10_000, seed, false).unwrap();
        let r = entner_search(&data, &EntnerConfig::default()).unwrap();
        assert!(!r.certified, "seed {seed}");
        assert_eq!(r.zstar, data.z_columns());
    }
}

fn self_consistent(data: &Dataset, r: &backdoor::baselines::EntnerResult) {
    let all: Vec<usize> = (0..data.n_cols()).collect();
    let cov = sample_cov(data, &all).unwrap();
    let w = data.role_column(Role::W).unwrap();
    let x = data.role_column(Role::X).unwrap();
    let y = data.role_column(Role::Y).unwrap();
    let level = bonferroni(0.05, r.tests_run).unwrap();
    let mut with_x = r.zstar.clone();
    with_x.push(x);
    assert!(!independence_test(&cov, w, y, &with_x, level).unwrap().reject);
    assert!(independence_test(&cov, w, y, &r.zstar, level).unwrap().reject);
}

#[test]
fn entner_certificates_are_self_consistent() {
    for seed in 0..10 {
        let data = sim(seed, 0.6, 0.5, 4000).standardize().unwrap();
        let r = entner_search(&data, &EntnerConfig::default()).unwrap();
        if r.certified {
            self_consistent(&data, &r);
        }
    }
}

#[test]
#[ignore = "the simulation graph never certifies graphically; sample search certifies in most runs (see ledger)"]
fn entner_matches_graphical_oracle() {
    let g = backdoor::scm::build_simulation_graph(BlockDims::uniform(3)).unwrap();
    let mut matches = 0;
    for seed in 0..20 {
        let data = sim(seed, 0.6, 0.5, 10_000).standardize().unwrap();
        let r = entner_search(&data, &EntnerConfig::default()).unwrap();
        let refs: Vec<&str> = r.zstar_ids.iter().map(|s| s.as_str()).collect();
        let oracle = g.entner_pair_holds("w", &refs).unwrap();
        matches += (r.certified == oracle) as usize;
    }
    assert!(matches >= 16, "{matches}/20 match the graphical oracle");
}
