//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use backdoor::graph::{CausalGraph, GraphSpec, NodeSpec, Role};
use backdoor::scm::{sample_parameters, LinearSem};
use backdoor::stats::{CovView, SampleSize};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Nodes `0..n` with edges `i -> j` only for `i < j`, each with probability `p`.
pub fn random_dag(rng: &mut impl Rng, n: usize, p: f64) -> Vec<(usize, usize)> {
    let mut edges = Vec::new();
    for j in 0..n {
        for i in 0..j {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    edges
}

fn descendants(n: usize, edges: &[(usize, usize)], v: usize) -> Vec<bool> {
    let mut seen = vec![false; n];
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        if seen[u] {
            continue;
        }
        seen[u] = true;
        stack.extend(edges.iter().filter(|e| e.0 == u).map(|e| e.1));
    }
    seen
}

/// d-separation by enumerating every simple path of the skeleton between
/// `a` and `b` and checking each for a blocking node.
pub fn brute_d_separated(n: usize, edges: &[(usize, usize)], a: usize, b: usize, given: &[usize]) -> bool {
    let in_s = |v: usize| given.contains(&v);
    let desc: Vec<Vec<bool>> = (0..n).map(|v| descendants(n, edges, v)).collect();
    let opened = |v: usize| (0..n).any(|d| desc[v][d] && in_s(d));
    let has = |p: usize, c: usize| edges.contains(&(p, c));
    let nbrs: Vec<Vec<usize>> = (0..n).map(|v| (0..n).filter(|&u| has(u, v) || has(v, u)).collect()).collect();

    fn walk(
        path: &mut Vec<usize>,
        b: usize,
        nbrs: &[Vec<usize>],
        blocked: &dyn Fn(usize, usize, usize) -> bool,
    ) -> bool {
        let last = *path.last().unwrap();
        if last == b {
            return path.windows(3).all(|w| !blocked(w[0], w[1], w[2]));
        }
        for &next in &nbrs[last] {
            if path.contains(&next) {
                continue;
            }
            path.push(next);
            let found = walk(path, b, nbrs, blocked);
            path.pop();
            if found {
                return true;
            }
        }
        false
    }
    let blocked = |p: usize, m: usize, q: usize| {
        let collider = has(p, m) && has(q, m);
        if collider {
            !opened(m)
        } else {
            in_s(m)
        }
    };
    !walk(&mut vec![a], b, &nbrs, &blocked)
}

/// Brute-force backdoor check: no member descends from `x`, and `z`
/// d-separates `x` from `y` once the edge `x -> y` is removed.
pub fn brute_valid_backdoor(n: usize, edges: &[(usize, usize)], x: usize, y: usize, z: &[usize]) -> bool {
    let desc = descendants(n, edges, x);
    if z.iter().any(|&v| desc[v]) {
        return false;
    }
    let cut: Vec<(usize, usize)> = edges.iter().copied().filter(|&e| e != (x, y)).collect();
    brute_d_separated(n, &cut, x, y, z)
}

pub fn subsets(items: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
    (0u32..1 << items.len()).map(move |mask| (0..items.len()).filter(|&i| mask >> i & 1 == 1).map(|i| items[i]).collect())
}

/// Random SEM with roles: node `x` is X, a later node `y` is Y with the edge
/// `x -> y` always present, every other node is Z. Ids are `v{i}`.
pub struct RandomSem {
    pub sem: LinearSem,
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub x: usize,
    pub y: usize,
}

pub fn random_sem(seed: u64, n: usize, p: f64) -> RandomSem {
    let mut r = rng(seed);
    let mut edges = random_dag(&mut r, n, p);
    let x = r.random_range(0..n - 1);
    let y = r.random_range(x + 1..n);
    if !edges.contains(&(x, y)) {
        edges.push((x, y));
    }
    let nodes = (0..n)
        .map(|i| {
            let role = if i == x {
                Role::X
            } else if i == y {
                Role::Y
            } else {
                Role::Z
            };
            NodeSpec::new(format!("v{i}"), role)
        })
        .collect();
    let spec = GraphSpec {
        nodes,
        edges: edges.iter().map(|&(a, b)| (format!("v{a}"), format!("v{b}"))).collect(),
        treatment_active: true,
    };
    let g = CausalGraph::new(spec).unwrap();
    let mut sem = sample_parameters(&g, seed ^ 0x5eed, 0.5).unwrap();
    let omega = 0.25 + r.random::<f64>();
    sem.set_omega(omega).unwrap();
    RandomSem { sem, n, edges, x, y }
}

/// `A Aᵀ + 0.1 I` for a standard normal `A`: well conditioned and PD.
pub fn random_pd(rng: &mut impl Rng, p: usize) -> CovView {
    let a = DMatrix::<f64>::from_fn(p, p, |_, _| rng.sample(StandardNormal));
    let m = &a * a.transpose() + DMatrix::identity(p, p) * 0.1;
    let labels = (0..p).map(|i| format!("c{i}")).collect();
    CovView::new(m, labels, SampleSize::Finite(1000)).unwrap()
}

/// Covariance of (W, Y, X, Z_1..Z_d) from an explicit data matrix with
/// columns in that order, computed directly with two-pass sums.
pub fn column_cov(cols: &[Vec<f64>]) -> DMatrix<f64> {
    let n = cols[0].len() as f64;
    let means: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / n).collect();
    DMatrix::from_fn(cols.len(), cols.len(), |i, j| {
        cols[i].iter().zip(&cols[j]).map(|(a, b)| (a - means[i]) * (b - means[j])).sum::<f64>() / (n - 1.0)
    })
}

/// Plain correlation of two columns after regressing each on `s`, by
/// explicit least squares on the rows.
pub fn residual_corr(cols: &[Vec<f64>], a: usize, b: usize, s: &[usize]) -> f64 {
    let n = cols[0].len();
    let design = DMatrix::from_fn(n, s.len() + 1, |r, k| if k == 0 { 1.0 } else { cols[s[k - 1]][r] });
    let resid = |t: usize| {
        let y = nalgebra::DVector::from_column_slice(&cols[t]);
        let beta = (design.transpose() * &design).try_inverse().unwrap() * design.transpose() * &y;
        y - &design * beta
    };
    let (ra, rb) = (resid(a), resid(b));
    ra.dot(&rb) / (ra.norm() * rb.norm())
}

/// Print one acceptance line and return whether it passed.
pub fn report(name: &str, pass: bool, detail: impl std::fmt::Display) -> bool {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    pass
}

/// Partial correlation from the Schur complement of `s` in a covariance
/// matrix, solving with an LU factorization.
pub fn schur_partial_corr(m: &DMatrix<f64>, a: usize, b: usize, s: &[usize]) -> f64 {
    let pair = [a, b];
    let sigma_ps = DMatrix::from_fn(2, s.len(), |i, k| m[(pair[i], s[k])]);
    let sigma_ss = DMatrix::from_fn(s.len(), s.len(), |i, k| m[(s[i], s[k])]);
    let cond = if s.is_empty() {
        DMatrix::from_fn(2, 2, |i, k| m[(pair[i], pair[k])])
    } else {
        let solved = sigma_ss.lu().solve(&sigma_ps.transpose()).unwrap();
        DMatrix::from_fn(2, 2, |i, k| m[(pair[i], pair[k])]) - &sigma_ps * solved
    };
    cond[(0, 1)] / (cond[(0, 0)] * cond[(1, 1)]).sqrt()
}

pub struct FdCheck {
    /// Largest componentwise relative error over the checked components.
    pub max_rel: f64,
    pub checked: usize,
}

/// Central differences of the exact objective against the analytic
/// gradient, skipping points within `kink` of a nondifferentiable set.
pub fn fd_gradient_check(
    problem: &backdoor::discovery::DiscoveryProblem,
    gamma: &[f64],
    lambda1: f64,
    lambda2: f64,
    h: f64,
    kink: f64,
) -> Option<FdCheck> {
    let (value, terms) = problem.objective(gamma, lambda1, lambda2).ok()?;
    let _ = value;
    let norm = gamma.iter().map(|g| g * g).sum::<f64>().sqrt();
    if terms.rho_dep.abs() <= kink || (lambda1 > 0.0 && terms.rho_aux.abs() <= kink) {
        return None;
    }
    if lambda2 > 0.0 && gamma.iter().any(|g| (g / norm).abs() <= kink) {
        return None;
    }
    let grad = problem.gradient(gamma, lambda1, lambda2).ok()?;
    let mut max_rel: f64 = 0.0;
    for i in 0..gamma.len() {
        let mut up = gamma.to_vec();
        let mut dn = gamma.to_vec();
        up[i] += h;
        dn[i] -= h;
        let fd = (problem.objective(&up, lambda1, lambda2).ok()?.0 - problem.objective(&dn, lambda1, lambda2).ok()?.0) / (2.0 * h);
        let rel = (grad[i] - fd).abs() / fd.abs().max(grad[i].abs()).max(1e-300);
        max_rel = max_rel.max(rel);
    }
    Some(FdCheck { max_rel, checked: gamma.len() })
}

/// Example 2 population problem with columns ordered (W, Y, X, Z...).
pub fn example2_problem(beta_yz: &[f64], beta_xz: &[f64]) -> backdoor::discovery::DiscoveryProblem {
    let sem = backdoor::scm::ConfoundedPair { beta_yx: 0.5, beta_xw: 1.0, beta_yz: beta_yz.to_vec(), beta_xz: beta_xz.to_vec() }
        .sem()
        .unwrap();
    let cov = sem.population_dataset_view();
    let l = |s: &str| cov.index_of(s).unwrap();
    let z: Vec<usize> = (0..beta_yz.len()).map(|i| l(&format!("z_{i}"))).collect();
    backdoor::discovery::DiscoveryProblem::from_cov(&cov, l("w"), l("y"), l("x"), &z).unwrap()
}

pub fn abs_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dot.abs() / (na * nb)
}
