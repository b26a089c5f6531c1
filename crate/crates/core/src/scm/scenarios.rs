//! Built-in graphs: the four-block simulation and an NHS-survey-shaped DAG.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{sample_parameters, LinearSem};
use crate::error::{input, Result};
use crate::graph::{CausalGraph, GraphSpec, NodeSpec, Role};

/// Per-block dimensions of the four-block simulation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDims {
    pub z1: usize,
    pub z2: usize,
    pub z3: usize,
    pub z4: usize,
    pub u: usize,
    pub u_prime: usize,
}

impl BlockDims {
    pub fn uniform(d: usize) -> Self {
        BlockDims { z1: d, z2: d, z3: d, z4: d, u: d, u_prime: d }
    }

    pub fn covariates(&self) -> usize {
        self.z1 + self.z2 + self.z3 + self.z4
    }
}

impl Default for BlockDims {
    fn default() -> Self {
        BlockDims::uniform(30)
    }
}

fn block(prefix: &str, label: &str, role: Role, n: usize) -> Vec<NodeSpec> {
    (0..n).map(|i| NodeSpec::in_block(format!("{prefix}_{i}"), role, label)).collect()
}

/// Graph of the four-block simulation:
///
/// ```text
/// U, U', W exogenous      Z1 <- W, U, U'      Z2 <- W
/// Z3, Z4 exogenous        X  <- U, Z2, Z3     Y  <- U', Z2, Z4, X
/// ```
///
/// Every block is expanded into scalar nodes `z1_0, z1_1, ...`.
pub fn build_simulation_graph(dims: BlockDims) -> Result<CausalGraph> {
    let BlockDims { z1, z2, z3, z4, u, u_prime } = dims;
    if [z1, z2, z3, z4, u, u_prime].contains(&0) {
        return input("every simulation block needs dimension >= 1");
    }
    let (us, ups) = (block("u", "U", Role::U, u), block("up", "U'", Role::U, u_prime));
    let (z1s, z2s) = (block("z1", "Z1", Role::Z, z1), block("z2", "Z2", Role::Z, z2));
    let (z3s, z4s) = (block("z3", "Z3", Role::Z, z3), block("z4", "Z4", Role::Z, z4));

    let mut edges = Vec::new();
    let mut link = |from: &[NodeSpec], to: &str| edges.extend(from.iter().map(|p| (p.id.clone(), to.to_owned())));
    let w = [NodeSpec::new("w", Role::W)];
    for c in &z1s {
        link(&w, &c.id);
        link(&us, &c.id);
        link(&ups, &c.id);
    }
    for c in &z2s {
        link(&w, &c.id);
    }
    link(&us, "x");
    link(&z2s, "x");
    link(&z3s, "x");
    link(&ups, "y");
    link(&z2s, "y");
    link(&z4s, "y");
    link(&[NodeSpec::new("x", Role::X)], "y");

    let mut nodes = vec![w[0].clone()];
    for b in [us, ups, z1s, z2s, z3s, z4s] {
        nodes.extend(b);
    }
    nodes.push(NodeSpec::new("x", Role::X));
    nodes.push(NodeSpec::new("y", Role::Y));
    CausalGraph::new(GraphSpec { nodes, edges, treatment_active: true })
}

/// Noise variances of the four-block simulation. U, U', W, Z2 and Z4 always
/// have unit variance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationNoise {
    pub sigma_x2: f64,
    pub sigma_y2: f64,
    pub sigma_z1_2: f64,
    pub sigma_z3_2: f64,
}

impl SimulationNoise {
    pub fn with_treatment_noise(sigma_x2: f64) -> Self {
        SimulationNoise { sigma_x2, sigma_y2: 1.0, sigma_z1_2: 1.0, sigma_z3_2: 1.0 }
    }
}

/// Samples simulation parameters, then pins the X -> Y coefficient to
/// `omega` and applies the block noise variances.
pub fn simulation_sem(
    dims: BlockDims,
    noise: SimulationNoise,
    omega: f64,
    sign_flip_prob: f64,
    seed: u64,
) -> Result<LinearSem> {
    let g = build_simulation_graph(dims)?;
    let mut sem = sample_parameters(&g, seed, sign_flip_prob)?;
    sem.set_omega(omega)?;
    sem.set_noise_var("x", noise.sigma_x2)?;
    sem.set_noise_var("y", noise.sigma_y2)?;
    for i in 0..dims.z1 {
        sem.set_noise_var(&format!("z1_{i}"), noise.sigma_z1_2)?;
    }
    for i in 0..dims.z3 {
        sem.set_noise_var(&format!("z3_{i}"), noise.sigma_z3_2)?;
    }
    Ok(sem)
}

const NHS_JOB_SATISFACTION: usize = 8;
const NHS_ORGANISATION: usize = 12;

/// The job-satisfaction item that collides the two latent sources; every
/// adjustment set containing it is biased.
pub const NHS_HARMFUL_COVARIATE: &str = "job_sat_8";

/// Staff-survey-shaped DAG with 25 nodes.
///
/// * W `training` (training undertaken) -> X `training_benefit`
/// * X -> Y `wellbeing`
/// * Z1 `job_sat_1..8`: items 1-7 feed Y, items 1-4 also feed X;
///   `job_sat_8` is a collider `openness -> job_sat_8 <- job_affinity`
/// * Z2 `org_1..12`: all feed X, items 1-9 feed Y, item k feeds `job_sat_k`
///   for k <= 5
/// * U `openness` -> X, U' `job_affinity` -> Y
///
/// The edge set is a fixture chosen to respect the W/Z -> X -> Y ordering;
/// the documented certified adjustment set is every Z except
/// [`NHS_HARMFUL_COVARIATE`].
pub fn build_nhs_graph() -> CausalGraph {
    let js = |k: usize| format!("job_sat_{k}");
    let org = |k: usize| format!("org_{k}");
    let mut nodes = vec![
        NodeSpec::new("training", Role::W),
        NodeSpec::in_block("openness", Role::U, "U"),
        NodeSpec::in_block("job_affinity", Role::U, "U'"),
    ];
    nodes.extend((1..=NHS_ORGANISATION).map(|k| NodeSpec::in_block(org(k), Role::Z, "Z2")));
    nodes.extend((1..=NHS_JOB_SATISFACTION).map(|k| NodeSpec::in_block(js(k), Role::Z, "Z1")));
    nodes.push(NodeSpec::new("training_benefit", Role::X));
    nodes.push(NodeSpec::new("wellbeing", Role::Y));

    let mut edges: Vec<(String, String)> = Vec::new();
    let mut e = |p: String, c: &str| edges.push((p, c.to_owned()));
    e("training".into(), "training_benefit");
    e("openness".into(), "training_benefit");
    e("openness".into(), NHS_HARMFUL_COVARIATE);
    e("job_affinity".into(), NHS_HARMFUL_COVARIATE);
    e("job_affinity".into(), "wellbeing");
    for k in 1..=NHS_ORGANISATION {
        e(org(k), "training_benefit");
        if k <= 9 {
            e(org(k), "wellbeing");
        }
        if k <= 5 {
            e(org(k), &js(k));
        }
    }
    for k in 1..NHS_JOB_SATISFACTION {
        e(js(k), "wellbeing");
        if k <= 4 {
            e(js(k), "training_benefit");
        }
    }
    e("training_benefit".into(), "wellbeing");
    CausalGraph::new(GraphSpec { nodes, edges, treatment_active: true }).expect("NHS fixture graph is valid")
}

/// Fixed parameters for [`build_nhs_graph`]; only the data seed varies
/// between benchmark settings.
pub fn nhs_fixture_sem(omega: f64, sigma_x2: f64) -> Result<LinearSem> {
    let g = build_nhs_graph();
    let mut coeffs = BTreeMap::new();
    for (p, c) in &g.spec().edges {
        let v = match (p.as_str(), c.as_str()) {
            ("training", _) => 0.8,
            ("openness", _) | ("job_affinity", _) => 1.0,
            ("training_benefit", _) => omega,
            (p, "training_benefit") if p.starts_with("org_") => {
                let k: usize = p[4..].parse().unwrap_or(1);
                if k % 2 == 0 { -0.25 } else { 0.35 }
            }
            (p, "wellbeing") if p.starts_with("org_") => 0.3,
            (p, _) if p.starts_with("org_") => 0.5,
            (_, "training_benefit") => 0.3,
            _ => 0.25,
        };
        coeffs.insert((p.clone(), c.clone()), v);
    }
    let mut noise = BTreeMap::new();
    noise.insert("training_benefit".to_owned(), sigma_x2);
    LinearSem::new(g, &coeffs, &noise)
}

/// Coefficients of a treatment/outcome pair sharing a covariate block:
///
/// ```text
/// Y = beta_yx X + beta_yz' Z + e_y      X = beta_xw W + beta_xz' Z + e_x
/// ```
///
/// with W and every Z exogenous and unit noise throughout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfoundedPair {
    pub beta_yx: f64,
    pub beta_xw: f64,
    pub beta_yz: Vec<f64>,
    pub beta_xz: Vec<f64>,
}

impl ConfoundedPair {
    /// Z nodes are `z_0, z_1, ...`; a zero coefficient omits the edge.
    pub fn sem(&self) -> Result<LinearSem> {
        let d = self.beta_yz.len();
        if d == 0 || self.beta_xz.len() != d {
            return input("beta_yz and beta_xz must have the same non-zero length");
        }
        let mut nodes = vec![NodeSpec::new("w", Role::W)];
        nodes.extend((0..d).map(|i| NodeSpec::new(format!("z_{i}"), Role::Z)));
        nodes.push(NodeSpec::new("x", Role::X));
        nodes.push(NodeSpec::new("y", Role::Y));
        let mut coeffs = BTreeMap::new();
        let mut put = |p: String, c: &str, v: f64| {
            if v != 0.0 {
                coeffs.insert((p, c.to_owned()), v);
            }
        };
        put("w".into(), "x", self.beta_xw);
        for i in 0..d {
            put(format!("z_{i}"), "x", self.beta_xz[i]);
            put(format!("z_{i}"), "y", self.beta_yz[i]);
        }
        put("x".into(), "y", self.beta_yx);
        let edges = coeffs.keys().cloned().collect();
        let g = CausalGraph::new(GraphSpec { nodes, edges, treatment_active: false })?;
        LinearSem::new(g, &coeffs, &BTreeMap::new())
    }
}
