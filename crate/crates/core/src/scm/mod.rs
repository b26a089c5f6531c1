//! Linear-Gaussian structural causal models.

mod dataset;
mod scenarios;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub use dataset::{Column, Dataset, RoleMap};
pub use scenarios::{
    build_nhs_graph, build_simulation_graph, nhs_fixture_sem, simulation_sem, BlockDims, ConfoundedPair, SimulationNoise,
    NHS_HARMFUL_COVARIATE,
};

use crate::error::{input, Error, Result};
use crate::graph::{CausalGraph, GraphSpec, Role};
use crate::stats::{CovView, SampleSize};

/// Zero-intercept linear SEM: each node is a weighted sum of its parents
/// plus independent Gaussian noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SemSpec", into = "SemSpec")]
pub struct LinearSem {
    graph: CausalGraph,
    /// Aligned with `graph.spec().edges`.
    coeffs: Vec<f64>,
    /// Aligned with `graph.nodes()`.
    noise_vars: Vec<f64>,
}

/// Serialized SEM: the graph document plus coefficient and variance maps.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SemSpec {
    #[serde(flatten)]
    pub graph: GraphSpec,
    pub coefficients: Vec<(String, String, f64)>,
    pub noise_variances: BTreeMap<String, f64>,
}

impl TryFrom<SemSpec> for LinearSem {
    type Error = Error;

    fn try_from(spec: SemSpec) -> Result<Self> {
        let graph = CausalGraph::new(spec.graph)?;
        let mut coeffs = BTreeMap::new();
        for (p, c, v) in spec.coefficients {
            if coeffs.insert((p.clone(), c.clone()), v).is_some() {
                return input(format!("duplicate coefficient for {p} -> {c}"));
            }
        }
        LinearSem::new(graph, &coeffs, &spec.noise_variances)
    }
}

impl From<LinearSem> for SemSpec {
    fn from(sem: LinearSem) -> Self {
        let coefficients = sem
            .graph
            .spec()
            .edges
            .iter()
            .zip(&sem.coeffs)
            .map(|((p, c), v)| (p.clone(), c.clone(), *v))
            .collect();
        let noise_variances =
            sem.graph.nodes().iter().zip(&sem.noise_vars).map(|(n, v)| (n.id.clone(), *v)).collect();
        SemSpec { graph: sem.graph.spec().clone(), coefficients, noise_variances }
    }
}

impl LinearSem {
    /// Every edge needs exactly one coefficient and nothing else may have
    /// one. Nodes missing from `noise_vars` default to unit variance.
    pub fn new(
        graph: CausalGraph,
        coeffs: &BTreeMap<(String, String), f64>,
        noise_vars: &BTreeMap<String, f64>,
    ) -> Result<Self> {
        let mut aligned = Vec::with_capacity(graph.spec().edges.len());
        for (p, c) in &graph.spec().edges {
            match coeffs.get(&(p.clone(), c.clone())) {
                Some(v) if v.is_finite() => aligned.push(*v),
                Some(v) => return input(format!("coefficient {p} -> {c} is not finite ({v})")),
                None => return input(format!("edge {p} -> {c} has no coefficient")),
            }
        }
        if let Some((p, c)) = coeffs.keys().find(|(p, c)| !graph.spec().edges.iter().any(|e| &e.0 == p && &e.1 == c)) {
            return input(format!("coefficient given for non-edge {p} -> {c}"));
        }
        for id in noise_vars.keys() {
            graph.index_of(id)?;
        }
        let noise: Vec<f64> = graph.nodes().iter().map(|n| noise_vars.get(&n.id).copied().unwrap_or(1.0)).collect();
        if let Some(i) = noise.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return input(format!("noise variance of `{}` must be positive", graph.id(i)));
        }
        Ok(LinearSem { graph, coeffs: aligned, noise_vars: noise })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    pub fn coefficients(&self) -> impl Iterator<Item = (&str, &str, f64)> + '_ {
        self.graph.spec().edges.iter().zip(&self.coeffs).map(|((p, c), v)| (p.as_str(), c.as_str(), *v))
    }

    pub fn coefficient(&self, parent: &str, child: &str) -> Option<f64> {
        self.edge_position(parent, child).map(|k| self.coeffs[k])
    }

    pub fn noise_var(&self, id: &str) -> Result<f64> {
        Ok(self.noise_vars[self.graph.index_of(id)?])
    }

    fn edge_position(&self, parent: &str, child: &str) -> Option<usize> {
        self.graph.spec().edges.iter().position(|(p, c)| p == parent && c == child)
    }

    pub fn set_coefficient(&mut self, parent: &str, child: &str, value: f64) -> Result<()> {
        let k = self
            .edge_position(parent, child)
            .ok_or_else(|| Error::Input(format!("no edge {parent} -> {child}")))?;
        self.coeffs[k] = value;
        Ok(())
    }

    pub fn set_noise_var(&mut self, id: &str, var: f64) -> Result<()> {
        if !(var > 0.0 && var.is_finite()) {
            return input(format!("noise variance of `{id}` must be positive"));
        }
        let i = self.graph.index_of(id)?;
        self.noise_vars[i] = var;
        Ok(())
    }

    /// Coefficient on X -> Y; the true ATE when X has no other children.
    pub fn omega(&self) -> f64 {
        let (x, y) = (self.graph.treatment(), self.graph.outcome());
        self.coefficient(self.graph.id(x), self.graph.id(y)).unwrap_or(0.0)
    }

    pub fn set_omega(&mut self, omega: f64) -> Result<()> {
        let (x, y) = (self.graph.treatment(), self.graph.outcome());
        let (xi, yi) = (self.graph.id(x).to_owned(), self.graph.id(y).to_owned());
        self.set_coefficient(&xi, &yi, omega)
    }

    /// Weight matrix with `b[(child, parent)]` = edge coefficient.
    fn weight_matrix(&self) -> DMatrix<f64> {
        let p = self.graph.len();
        let mut b = DMatrix::zeros(p, p);
        for (&(pi, ci), v) in self.graph.edge_indices().iter().zip(&self.coeffs) {
            b[(ci, pi)] = *v;
        }
        b
    }

    fn weights_into(&self) -> Vec<Vec<(usize, f64)>> {
        let mut into = vec![Vec::new(); self.graph.len()];
        for (&(pi, ci), v) in self.graph.edge_indices().iter().zip(&self.coeffs) {
            into[ci].push((pi, *v));
        }
        into
    }

    /// Ancestral sampling of `n` rows over every node, latent ones included.
    ///
    /// Noise is drawn column by column in topological order from a ChaCha8
    /// stream seeded with `seed`.
    pub fn sample_data(&self, n: usize, seed: u64, standardize: bool) -> Result<Dataset> {
        if n == 0 {
            return input("cannot sample zero rows");
        }
        let p = self.graph.len();
        let into = self.weights_into();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = DMatrix::<f64>::zeros(n, p);
        for v in self.graph.dag().topological_order() {
            let sd = self.noise_vars[v].sqrt();
            for r in 0..n {
                let eps: f64 = rng.sample(StandardNormal);
                let mean: f64 = into[v].iter().map(|&(u, w)| w * m[(r, u)]).sum();
                m[(r, v)] = mean + sd * eps;
            }
        }
        let columns = self
            .graph
            .nodes()
            .iter()
            .map(|n| Column { id: n.id.clone(), role: n.role, block: n.block.clone() })
            .collect();
        let data = Dataset::new(m, columns)?;
        if standardize {
            data.standardize()
        } else {
            Ok(data)
        }
    }

    /// Exact covariance over all nodes: `(I - B)⁻¹ D (I - B)⁻ᵀ`.
    pub fn implied_covariance(&self) -> CovView {
        let p = self.graph.len();
        let a = DMatrix::<f64>::identity(p, p) - self.weight_matrix();
        let t = a.try_inverse().expect("I - B is unit triangular up to permutation for a DAG");
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.noise_vars.clone()));
        let mut sigma = &t * d * t.transpose();
        for i in 0..p {
            for j in 0..i {
                let s = 0.5 * (sigma[(i, j)] + sigma[(j, i)]);
                sigma[(i, j)] = s;
                sigma[(j, i)] = s;
            }
        }
        let labels = self.graph.nodes().iter().map(|n| n.id.clone()).collect();
        CovView::new(sigma, labels, SampleSize::Population).expect("symmetrized covariance")
    }

    /// Population covariance restricted to observed (non-U) nodes.
    pub fn population_dataset_view(&self) -> CovView {
        let keep: Vec<usize> = (0..self.graph.len()).filter(|&i| self.graph.role(i) != Role::U).collect();
        self.implied_covariance().select(&keep)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Draws every edge coefficient as `|N(0, 1)|`, then flips it negative when
/// a uniform draw lands above `1 - sign_flip_prob`. Noise variances start at 1.
pub fn sample_parameters(g: &CausalGraph, seed: u64, sign_flip_prob: f64) -> Result<LinearSem> {
    if !(0.0..=1.0).contains(&sign_flip_prob) {
        return input(format!("sign flip probability {sign_flip_prob} outside [0, 1]"));
    }
    let threshold = 1.0 - sign_flip_prob;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = g
        .spec()
        .edges
        .iter()
        .map(|_| {
            let magnitude = rng.sample::<f64, _>(StandardNormal).abs();
            let u: f64 = rng.random();
            if u > threshold {
                -magnitude
            } else {
                magnitude
            }
        })
        .collect();
    Ok(LinearSem { graph: g.clone(), coeffs, noise_vars: vec![1.0; g.len()] })
}
