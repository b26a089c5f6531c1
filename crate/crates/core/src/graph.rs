//! Role-annotated DAGs with d-separation, backdoor and auxiliary-variable
//! certificate queries.
//!
//! [`Dag`] is the bare index-based structure. [`CausalGraph`] wraps a
//! validated [`GraphSpec`] and answers the same queries by node id.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

/// Role of a node relative to the treatment/outcome pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    /// Auxiliary variable certifying the adjustment set.
    W,
    /// Treatment.
    X,
    /// Outcome.
    Y,
    /// Observed candidate covariate.
    Z,
    /// Unobserved exogenous source.
    U,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::W => "W",
            Role::X => "X",
            Role::Y => "Y",
            Role::Z => "Z",
            Role::U => "U",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "W" | "w" => Ok(Role::W),
            "X" | "x" => Ok(Role::X),
            "Y" | "y" => Ok(Role::Y),
            "Z" | "z" => Ok(Role::Z),
            "U" | "u" => Ok(Role::U),
            other => input(format!("unknown role `{other}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    pub role: Role,
    /// Block label (e.g. `Z2`) grouping scalar nodes for reporting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block: Option<String>,
}

impl NodeSpec {
    pub fn new(id: impl Into<String>, role: Role) -> Self {
        NodeSpec { id: id.into(), role, block: None }
    }

    pub fn in_block(id: impl Into<String>, role: Role, block: impl Into<String>) -> Self {
        NodeSpec { id: id.into(), role, block: Some(block.into()) }
    }
}

/// Serialized graph document: `{"nodes":[...], "edges":[[parent, child], ...]}`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<(String, String)>,
    /// When set, validation requires the edge X -> Y.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub treatment_active: bool,
}

/// Index-based DAG.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dag {
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Travel {
    /// Arrived at the node from one of its children.
    Up,
    /// Arrived at the node from one of its parents.
    Down,
}

impl Dag {
    /// Builds a DAG on `n` nodes, rejecting self loops, duplicate edges and cycles.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        for &(p, c) in edges {
            if p >= n || c >= n {
                return input(format!("edge ({p}, {c}) out of range for {n} nodes"));
            }
            if p == c {
                return Err(Error::Cyclic(p.to_string()));
            }
            if children[p].contains(&c) {
                return input(format!("duplicate edge ({p}, {c})"));
            }
            parents[c].push(p);
            children[p].push(c);
        }
        let dag = Dag { parents, children };
        if let Some(v) = dag.cycle_witness() {
            return Err(Error::Cyclic(v.to_string()));
        }
        Ok(dag)
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn parents(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.children.iter().enumerate().flat_map(|(p, cs)| cs.iter().map(move |&c| (p, c)))
    }

    pub fn has_edge(&self, p: usize, c: usize) -> bool {
        self.children[p].contains(&c)
    }

    fn cycle_witness(&self) -> Option<usize> {
        let order = self.kahn();
        if order.len() == self.len() {
            return None;
        }
        let mut seen = vec![false; self.len()];
        order.iter().for_each(|&v| seen[v] = true);
        seen.iter().position(|s| !s)
    }

    fn kahn(&self) -> Vec<usize> {
        let mut indeg: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut queue: VecDeque<usize> = (0..self.len()).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(self.len());
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &c in &self.children[v] {
                indeg[c] -= 1;
                if indeg[c] == 0 {
                    queue.push_back(c);
                }
            }
        }
        order
    }

    /// Parents before children; ties resolved by index.
    pub fn topological_order(&self) -> Vec<usize> {
        self.kahn()
    }

    /// Nodes reachable from `from` along directed edges, `from` included.
    pub fn descendants(&self, from: &[usize]) -> Vec<bool> {
        self.reach(from, &self.children)
    }

    /// Nodes with a directed path into `to`, `to` included.
    pub fn ancestors(&self, to: &[usize]) -> Vec<bool> {
        self.reach(to, &self.parents)
    }

    fn reach(&self, start: &[usize], next: &[Vec<usize>]) -> Vec<bool> {
        let mut mark = vec![false; self.len()];
        let mut stack: Vec<usize> = start.to_vec();
        while let Some(v) = stack.pop() {
            if !mark[v] {
                mark[v] = true;
                stack.extend(next[v].iter().copied().filter(|&u| !mark[u]));
            }
        }
        mark
    }

    /// Copy of the DAG with the edge `p -> c` removed (no-op when absent).
    pub fn without_edge(&self, p: usize, c: usize) -> Dag {
        let mut out = self.clone();
        out.children[p].retain(|&v| v != c);
        out.parents[c].retain(|&v| v != p);
        out
    }

    /// Every node d-connected to `a` given `given`, by Bayes-ball reachability.
    ///
    /// Runs in O(|V| + |E|). Nodes in `given` are never reported reachable.
    pub fn d_connected_from(&self, a: usize, given: &[usize]) -> Vec<bool> {
        let n = self.len();
        let mut in_given = vec![false; n];
        given.iter().for_each(|&v| in_given[v] = true);
        let opens_collider = self.ancestors(given);

        let mut reachable = vec![false; n];
        let mut seen_up = vec![false; n];
        let mut seen_down = vec![false; n];
        let mut queue = VecDeque::from([(a, Travel::Up)]);
        while let Some((v, dir)) = queue.pop_front() {
            let seen = match dir {
                Travel::Up => &mut seen_up[v],
                Travel::Down => &mut seen_down[v],
            };
            if *seen {
                continue;
            }
            *seen = true;
            if !in_given[v] {
                reachable[v] = true;
            }
            match dir {
                Travel::Up if !in_given[v] => {
                    queue.extend(self.parents[v].iter().map(|&p| (p, Travel::Up)));
                    queue.extend(self.children[v].iter().map(|&c| (c, Travel::Down)));
                }
                Travel::Up => {}
                Travel::Down => {
                    if !in_given[v] {
                        queue.extend(self.children[v].iter().map(|&c| (c, Travel::Down)));
                    }
                    if opens_collider[v] {
                        queue.extend(self.parents[v].iter().map(|&p| (p, Travel::Up)));
                    }
                }
            }
        }
        reachable[a] = false;
        reachable
    }

    /// True iff every path between `a` and `b` is blocked by `given`.
    pub fn d_separated(&self, a: usize, b: usize, given: &[usize]) -> Result<bool> {
        let n = self.len();
        if a >= n || b >= n || given.iter().any(|&v| v >= n) {
            return input("node index out of range");
        }
        if a == b {
            return input("d-separation query needs two distinct nodes");
        }
        if given.contains(&a) || given.contains(&b) {
            return input("query endpoints must not be in the conditioning set");
        }
        Ok(!self.d_connected_from(a, given)[b])
    }
}

/// A validated [`GraphSpec`]: acyclic, role constraints checked, ids indexed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphSpec", into = "GraphSpec")]
pub struct CausalGraph {
    spec: GraphSpec,
    dag: Dag,
    edge_index: Vec<(usize, usize)>,
    index: HashMap<String, usize>,
    treatment: usize,
    outcome: usize,
    auxiliary: Option<usize>,
}

impl TryFrom<GraphSpec> for CausalGraph {
    type Error = Error;

    fn try_from(spec: GraphSpec) -> Result<Self> {
        CausalGraph::new(spec)
    }
}

impl From<CausalGraph> for GraphSpec {
    fn from(g: CausalGraph) -> Self {
        g.spec
    }
}

impl CausalGraph {
    pub fn new(spec: GraphSpec) -> Result<Self> {
        let mut index = HashMap::with_capacity(spec.nodes.len());
        for (i, node) in spec.nodes.iter().enumerate() {
            if index.insert(node.id.clone(), i).is_some() {
                return input(format!("duplicate node id `{}`", node.id));
            }
        }
        let lookup = |id: &str| index.get(id).copied().ok_or_else(|| Error::UnknownNode(id.to_owned()));
        let mut edges = Vec::with_capacity(spec.edges.len());
        for (p, c) in &spec.edges {
            edges.push((lookup(p)?, lookup(c)?));
        }
        let dag = Dag::new(spec.nodes.len(), &edges).map_err(|e| match e {
            Error::Cyclic(i) => Error::Cyclic(spec.nodes[i.parse::<usize>().unwrap_or(0)].id.clone()),
            other => other,
        })?;

        let with_role = |r: Role| -> Vec<usize> {
            spec.nodes.iter().enumerate().filter(|(_, n)| n.role == r).map(|(i, _)| i).collect()
        };
        let (xs, ys, ws) = (with_role(Role::X), with_role(Role::Y), with_role(Role::W));
        if xs.len() != 1 || ys.len() != 1 {
            return input(format!(
                "graph needs exactly one X and one Y node (found {} and {})",
                xs.len(),
                ys.len()
            ));
        }
        if ws.len() > 1 {
            return input(format!("graph has {} W nodes, at most one allowed", ws.len()));
        }
        for u in with_role(Role::U) {
            if !dag.parents(u).is_empty() {
                return input(format!("latent node `{}` must be exogenous", spec.nodes[u].id));
            }
        }
        let (treatment, outcome) = (xs[0], ys[0]);
        if spec.treatment_active && !dag.has_edge(treatment, outcome) {
            return input("treatment-active graph is missing the edge X -> Y");
        }
        Ok(CausalGraph { spec, dag, edge_index: edges, index, treatment, outcome, auxiliary: ws.first().copied() })
    }

    pub fn spec(&self) -> &GraphSpec {
        &self.spec
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    /// Edge endpoints as indices, in the order of `spec().edges`.
    pub fn edge_indices(&self) -> &[(usize, usize)] {
        &self.edge_index
    }

    pub fn nodes(&self) -> &[NodeSpec] {
        &self.spec.nodes
    }

    pub fn len(&self) -> usize {
        self.spec.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spec.nodes.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index.get(id).copied().ok_or_else(|| Error::UnknownNode(id.to_owned()))
    }

    pub fn id(&self, i: usize) -> &str {
        &self.spec.nodes[i].id
    }

    pub fn role(&self, i: usize) -> Role {
        self.spec.nodes[i].role
    }

    pub fn treatment(&self) -> usize {
        self.treatment
    }

    pub fn outcome(&self) -> usize {
        self.outcome
    }

    pub fn auxiliary(&self) -> Option<usize> {
        self.auxiliary
    }

    pub fn with_role(&self, role: Role) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.role(i) == role).collect()
    }

    fn resolve(&self, ids: &[&str]) -> Result<Vec<usize>> {
        ids.iter().map(|id| self.index_of(id)).collect()
    }

    fn resolve_zset(&self, zstar: &[&str]) -> Result<Vec<usize>> {
        let idx = self.resolve(zstar)?;
        for &i in &idx {
            if self.role(i) != Role::Z {
                return input(format!(
                    "adjustment set may only contain Z nodes; `{}` has role {}",
                    self.id(i),
                    self.role(i)
                ));
            }
        }
        Ok(idx)
    }

    pub fn d_separated(&self, a: &str, b: &str, given: &[&str]) -> Result<bool> {
        let (a, b) = (self.index_of(a)?, self.index_of(b)?);
        let given = self.resolve(given)?;
        self.dag.d_separated(a, b, &given)
    }

    /// Backdoor criterion for the single edge X -> Y: no member of `zstar`
    /// descends from X, and `zstar` d-separates X from Y once X -> Y is cut.
    pub fn is_valid_backdoor_set(&self, zstar: &[&str]) -> Result<bool> {
        let z = self.resolve_zset(zstar)?;
        Ok(self.valid_backdoor_indices(&z))
    }

    pub(crate) fn valid_backdoor_indices(&self, z: &[usize]) -> bool {
        let desc = self.dag.descendants(&[self.treatment]);
        if z.iter().any(|&v| desc[v]) {
            return false;
        }
        let cut = self.dag.without_edge(self.treatment, self.outcome);
        !cut.d_connected_from(self.treatment, z)[self.outcome]
    }

    /// Graphical auxiliary-variable certificate: `w` is d-separated from Y
    /// given `zstar` plus X, and d-connected to Y given `zstar` alone.
    pub fn entner_pair_holds(&self, w: &str, zstar: &[&str]) -> Result<bool> {
        let w = self.index_of(w)?;
        if self.role(w) != Role::W {
            return input(format!("`{}` does not have role W", self.id(w)));
        }
        let z = self.resolve_zset(zstar)?;
        Ok(self.entner_indices(w, &z))
    }

    pub(crate) fn entner_indices(&self, w: usize, z: &[usize]) -> bool {
        let mut with_x = z.to_vec();
        with_x.push(self.treatment);
        let separated_given_x = !self.dag.d_connected_from(w, &with_x)[self.outcome];
        let connected_without_x = self.dag.d_connected_from(w, z)[self.outcome];
        separated_given_x && connected_without_x
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.spec)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GraphSpec = serde_json::from_str(text)?;
        CausalGraph::new(spec)
    }
}
