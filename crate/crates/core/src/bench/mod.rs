//! Experiment grid: sample SEMs, split data, run every method and score the
//! estimates against the true effect.

mod plots;
mod report;
pub mod seed;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{allz_ate, entner_search, marginal_ate, EntnerConfig};
use crate::discovery::{optimize, tune, tune_holdout, DiscoveryConfig, DiscoveryProblem, TuningGrid};
use crate::error::{Error, Result};
use crate::estimation::{ate_error, backdoor_ate};
use crate::graph::{CausalGraph, GraphSpec, Role};
use crate::scm::{nhs_fixture_sem, sample_parameters, simulation_sem, BlockDims, Dataset, LinearSem, SimulationNoise};

pub use plots::{export_plot_data, freedman_diaconis_width, write_histogram, write_scatter, PlotFiles};
pub use report::{BenchmarkReport, CellSummary, MethodSummary, ReportRow, Summary};
use seed::{derive_seed, Purpose};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Sim4block,
    Nhs,
    /// Path to a graph JSON file; coefficients are sampled per setting.
    CustomFile(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Ours,
    Allz,
    Marginal,
    Entner,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Ours, Method::Allz, Method::Marginal, Method::Entner];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::Allz => "allz",
            Method::Marginal => "marginal",
            Method::Entner => "entner",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown method `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub graph_kind: GraphKind,
    pub block_dims: BlockDims,
    /// Grid cells are the cross product of `sigma_x2` and `omega`.
    pub sigma_x2: Vec<f64>,
    pub omega: Vec<f64>,
    pub n_total: usize,
    /// Two fractions (train, test) or three (train, valid, test).
    pub split: Vec<f64>,
    pub n_settings: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    pub sign_flip_prob: f64,
    pub discovery: DiscoveryConfig,
    pub tuning: TuningGrid,
    pub entner: EntnerConfig,
    /// Wall-clock runtimes break byte-identical replay, so they are 0
    /// unless enabled.
    pub record_timing: bool,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            graph_kind: GraphKind::Sim4block,
            block_dims: BlockDims::default(),
            sigma_x2: vec![0.01, 0.6],
            omega: vec![0.1, 0.5],
            n_total: 20_000,
            split: vec![0.5, 0.5],
            n_settings: 25,
            seed: 0,
            methods: Method::ALL.to_vec(),
            sign_flip_prob: 0.5,
            discovery: DiscoveryConfig::default(),
            tuning: TuningGrid::default(),
            entner: EntnerConfig::default(),
            record_timing: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub index: usize,
    pub sigma_x2: f64,
    pub omega: f64,
}

impl Cell {
    pub fn id(&self) -> String {
        format!("sx2_{}_omega_{}", self.sigma_x2, self.omega)
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.split.len() == 2 || self.split.len() == 3) {
            return bad("split needs two or three fractions".into());
        }
        if self.split.iter().any(|f| !(*f > 0.0)) || (self.split.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("split fractions must be positive and sum to 1".into());
        }
        if self.n_settings == 0 {
            return bad("n_settings must be at least 1".into());
        }
        if self.sigma_x2.is_empty() || self.sigma_x2.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return bad("sigma_x2 needs at least one positive value".into());
        }
        if self.omega.is_empty() || self.omega.iter().any(|o| !o.is_finite()) {
            return bad("omega needs at least one finite value".into());
        }
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        let mut m = self.methods.clone();
        m.sort();
        m.dedup();
        if m.len() != self.methods.len() {
            return bad("methods listed twice".into());
        }
        if !(0.0..=1.0).contains(&self.sign_flip_prob) {
            return bad("sign_flip_prob must lie in [0, 1]".into());
        }
        let smallest = self.split.iter().fold(1.0_f64, |a, &b| a.min(b));
        if ((self.n_total as f64) * smallest) < 10.0 {
            return bad(format!("n_total = {} leaves a split part with fewer than 10 rows", self.n_total));
        }
        if matches!(self.graph_kind, GraphKind::Sim4block) && self.block_dims.covariates() == 0 {
            return bad("block_dims has no covariates".into());
        }
        self.discovery.validate()?;
        if self.tuning.is_empty() {
            return bad("tuning grid is empty".into());
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &sigma_x2 in &self.sigma_x2 {
            for &omega in &self.omega {
                out.push(Cell { index: out.len(), sigma_x2, omega });
            }
        }
        out
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

/// Which split part a method touched, for leakage checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stage {
    Tune,
    Select,
    Estimate,
}

#[derive(Clone, Debug)]
pub struct DataAccess<'a> {
    pub scenario_id: &'a str,
    pub setting: usize,
    pub method: Method,
    pub stage: Stage,
    /// Row ids (positions in the sampled pool) handed to the method.
    pub row_ids: &'a [usize],
}

pub type Observer<'a> = &'a (dyn Fn(&DataAccess<'_>) + Sync);

pub fn run_benchmark(cfg: &ScenarioConfig) -> Result<BenchmarkReport> {
    run_benchmark_observed(cfg, &|_| {})
}

/// [`run_benchmark`] reporting every dataset handed to a method.
pub fn run_benchmark_observed(cfg: &ScenarioConfig, observer: Observer<'_>) -> Result<BenchmarkReport> {
    cfg.validate()?;
    let custom = match &cfg.graph_kind {
        GraphKind::CustomFile(path) => {
            let text = std::fs::read_to_string(path)?;
            let spec: GraphSpec = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
            Some(CausalGraph::new(spec).map_err(|e| Error::Config(e.to_string()))?)
        }
        _ => None,
    };
    let hash = cfg.hash();
    let jobs: Vec<(Cell, usize)> =
        cfg.cells().into_iter().flat_map(|c| (0..cfg.n_settings).map(move |s| (c, s))).collect();
    let mut rows: Vec<ReportRow> = jobs
        .par_iter()
        .flat_map_iter(|&(cell, setting)| run_setting(cfg, custom.as_ref(), cell, setting, &hash, observer))
        .collect();
    rows.sort_by(|a, b| (a.cell, a.setting, a.method).cmp(&(b.cell, b.setting, b.method)));
    Ok(BenchmarkReport::new(rows, cfg))
}

fn build_sem(cfg: &ScenarioConfig, custom: Option<&CausalGraph>, cell: Cell, seed: u64) -> Result<LinearSem> {
    match &cfg.graph_kind {
        GraphKind::Sim4block => simulation_sem(
            cfg.block_dims,
            SimulationNoise::with_treatment_noise(cell.sigma_x2),
            cell.omega,
            cfg.sign_flip_prob,
            seed,
        ),
        GraphKind::Nhs => nhs_fixture_sem(cell.omega, cell.sigma_x2),
        GraphKind::CustomFile(_) => {
            let g = custom.expect("custom graph loaded");
            let mut sem = sample_parameters(g, seed, cfg.sign_flip_prob)?;
            sem.set_omega(cell.omega)?;
            let x = g.id(g.treatment()).to_owned();
            sem.set_noise_var(&x, cell.sigma_x2)?;
            Ok(sem)
        }
    }
}

struct Parts {
    train: Dataset,
    valid: Option<Dataset>,
    test: Dataset,
}

fn prepare(cfg: &ScenarioConfig, custom: Option<&CausalGraph>, cell: Cell, setting: usize) -> Result<Parts> {
    let sem = build_sem(cfg, custom, cell, derive_seed(cfg.seed, cell.index, setting, Purpose::Parameters))?;
    let data_seed = derive_seed(cfg.seed, cell.index, setting, Purpose::Data);
    let data = sem.sample_data(cfg.n_total, data_seed, false)?.observed().standardize()?;
    let mut parts = data.split(&cfg.split)?.into_iter();
    let train = parts.next().expect("two or more parts");
    let (valid, test) = match (parts.next(), parts.next()) {
        (Some(v), Some(t)) => (Some(v), t),
        (Some(t), None) => (None, t),
        _ => unreachable!("split validated to two or three parts"),
    };
    Ok(Parts { train, valid, test })
}

fn run_setting(
    cfg: &ScenarioConfig,
    custom: Option<&CausalGraph>,
    cell: Cell,
    setting: usize,
    hash: &str,
    observer: Observer<'_>,
) -> Vec<ReportRow> {
    let scenario_id = cell.id();
    let data_seed = derive_seed(cfg.seed, cell.index, setting, Purpose::Data);
    let parts = prepare(cfg, custom, cell, setting);
    let mut methods = cfg.methods.clone();
    methods.sort();
    methods
        .into_iter()
        .map(|method| {
            let start = Instant::now();
            let outcome = match &parts {
                Ok(p) => {
                    let ctx = Ctx { cfg, cell, setting, scenario_id: &scenario_id, observer, method };
                    ctx.run(p)
                }
                Err(e) => Err(Error::Input(format!("data generation failed: {e}"))),
            };
            let runtime_ms = if cfg.record_timing { start.elapsed().as_millis() as u64 } else { 0 };
            let (ate_estimate, selected, status) = match outcome {
                Ok((ate, sel)) => (ate, sel.join(";"), "ok".to_owned()),
                Err(e) => (f64::NAN, String::new(), format!("error: {e}")),
            };
            ReportRow {
                scenario_id: scenario_id.clone(),
                cell: cell.index,
                setting,
                method,
                ate_estimate,
                ate_error: ate_error(ate_estimate, cell.omega),
                selected,
                runtime_ms,
                seed: data_seed,
                config_hash: hash.to_owned(),
                status,
            }
        })
        .collect()
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    cell: Cell,
    setting: usize,
    scenario_id: &'a str,
    observer: Observer<'a>,
    method: Method,
}

impl Ctx<'_> {
    fn see(&self, stage: Stage, data: &Dataset) {
        (self.observer)(&DataAccess {
            scenario_id: self.scenario_id,
            setting: self.setting,
            method: self.method,
            stage,
            row_ids: data.row_ids(),
        });
    }

    fn estimate(&self, test: &Dataset, zstar: &[usize]) -> Result<(f64, Vec<String>)> {
        self.see(Stage::Estimate, test);
        let ids = zstar.iter().map(|&c| test.columns()[c].id.clone()).collect();
        Ok((backdoor_ate(test, zstar)?, ids))
    }

    fn run(&self, p: &Parts) -> Result<(f64, Vec<String>)> {
        let cfg = self.cfg;
        match self.method {
            Method::Marginal => {
                self.see(Stage::Estimate, &p.test);
                Ok((marginal_ate(&p.test)?, Vec::new()))
            }
            Method::Allz => {
                self.see(Stage::Estimate, &p.test);
                let ids = p.test.z_columns().iter().map(|&c| p.test.columns()[c].id.clone()).collect();
                Ok((allz_ate(&p.test)?, ids))
            }
            Method::Entner => {
                self.see(Stage::Select, &p.train);
                let ecfg = EntnerConfig {
                    seed: derive_seed(cfg.seed, self.cell.index, self.setting, Purpose::Entner),
                    ..cfg.entner.clone()
                };
                let found = entner_search(&p.train, &ecfg)?;
                self.estimate(&p.test, &found.zstar)
            }
            Method::Ours => {
                let tuned = match &p.valid {
                    Some(valid) => {
                        self.see(Stage::Tune, &p.train);
                        self.see(Stage::Tune, valid);
                        tune_holdout(&p.train, valid, &cfg.discovery, &cfg.tuning)?
                    }
                    None => {
                        self.see(Stage::Tune, &p.train);
                        let seed = derive_seed(cfg.seed, self.cell.index, self.setting, Purpose::Folds);
                        tune(&p.train, &cfg.discovery, &cfg.tuning, seed)?
                    }
                };
                self.see(Stage::Select, &p.train);
                let problem = DiscoveryProblem::from_dataset(&p.train)?;
                let result = optimize(&problem, &tuned.config)?;
                let z_cols = p.test.with_role(Role::Z);
                let zstar: Vec<usize> = result.selected.iter().map(|&i| z_cols[i]).collect();
                self.estimate(&p.test, &zstar)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ScenarioConfig {
        ScenarioConfig {
            block_dims: BlockDims::uniform(1),
            sigma_x2: vec![0.6],
            omega: vec![0.5],
            n_total: 400,
            n_settings: 2,
            methods: vec![Method::Marginal, Method::Allz],
            ..Default::default()
        }
    }

    #[test]
    fn row_count_matches_grid() {
        let cfg = ScenarioConfig { sigma_x2: vec![0.01, 0.6], omega: vec![0.1, 0.5], ..tiny() };
        let r = run_benchmark(&cfg).unwrap();
        assert_eq!(r.rows.len(), 2 * 2 * 2 * 2);
        assert!(r.rows.iter().all(|row| row.status == "ok"));
    }

    #[test]
    fn single_marginal_row() {
        let cfg = ScenarioConfig { n_settings: 1, methods: vec![Method::Marginal], ..tiny() };
        assert_eq!(run_benchmark(&cfg).unwrap().rows.len(), 1);
    }

    #[test]
    fn config_errors() {
        for cfg in [
            ScenarioConfig { split: vec![0.6, 0.6], ..tiny() },
            ScenarioConfig { split: vec![1.0], ..tiny() },
            ScenarioConfig { n_settings: 0, ..tiny() },
            ScenarioConfig { methods: vec![], ..tiny() },
            ScenarioConfig { methods: vec![Method::Ours, Method::Ours], ..tiny() },
        ] {
            assert!(matches!(run_benchmark(&cfg), Err(Error::Config(_))));
        }
    }

    #[test]
    fn adding_methods_keeps_data() {
        let a = run_benchmark(&tiny()).unwrap();
        let b = run_benchmark(&ScenarioConfig { methods: vec![Method::Marginal, Method::Allz, Method::Entner], ..tiny() }).unwrap();
        let pick = |r: &BenchmarkReport| -> Vec<f64> {
            r.rows.iter().filter(|x| x.method == Method::Marginal).map(|x| x.ate_estimate).collect()
        };
        assert_eq!(pick(&a), pick(&b));
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = ScenarioConfig { graph_kind: GraphKind::CustomFile("g.json".into()), ..tiny() };
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg);
        let partial = ScenarioConfig::from_json(r#"{"graph_kind": "nhs", "n_settings": 3}"#).unwrap();
        assert_eq!(partial.graph_kind, GraphKind::Nhs);
        assert_eq!(partial.n_total, 20_000);
        assert!(ScenarioConfig::from_json(r#"{"n_setting": 3}"#).is_err());
    }
}
