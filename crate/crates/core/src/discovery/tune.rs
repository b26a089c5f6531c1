use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{optimize, DiscoveryConfig, DiscoveryProblem, InitGamma};
use crate::error::{Error, Result};
use crate::scm::Dataset;

/// Hyperparameter grid; the full cross product is searched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuningGrid {
    pub lambda1: Vec<f64>,
    pub eta: Vec<f64>,
    pub init: Vec<InitGamma>,
}

impl Default for TuningGrid {
    fn default() -> Self {
        TuningGrid {
            lambda1: vec![0.0, 0.1, 0.5],
            eta: vec![0.05, 0.2],
            // Held-out |ρ| rarely separates starting points, and random starts
            // land on dense zeros of the first term; they stay opt-in.
            init: vec![InitGamma::Ols],
        }
    }
}

impl TuningGrid {
    pub fn single(cfg: &DiscoveryConfig) -> Self {
        TuningGrid { lambda1: vec![cfg.lambda1], eta: vec![cfg.eta], init: vec![cfg.init_gamma.clone()] }
    }

    pub fn len(&self) -> usize {
        self.lambda1.len() * self.eta.len() * self.init.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn points(&self, base: &DiscoveryConfig) -> Vec<DiscoveryConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &lambda1 in &self.lambda1 {
            for &eta in &self.eta {
                for init in &self.init {
                    out.push(DiscoveryConfig { lambda1, eta, init_gamma: init.clone(), ..base.clone() });
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridScore {
    pub lambda1: f64,
    pub eta: f64,
    pub init: InitGamma,
    /// Mean held-out `|ρ(W, Y | X, βᵀZ)|`; infinite if any fit failed.
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuneOutcome {
    pub config: DiscoveryConfig,
    pub scores: Vec<GridScore>,
}

/// k-fold cross validation over `grid` using rows of `train` only.
///
/// Each fit is scored by `|ρ(W, Y | X, βᵀZ)|` on the held-out fold. Ties go
/// to the smaller λ₁, then the smaller η, then the init order
/// OLS < random (by seed) < given.
pub fn tune(train: &Dataset, base: &DiscoveryConfig, grid: &TuningGrid, seed: u64) -> Result<TuneOutcome> {
    base.validate()?;
    let points = check_grid(base, grid)?;
    if points.len() == 1 {
        return Ok(TuneOutcome { config: points[0].clone(), scores: Vec::new() });
    }
    let k = base.cv_folds;
    let n = train.n_rows();
    if n < 2 * k {
        return Err(Error::Input(format!("{n} rows are too few for {k}-fold cross validation")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let folds: Vec<(DiscoveryProblem, DiscoveryProblem)> = (0..k)
        .map(|f| {
            let fit: Vec<usize> = (0..n).filter(|&i| i % k != f).map(|i| order[i]).collect();
            let held: Vec<usize> = (0..n).filter(|&i| i % k == f).map(|i| order[i]).collect();
            Ok((DiscoveryProblem::from_dataset(&train.rows(&fit))?, DiscoveryProblem::from_dataset(&train.rows(&held))?))
        })
        .collect::<Result<_>>()?;
    let scores: Vec<f64> = points
        .par_iter()
        .map(|cfg| {
            let total: f64 = folds.iter().map(|(fit, held)| score(fit, held, cfg)).sum();
            total / k as f64
        })
        .collect();
    Ok(select(points, scores))
}

/// Like [`tune`] but fits on `train` and scores on a separate `valid` set.
pub fn tune_holdout(train: &Dataset, valid: &Dataset, base: &DiscoveryConfig, grid: &TuningGrid) -> Result<TuneOutcome> {
    base.validate()?;
    let points = check_grid(base, grid)?;
    if points.len() == 1 {
        return Ok(TuneOutcome { config: points[0].clone(), scores: Vec::new() });
    }
    let fit = DiscoveryProblem::from_dataset(train)?;
    let held = DiscoveryProblem::from_dataset(valid)?;
    let scores: Vec<f64> = points.par_iter().map(|cfg| score(&fit, &held, cfg)).collect();
    Ok(select(points, scores))
}

fn check_grid(base: &DiscoveryConfig, grid: &TuningGrid) -> Result<Vec<DiscoveryConfig>> {
    if grid.is_empty() {
        return Err(Error::Config("tuning grid is empty".into()));
    }
    let points = grid.points(base);
    for p in &points {
        p.validate()?;
    }
    Ok(points)
}

fn score(fit: &DiscoveryProblem, held: &DiscoveryProblem, cfg: &DiscoveryConfig) -> f64 {
    let run = || -> Result<f64> {
        let r = optimize(fit, cfg)?;
        Ok(held.objective(&r.beta, 0.0, 0.0)?.1.rho_dep.abs())
    };
    match run() {
        Ok(s) if s.is_finite() => s,
        _ => f64::INFINITY,
    }
}

fn select(points: Vec<DiscoveryConfig>, scores: Vec<f64>) -> TuneOutcome {
    let best = (0..points.len())
        .min_by(|&a, &b| {
            scores[a]
                .total_cmp(&scores[b])
                .then(points[a].lambda1.total_cmp(&points[b].lambda1))
                .then(points[a].eta.total_cmp(&points[b].eta))
                .then(points[a].init_gamma.sort_key().cmp(&points[b].init_gamma.sort_key()))
        })
        .expect("grid is non-empty");
    let table = points
        .iter()
        .zip(&scores)
        .map(|(p, &score)| GridScore { lambda1: p.lambda1, eta: p.eta, init: p.init_gamma.clone(), score })
        .collect();
    TuneOutcome { config: points[best].clone(), scores: table }
}
