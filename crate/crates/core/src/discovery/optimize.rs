use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{default_support_threshold, support, DiscoveryProblem, ObjectiveTerms, X, Y, Z0};
use crate::error::{Error, Result};
use crate::stats::{bonferroni, fisher_z_test, ols, SampleSize};

/// Starting point for `gamma`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitGamma {
    /// Z coefficients of the regression of Y on X and Z; a random unit
    /// vector (seed 0) if that fit is singular or zero.
    Ols,
    Random { seed: u64 },
    Given(Vec<f64>),
}

impl InitGamma {
    /// Ordering key used to break ties during tuning.
    pub(crate) fn sort_key(&self) -> (u8, u64, String) {
        match self {
            InitGamma::Ols => (0, 0, String::new()),
            InitGamma::Random { seed } => (1, *seed, String::new()),
            InitGamma::Given(v) => (2, 0, format!("{v:?}")),
        }
    }
}

/// Step-size policy of the descent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// Halve `eta` until the objective strictly decreases; stop when no
    /// step decreases it.
    Backtracking,
    /// Always step by `eta`; the best iterate seen is returned.
    Fixed,
}

/// How the Fisher test on `ρ(W, Y | βᵀZ)` drives the λ₂ schedule.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lambda2Rule {
    /// On rejection of `ρ(W, Y | βᵀZ) = 0`, raise λ₂ and re-optimize; stop
    /// once the null is not rejected.
    RaiseOnRejection,
    /// Stop at the first round where the null is rejected, so the returned
    /// direction keeps W dependent on Y given βᵀZ; raise λ₂ otherwise.
    StopOnRejection,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Smoothing {
    pub start: f64,
    pub decay: f64,
}

impl Smoothing {
    /// ε values of the smoothed stages, largest first; all above
    /// [`ABS_SMOOTHING`](super::ABS_SMOOTHING).
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut e = self.start;
        while e > super::ABS_SMOOTHING && out.len() < 64 {
            out.push(e);
            e *= self.decay;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscoveryConfig {
    pub lambda1: f64,
    /// Initial λ₂.
    pub lambda2: f64,
    pub lambda2_growth: f64,
    pub max_lambda2_rounds: usize,
    pub lambda2_rule: Lambda2Rule,
    pub eta: f64,
    pub step_rule: StepRule,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub init_gamma: InitGamma,
    /// Continuation on the `|ρ|` smoothing: descend `sqrt(ρ² + ε²)` for
    /// ε = start, start·decay, ... down to the exact objective. `None`
    /// descends the exact objective only.
    pub smoothing: Option<Smoothing>,
    pub alpha_test: f64,
    /// `None` means `1 / (2 sqrt(d))`.
    pub support_threshold: Option<f64>,
    pub cv_folds: usize,
    /// Added to the covariance diagonal before optimizing; 0 disables.
    pub ridge: f64,
    /// Constraint level of the constrained form. Documentation only: the
    /// Lagrangian path never reads it.
    pub constraint_level: Option<f64>,
    /// Sparsity budget of the constrained form. Documentation only.
    pub sparsity_budget: Option<f64>,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            lambda1: 0.1,
            lambda2: 1e-4,
            lambda2_growth: 2.0,
            max_lambda2_rounds: 12,
            lambda2_rule: Lambda2Rule::RaiseOnRejection,
            eta: 0.1,
            step_rule: StepRule::Backtracking,
            max_iters: 500,
            grad_tol: 1e-8,
            init_gamma: InitGamma::Ols,
            smoothing: None,
            alpha_test: 0.05,
            support_threshold: None,
            cv_folds: 5,
            ridge: 0.0,
            constraint_level: None,
            sparsity_budget: None,
        }
    }
}

impl DiscoveryConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_owned()));
        if !(self.lambda1 >= 0.0 && self.lambda1.is_finite()) {
            return bad("lambda1 must be a non-negative number");
        }
        if !(self.lambda2 >= 0.0 && self.lambda2.is_finite()) {
            return bad("lambda2 must be a non-negative number");
        }
        if !(self.lambda2_growth > 1.0 && self.lambda2_growth.is_finite()) {
            return bad("lambda2_growth must exceed 1");
        }
        if self.max_lambda2_rounds == 0 {
            return bad("max_lambda2_rounds must be at least 1");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.grad_tol >= 0.0) {
            return bad("grad_tol must be non-negative");
        }
        if !(self.alpha_test > 0.0 && self.alpha_test < 1.0) {
            return bad("alpha_test must lie in (0, 1)");
        }
        if let Some(t) = self.support_threshold {
            if !(0.0..1.0).contains(&t) {
                return bad("support_threshold must lie in [0, 1)");
            }
        }
        if let Some(sm) = self.smoothing {
            if !(sm.start > 0.0 && sm.start.is_finite()) {
                return bad("smoothing.start must be positive");
            }
            if !(sm.decay > 0.0 && sm.decay < 1.0) {
                return bad("smoothing.decay must lie in (0, 1)");
            }
        }
        if self.cv_folds < 2 {
            return bad("cv_folds must be at least 2");
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad("ridge must be non-negative");
        }
        Ok(())
    }

    pub fn threshold_for(&self, d: usize) -> f64 {
        self.support_threshold.unwrap_or_else(|| default_support_threshold(d))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryResult {
    pub beta: Vec<f64>,
    /// Final iterate, rescaled to unit norm (so equal to `beta`).
    pub gamma: Vec<f64>,
    /// Positions among the Z columns.
    pub selected: Vec<usize>,
    pub selected_ids: Vec<String>,
    pub objective_terms: ObjectiveTerms,
    pub objective: f64,
    /// Exact objective after every accepted step, all λ₂ rounds
    /// concatenated; smoothed stages are not recorded.
    pub trace: Vec<f64>,
    pub tests_run: usize,
    pub converged: bool,
    pub lambda2_final: f64,
    pub rounds: usize,
    pub config: DiscoveryConfig,
    pub seed: Option<u64>,
}

const MAX_HALVINGS: usize = 50;

/// Gradient descent on the sphere with backtracking, wrapped in the λ₂
/// schedule.
pub fn optimize(problem: &DiscoveryProblem, cfg: &DiscoveryConfig) -> Result<DiscoveryResult> {
    cfg.validate()?;
    let ridged;
    let problem = if cfg.ridge > 0.0 {
        ridged = problem.ridged(cfg.ridge)?;
        &ridged
    } else {
        problem
    };
    let d = problem.dim();
    let mut gamma = initial_gamma(problem, &cfg.init_gamma)?;
    let mut lambda2 = cfg.lambda2;
    let mut trace = Vec::new();
    let mut tests_run = 0;
    let mut rounds = 0;
    let mut converged;
    let mut terms;
    loop {
        rounds += 1;
        for eps in cfg.smoothing.map(|s| s.schedule()).unwrap_or_default() {
            gamma = descend(problem, gamma, cfg.lambda1, lambda2, Some(eps), cfg)?.gamma;
        }
        let run = descend(problem, gamma, cfg.lambda1, lambda2, None, cfg)?;
        gamma = run.gamma;
        trace.extend(run.trace);
        terms = run.terms;
        converged = run.converged;
        let SampleSize::Finite(n) = problem.n_eff() else { break };
        tests_run += 1;
        let level = bonferroni(cfg.alpha_test, tests_run)?;
        let reject = fisher_z_test(terms.rho_aux, n, 1, level)?.reject;
        let stop = match cfg.lambda2_rule {
            Lambda2Rule::RaiseOnRejection => !reject,
            Lambda2Rule::StopOnRejection => reject,
        };
        if stop {
            break;
        }
        if rounds == cfg.max_lambda2_rounds {
            converged = false;
            break;
        }
        lambda2 *= cfg.lambda2_growth;
    }
    let threshold = cfg.threshold_for(d);
    let selected = support(&gamma, threshold);
    let ids = problem.z_ids();
    Ok(DiscoveryResult {
        selected_ids: selected.iter().map(|&i| ids[i].clone()).collect(),
        selected,
        objective: terms.value(cfg.lambda1, lambda2),
        objective_terms: terms,
        beta: gamma.clone(),
        gamma,
        trace,
        tests_run,
        converged,
        lambda2_final: lambda2,
        rounds,
        config: cfg.clone(),
        seed: match &cfg.init_gamma {
            InitGamma::Random { seed } => Some(*seed),
            _ => None,
        },
    })
}

struct Descent {
    gamma: Vec<f64>,
    terms: ObjectiveTerms,
    trace: Vec<f64>,
    converged: bool,
}

fn descend(
    problem: &DiscoveryProblem,
    gamma: Vec<f64>,
    lambda1: f64,
    lambda2: f64,
    eps: Option<f64>,
    cfg: &DiscoveryConfig,
) -> Result<Descent> {
    let eval = |g: &[f64]| problem.evaluate_smoothed(g, lambda1, lambda2, eps);
    let mut gamma = unit(gamma);
    let mut cur = eval(&gamma)?;
    let mut trace = vec![cur.value];
    let mut converged = false;
    let mut best = (gamma.clone(), cur.clone());
    for _ in 0..cfg.max_iters {
        let gnorm = cur.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !gnorm.is_finite() {
            return Err(Error::Input("non-finite gradient".into()));
        }
        if gnorm <= cfg.grad_tol {
            converged = true;
            break;
        }
        if cfg.step_rule == StepRule::Fixed {
            let cand: Vec<f64> = gamma.iter().zip(&cur.grad).map(|(g, d)| g - cfg.eta * d).collect();
            let Ok(next) = eval(&unit(cand.clone())) else {
                break;
            };
            gamma = unit(cand);
            cur = next;
            trace.push(cur.value);
            if cur.value < best.1.value {
                best = (gamma.clone(), cur.clone());
            }
            continue;
        }
        let mut step = cfg.eta;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand: Vec<f64> = gamma.iter().zip(&cur.grad).map(|(g, d)| g - step * d).collect();
            if let Ok(next) = eval(&cand) {
                if next.value < cur.value {
                    accepted = Some((cand, next));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((cand, next)) = accepted else {
            // No descent at any step size: stationary to working precision.
            converged = true;
            break;
        };
        gamma = unit(cand);
        // Renormalizing leaves beta, hence the value, unchanged; the gradient
        // must be recomputed at unit scale.
        cur = eval(&gamma)?;
        debug_assert!((cur.value - next.value).abs() < 1e-9);
        trace.push(cur.value);
        best = (gamma.clone(), cur.clone());
    }
    Ok(Descent { gamma: best.0, terms: best.1.terms, trace, converged })
}

fn unit(mut g: Vec<f64>) -> Vec<f64> {
    let n = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        g.iter_mut().for_each(|v| *v /= n);
    }
    g
}

pub(crate) fn random_unit(d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let g: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        if g.iter().any(|v: &f64| *v != 0.0) {
            return unit(g);
        }
    }
}

fn initial_gamma(problem: &DiscoveryProblem, init: &InitGamma) -> Result<Vec<f64>> {
    let d = problem.dim();
    match init {
        InitGamma::Given(v) => {
            if v.len() != d {
                return Err(Error::Config(format!("init_gamma has {} entries for {d} covariates", v.len())));
            }
            if !(v.iter().map(|x| x * x).sum::<f64>() > 1e-24) {
                return Err(Error::ZeroGamma);
            }
            Ok(v.clone())
        }
        InitGamma::Random { seed } => Ok(random_unit(d, *seed)),
        InitGamma::Ols => {
            let mut xs = vec![X];
            xs.extend(Z0..Z0 + d);
            match ols(problem.cov(), Y, &xs) {
                Ok(fit) if fit.coefficients[1..].iter().any(|c| c.abs() > 1e-12) => Ok(fit.coefficients[1..].to_vec()),
                _ => Ok(random_unit(d, 0)),
            }
        }
    }
}
