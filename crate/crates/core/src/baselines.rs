//! Comparison estimators: no adjustment, adjustment for every covariate, and
//! a combinatorial search for a subset certified by the auxiliary variable.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{backdoor_ate, backdoor_ate_cov};
use crate::graph::Role;
use crate::scm::Dataset;
use crate::stats::{bonferroni, fisher_z_test, partial_corr, sample_cov, CovView};

/// OLS coefficient of X in `Y ~ X`.
pub fn marginal_ate(data: &Dataset) -> Result<f64> {
    backdoor_ate(data, &[])
}

/// OLS coefficient of X in `Y ~ X + Z` over every Z column.
pub fn allz_ate(data: &Dataset) -> Result<f64> {
    backdoor_ate(data, &data.z_columns())
}

/// `Σ_XY / Σ_XX`.
pub fn marginal_ate_cov(cov: &CovView, x: usize, y: usize) -> Result<f64> {
    backdoor_ate_cov(cov, x, y, &[])
}

pub fn allz_ate_cov(cov: &CovView, x: usize, y: usize, z: &[usize]) -> Result<f64> {
    backdoor_ate_cov(cov, x, y, z)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStrategy {
    /// Grow from the empty set, each time adding the covariate that most
    /// reduces `|ρ(W, Y | S ∪ {X})|`.
    Greedy,
    /// Uniform subset sizes in `0..=max_subset_size`, then uniform subsets.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntnerConfig {
    pub alpha: f64,
    /// `None` means every covariate.
    pub max_subset_size: Option<usize>,
    /// Maximum number of subsets whose two tests are run.
    pub budget: usize,
    pub strategy: SearchStrategy,
    pub seed: u64,
}

impl Default for EntnerConfig {
    fn default() -> Self {
        EntnerConfig { alpha: 0.05, max_subset_size: None, budget: 500, strategy: SearchStrategy::Greedy, seed: 0 }
    }
}

impl EntnerConfig {
    pub fn validate(&self, d: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config("entner alpha must lie in (0, 1)".into()));
        }
        if self.budget == 0 {
            return Err(Error::Config("entner budget must be at least 1".into()));
        }
        if let Some(k) = self.max_subset_size {
            if k > d {
                return Err(Error::Config(format!("max_subset_size {k} exceeds the {d} covariates")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntnerResult {
    /// Dataset column indices of the accepted set, or of every Z when
    /// nothing was certified.
    pub zstar: Vec<usize>,
    pub zstar_ids: Vec<String>,
    pub ate: f64,
    pub certified: bool,
    pub subsets_tested: usize,
    pub tests_run: usize,
}

/// Searches for `S ⊆ Z` with `W ⊥ Y | S ∪ {X}` not rejected and
/// `W ⊥ Y | S` rejected, both at `alpha / tests_run`.
///
/// Falls back to the all-Z estimate with `certified = false` when the budget
/// runs out.
pub fn entner_search(data: &Dataset, cfg: &EntnerConfig) -> Result<EntnerResult> {
    let z_cols = data.z_columns();
    let d = z_cols.len();
    cfg.validate(d)?;
    let mut cols = vec![data.role_column(Role::W)?, data.role_column(Role::Y)?, data.role_column(Role::X)?];
    cols.extend(&z_cols);
    let cov = sample_cov(data, &cols)?;
    let n = data.n_rows();
    let max_size = cfg.max_subset_size.unwrap_or(d);

    let mut search = Search { cov: &cov, n, alpha: cfg.alpha, tests: 0, tested: 0, budget: cfg.budget };
    let accepted = match cfg.strategy {
        SearchStrategy::Greedy => search.greedy(d, max_size)?,
        SearchStrategy::Random => search.random(d, max_size, cfg.seed)?,
    };
    let certified = match &accepted {
        Some(s) => search.certifies(s)?,
        None => false,
    };
    let zstar: Vec<usize> = match (&accepted, certified) {
        (Some(s), true) => s.iter().map(|&i| z_cols[i]).collect(),
        _ => z_cols.clone(),
    };
    Ok(EntnerResult {
        zstar_ids: zstar.iter().map(|&c| data.columns()[c].id.clone()).collect(),
        ate: backdoor_ate(data, &zstar)?,
        zstar,
        certified,
        subsets_tested: search.tested,
        tests_run: search.tests,
    })
}

struct Search<'a> {
    cov: &'a CovView,
    n: usize,
    alpha: f64,
    tests: usize,
    tested: usize,
    budget: usize,
}

const W: usize = 0;
const Y: usize = 1;
const X: usize = 2;

impl Search<'_> {
    fn cov_idx(s: &[usize]) -> Vec<usize> {
        s.iter().map(|&i| i + 3).collect()
    }

    fn rho_dep(&self, s: &[usize]) -> Result<f64> {
        let mut given = vec![X];
        given.extend(Self::cov_idx(s));
        partial_corr(self.cov, W, Y, &given)
    }

    /// Runs both tests on `s`; singular subsets are skipped.
    fn try_subset(&mut self, s: &[usize]) -> Result<bool> {
        if self.tested == self.budget || self.n < s.len() + 5 {
            return Ok(false);
        }
        self.tested += 1;
        self.tests += 2;
        self.passes(s)
    }

    /// Both conditions at the current Bonferroni level.
    fn passes(&self, s: &[usize]) -> Result<bool> {
        let level = bonferroni(self.alpha, self.tests)?;
        let (Ok(dep), Ok(aux)) = (self.rho_dep(s), partial_corr(self.cov, W, Y, &Self::cov_idx(s))) else {
            return Ok(false);
        };
        let independent_given_x = !fisher_z_test(dep, self.n, s.len() + 1, level)?.reject;
        let dependent = fisher_z_test(aux, self.n, s.len(), level)?.reject;
        Ok(independent_given_x && dependent)
    }

    /// Re-check of an accepted set against every test run in the search.
    fn certifies(&self, s: &[usize]) -> Result<bool> {
        self.passes(s)
    }

    fn greedy(&mut self, d: usize, max_size: usize) -> Result<Option<Vec<usize>>> {
        let mut s: Vec<usize> = Vec::new();
        if self.try_subset(&s)? {
            return Ok(Some(s));
        }
        while s.len() < max_size && self.tested < self.budget {
            let mut best: Option<(f64, usize)> = None;
            let remaining: Vec<usize> = (0..d).filter(|j| !s.contains(j)).collect();
            for j in remaining {
                s.push(j);
                if let Ok(r) = self.rho_dep(&s) {
                    if best.is_none_or(|(b, _)| r.abs() < b) {
                        best = Some((r.abs(), j));
                    }
                }
                s.pop();
            }
            let Some((_, j)) = best else { break };
            s.push(j);
            if self.try_subset(&s)? {
                s.sort_unstable();
                return Ok(Some(s));
            }
        }
        Ok(None)
    }

    fn random(&mut self, d: usize, max_size: usize, seed: u64) -> Result<Option<Vec<usize>>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = BTreeSet::new();
        let mut draws = 0;
        while self.tested < self.budget && draws < 20 * self.budget {
            draws += 1;
            let k = rng.random_range(0..=max_size);
            let mut s = sample(&mut rng, d, k).into_vec();
            s.sort_unstable();
            if !seen.insert(s.clone()) {
                continue;
            }
            if self.try_subset(&s)? {
                return Ok(Some(s));
            }
        }
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::ConfoundedPair;

    fn textbook(n: usize, seed: u64) -> Dataset {
        ConfoundedPair { beta_yx: 0.5, beta_xw: 1.0, beta_yz: vec![0.8], beta_xz: vec![0.7] }
            .sem()
            .unwrap()
            .sample_data(n, seed, false)
            .unwrap()
    }

    #[test]
    fn textbook_certifies_z() {
        let data = textbook(10_000, 3);
        let r = entner_search(&data, &EntnerConfig::default()).unwrap();
        assert!(r.certified);
        assert_eq!(r.zstar_ids, vec!["z_0".to_owned()]);
        assert!((r.ate - 0.5).abs() < 0.05);
    }

    #[test]
    fn random_strategy_certifies_z() {
        let data = textbook(10_000, 4);
        let cfg = EntnerConfig { strategy: SearchStrategy::Random, seed: 11, ..Default::default() };
        let r = entner_search(&data, &cfg).unwrap();
        assert!(r.certified);
        assert_eq!(r.zstar_ids, vec!["z_0".to_owned()]);
    }

    #[test]
    fn allz_with_no_covariates_is_marginal() {
        let sem = ConfoundedPair { beta_yx: 0.5, beta_xw: 1.0, beta_yz: vec![0.8], beta_xz: vec![0.7] }.sem().unwrap();
        let data = sem.sample_data(500, 1, false).unwrap();
        let no_z = data.select_columns(&[data.role_column(Role::W).unwrap(), data.role_column(Role::X).unwrap(), data.role_column(Role::Y).unwrap()]);
        assert_eq!(allz_ate(&no_z).unwrap(), marginal_ate(&no_z).unwrap());
    }

    #[test]
    fn budget_and_size_validated() {
        let data = textbook(200, 1);
        assert!(entner_search(&data, &EntnerConfig { budget: 0, ..Default::default() }).is_err());
        assert!(entner_search(&data, &EntnerConfig { max_subset_size: Some(2), ..Default::default() }).is_err());
    }
}
