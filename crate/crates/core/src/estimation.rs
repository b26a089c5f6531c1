//! Backdoor adjustment in the linear-Gaussian case: the ATE is the X
//! coefficient of the regression of Y on X and the adjustment set.

use serde::{Deserialize, Serialize};

use crate::error::{input, Result};
use crate::graph::Role;
use crate::scm::Dataset;
use crate::stats::{ols, sample_cov, CovView, SampleSize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AteEstimate {
    pub ate: f64,
    /// Homoscedastic OLS standard error; NaN for population inputs.
    pub std_error: f64,
}

/// ATE from a sample, adjusting for the dataset columns in `zstar`.
///
/// Standardized datasets are mapped back to the original units of X and Y
/// through their recorded scale factors.
pub fn backdoor_ate(data: &Dataset, zstar: &[usize]) -> Result<f64> {
    Ok(backdoor_fit(data, zstar)?.ate)
}

pub fn backdoor_fit(data: &Dataset, zstar: &[usize]) -> Result<AteEstimate> {
    let x = data.role_column(Role::X)?;
    let y = data.role_column(Role::Y)?;
    for &z in zstar {
        if z >= data.n_cols() || data.columns()[z].role != Role::Z {
            return input(format!("adjustment column {z} is not a Z column"));
        }
    }
    let mut cols = vec![y, x];
    cols.extend_from_slice(zstar);
    let cov = sample_cov(data, &cols)?;
    let fit = fit_on_cov(&cov, 1, 0, &(2..cols.len()).collect::<Vec<_>>())?;
    let unit = data.scale_factors()[y] / data.scale_factors()[x];
    Ok(AteEstimate { ate: fit.ate * unit, std_error: fit.std_error * unit })
}

/// ATE from second moments; exact on a population covariance.
pub fn backdoor_ate_cov(cov: &CovView, x: usize, y: usize, zstar: &[usize]) -> Result<f64> {
    Ok(fit_on_cov(cov, x, y, zstar)?.ate)
}

fn fit_on_cov(cov: &CovView, x: usize, y: usize, zstar: &[usize]) -> Result<AteEstimate> {
    let mut xs = vec![x];
    xs.extend_from_slice(zstar);
    let fit = ols(cov, y, &xs)?;
    let ate = fit.coefficients[0];
    let std_error = match cov.n_eff() {
        SampleSize::Finite(n) if n > xs.len() + 1 => {
            let x_resid = ols(cov, x, zstar)?.residual_variance;
            (fit.residual_variance / ((n - xs.len() - 1) as f64 * x_resid)).sqrt()
        }
        _ => f64::NAN,
    };
    Ok(AteEstimate { ate, std_error })
}

pub fn ate_error(estimate: f64, truth: f64) -> f64 {
    (estimate - truth).abs()
}
