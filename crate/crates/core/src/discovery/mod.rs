//! Differentiable search for a backdoor adjustment set.
//!
//! The objective over `gamma` is
//!
//! ```text
//! |ρ(W, Y | X, βᵀZ)| − λ₁ |ρ(W, Y | βᵀZ)| + λ₂ ‖β‖₁,   β = γ / ‖γ‖₂
//! ```
//!
//! Both correlations depend on `beta` only through the cross-covariances
//! `c = βᵀ Cov(Z, (W, Y, X))` and the variance `v = βᵀ Σ_ZZ β`, so the
//! gradient is taken with respect to those four scalars by forward-mode
//! dual numbers and then pulled back to `beta` and `gamma`.

mod dual;
mod optimize;
mod tune;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};
use crate::graph::Role;
use crate::scm::Dataset;
use crate::stats::{partial_corr, sample_cov, synthetic_column_cov, CovView, SampleSize};

use dual::Dual;

pub use optimize::{optimize, DiscoveryConfig, DiscoveryResult, InitGamma, Lambda2Rule, Smoothing, StepRule};
pub use tune::{tune, tune_holdout, GridScore, TuneOutcome, TuningGrid};

/// Smoothing for `|r|` in the gradient only.
pub const ABS_SMOOTHING: f64 = 1e-8;

const W: usize = 0;
const Y: usize = 1;
const X: usize = 2;
const Z0: usize = 3;

/// Second moments over `(W, Y, X, Z_1..Z_d)` in that order.
#[derive(Clone, Debug)]
pub struct DiscoveryProblem {
    cov: CovView,
    /// `Cov(Z, (W, Y, X))`, d x 3.
    cross: DMatrix<f64>,
    zz: DMatrix<f64>,
}

/// Signed correlations and the ℓ₁ norm behind one objective value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveTerms {
    /// `ρ(W, Y | X, βᵀZ)`
    pub rho_dep: f64,
    /// `ρ(W, Y | βᵀZ)`
    pub rho_aux: f64,
    /// `‖β‖₁`
    pub l1: f64,
}

impl ObjectiveTerms {
    pub fn value(&self, lambda1: f64, lambda2: f64) -> f64 {
        self.rho_dep.abs() - lambda1 * self.rho_aux.abs() + lambda2 * self.l1
    }
}

impl DiscoveryProblem {
    /// `cov` must already be ordered `(W, Y, X, Z...)`.
    pub fn new(cov: CovView) -> Result<Self> {
        let d = cov.dim().checked_sub(Z0).filter(|&d| d > 0);
        let Some(d) = d else {
            return input("discovery needs W, Y, X and at least one Z");
        };
        let m = cov.matrix();
        let cross = DMatrix::from_fn(d, 3, |i, k| m[(Z0 + i, k)]);
        let zz = m.view((Z0, Z0), (d, d)).into_owned();
        Ok(DiscoveryProblem { cov, cross, zz })
    }

    /// Picks W, Y, X and `z` out of an arbitrary covariance view.
    pub fn from_cov(cov: &CovView, w: usize, y: usize, x: usize, z: &[usize]) -> Result<Self> {
        let mut idx = vec![w, y, x];
        idx.extend_from_slice(z);
        if let Some(&i) = idx.iter().find(|&&i| i >= cov.dim()) {
            return input(format!("covariance index {i} out of range"));
        }
        Self::new(cov.select(&idx))
    }

    /// Sample covariance over the dataset's W, Y, X and Z columns.
    pub fn from_dataset(data: &Dataset) -> Result<Self> {
        let mut cols = vec![data.role_column(Role::W)?, data.role_column(Role::Y)?, data.role_column(Role::X)?];
        cols.extend(data.z_columns());
        Self::new(sample_cov(data, &cols)?)
    }

    pub fn ridged(&self, eps: f64) -> Result<Self> {
        Self::new(self.cov.ridged(eps))
    }

    pub fn cov(&self) -> &CovView {
        &self.cov
    }

    pub fn dim(&self) -> usize {
        self.zz.nrows()
    }

    pub fn z_ids(&self) -> &[String] {
        &self.cov.labels()[Z0..]
    }

    pub fn n_eff(&self) -> SampleSize {
        self.cov.n_eff()
    }

    /// Objective value and its terms, computed by materializing `βᵀZ` as a
    /// covariance column and taking precision-matrix partial correlations.
    pub fn objective(&self, gamma: &[f64], lambda1: f64, lambda2: f64) -> Result<(f64, ObjectiveTerms)> {
        let beta = self.normalize(gamma)?;
        let z: Vec<usize> = (Z0..self.cov.dim()).collect();
        let four = synthetic_column_cov(&self.cov, &[W, Y, X], &z, &beta, "phi")?;
        let terms = ObjectiveTerms {
            rho_dep: partial_corr(&four, 0, 1, &[2, 3])?,
            rho_aux: partial_corr(&four, 0, 1, &[3])?,
            l1: beta.iter().map(|b| b.abs()).sum(),
        };
        Ok((terms.value(lambda1, lambda2), terms))
    }

    /// Gradient of the objective with respect to `gamma`.
    ///
    /// `|r|` is smoothed to `sqrt(r² + ε²)`; the ℓ₁ subgradient is 0 where a
    /// component of `beta` is exactly 0.
    pub fn gradient(&self, gamma: &[f64], lambda1: f64, lambda2: f64) -> Result<Vec<f64>> {
        Ok(self.evaluate(gamma, lambda1, lambda2)?.grad)
    }

    /// Closed-form objective with its gradient, used by the optimizer.
    pub(crate) fn evaluate(&self, gamma: &[f64], lambda1: f64, lambda2: f64) -> Result<Evaluation> {
        self.evaluate_smoothed(gamma, lambda1, lambda2, None)
    }

    /// With `Some(eps)` both the value and the gradient use
    /// `sqrt(r² + eps²)` for `|r|`; with `None` the value is exact and the
    /// gradient uses [`ABS_SMOOTHING`].
    pub(crate) fn evaluate_smoothed(&self, gamma: &[f64], lambda1: f64, lambda2: f64, eps: Option<f64>) -> Result<Evaluation> {
        let beta = DVector::from_vec(self.normalize(gamma)?);
        let norm = gamma.iter().map(|g| g * g).sum::<f64>().sqrt();
        let c = self.cross.tr_mul(&beta);
        let q = &self.zz * &beta;
        let v = beta.dot(&q);
        if !(v >= 1e-12) {
            return Err(Error::DegenerateDirection(v));
        }
        let (rho_dep, rho_aux) = self.correlations([c[0], c[1], c[2]], v)?;
        let terms = ObjectiveTerms { rho_dep: rho_dep.v, rho_aux: rho_aux.v, l1: beta.iter().map(|b| b.abs()).sum() };

        let pull = |r: &Dual| -> DVector<f64> { self.cross.column(0) * r.d[0] + self.cross.column(1) * r.d[1] + self.cross.column(2) * r.d[2] + &q * (2.0 * r.d[3]) };
        let e = eps.unwrap_or(ABS_SMOOTHING);
        let smooth = |r: f64| r / (r * r + e * e).sqrt();
        let mut g_beta = pull(&rho_dep) * smooth(rho_dep.v) - pull(&rho_aux) * (lambda1 * smooth(rho_aux.v));
        for (g, b) in g_beta.iter_mut().zip(beta.iter()) {
            if *b != 0.0 {
                *g += lambda2 * b.signum();
            }
        }
        let radial = beta.dot(&g_beta);
        let grad = (g_beta - &beta * radial) / norm;
        let value = match eps {
            None => terms.value(lambda1, lambda2),
            Some(e) => terms.rho_dep.hypot(e) - lambda1 * terms.rho_aux.hypot(e) + lambda2 * terms.l1,
        };
        Ok(Evaluation { value, terms, grad: grad.iter().copied().collect() })
    }

    /// `ρ(W, Y | X, φ)` and `ρ(W, Y | φ)` as duals over `(c_w, c_y, c_x, v)`.
    fn correlations(&self, c: [f64; 3], v: f64) -> Result<(Dual, Dual)> {
        let m = self.cov.matrix();
        let cv = [Dual::var(c[0], 0), Dual::var(c[1], 1), Dual::var(c[2], 2)];
        let v = Dual::var(v, 3);
        // Covariance of (W, Y, X) given φ.
        let s = |i: usize, j: usize| Dual::constant(m[(i, j)]) - cv[i] * cv[j] / v;
        let (sww, syy, sxx, swy, swx, syx) = (s(W, W), s(Y, Y), s(X, X), s(W, Y), s(W, X), s(Y, X));
        let singular = || Error::Singular { set: vec![self.cov.labels()[X].clone(), "phi".to_owned()] };
        if !(sww.v > 0.0 && syy.v > 0.0) {
            return Err(Error::Singular { set: vec!["phi".to_owned()] });
        }
        if !(sxx.v > 0.0) {
            return Err(singular());
        }
        let rho_aux = swy / (sww * syy).sqrt();
        let pww = sww - swx * swx / sxx;
        let pyy = syy - syx * syx / sxx;
        if !(pww.v > 0.0 && pyy.v > 0.0) {
            return Err(singular());
        }
        let rho_dep = (swy - swx * syx / sxx) / (pww * pyy).sqrt();
        Ok((rho_dep, rho_aux))
    }

    fn normalize(&self, gamma: &[f64]) -> Result<Vec<f64>> {
        if gamma.len() != self.dim() {
            return input(format!("gamma has {} entries for {} covariates", gamma.len(), self.dim()));
        }
        if gamma.iter().any(|g| !g.is_finite()) {
            return input("gamma has non-finite entries");
        }
        let norm = gamma.iter().map(|g| g * g).sum::<f64>().sqrt();
        if !(norm > 1e-12) {
            return Err(Error::ZeroGamma);
        }
        Ok(gamma.iter().map(|g| g / norm).collect())
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Evaluation {
    pub value: f64,
    pub terms: ObjectiveTerms,
    pub grad: Vec<f64>,
}

/// Support of a unit-norm `beta` at `threshold`.
pub fn support(beta: &[f64], threshold: f64) -> Vec<usize> {
    (0..beta.len()).filter(|&i| beta[i].abs() > threshold).collect()
}

/// `1 / (2 sqrt(d))`.
pub fn default_support_threshold(d: usize) -> f64 {
    0.5 / (d.max(1) as f64).sqrt()
}
