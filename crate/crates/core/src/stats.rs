//! Second-moment statistics: covariance views, partial correlation by two
//! independent routes, least squares, and Fisher-z independence tests.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{input, Error, Result};
use crate::scm::Dataset;

/// Number of samples behind a covariance estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SampleSize {
    Finite(usize),
    /// Exact population moments; no sampling distribution.
    Population,
}

/// Labelled symmetric second-moment matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CovView {
    matrix: DMatrix<f64>,
    labels: Vec<String>,
    n_eff: SampleSize,
}

impl CovView {
    /// Checks shape, label uniqueness and symmetry (to 1e-12 relative).
    ///
    /// Positive definiteness is not required here; operations that need an
    /// inverse report [`Error::Singular`] on the offending submatrix.
    pub fn new(matrix: DMatrix<f64>, labels: Vec<String>, n_eff: SampleSize) -> Result<Self> {
        let p = labels.len();
        if matrix.nrows() != p || matrix.ncols() != p {
            return input(format!(
                "covariance is {}x{} but has {p} labels",
                matrix.nrows(),
                matrix.ncols()
            ));
        }
        for i in 0..p {
            if labels[i + 1..].contains(&labels[i]) {
                return input(format!("duplicate covariance label `{}`", labels[i]));
            }
            for j in 0..i {
                let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
                if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                    return input(format!("covariance not symmetric at ({i}, {j})"));
                }
            }
        }
        Ok(CovView { matrix, labels, n_eff })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_eff(&self) -> SampleSize {
        self.n_eff
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    pub fn index_of(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownNode(label.to_owned()))
    }

    pub fn indices_of(&self, labels: &[&str]) -> Result<Vec<usize>> {
        labels.iter().map(|l| self.index_of(l)).collect()
    }

    /// Sub-view on `idx`, in that order.
    pub fn select(&self, idx: &[usize]) -> CovView {
        CovView {
            matrix: submatrix(&self.matrix, idx),
            labels: idx.iter().map(|&i| self.labels[i].clone()).collect(),
            n_eff: self.n_eff,
        }
    }

    /// Copy with `eps` added to the diagonal.
    ///
    /// Not exact: this biases every partial correlation toward zero.
    pub fn ridged(&self, eps: f64) -> CovView {
        let mut out = self.clone();
        for i in 0..out.dim() {
            out.matrix[(i, i)] += eps;
        }
        out
    }

    pub fn is_positive_definite(&self) -> bool {
        Cholesky::new(self.matrix.clone()).is_some()
    }

    fn labels_of(&self, idx: &[usize]) -> Vec<String> {
        idx.iter().map(|&i| self.labels[i].clone()).collect()
    }

    fn check(&self, idx: &[usize]) -> Result<()> {
        match idx.iter().find(|&&i| i >= self.dim()) {
            Some(i) => input(format!("covariance index {i} out of range ({} columns)", self.dim())),
            None => Ok(()),
        }
    }
}

pub(crate) fn submatrix(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| m[(idx[r], idx[c])])
}

fn cholesky(m: DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    // nalgebra accepts some numerically semidefinite inputs; require a
    // strictly positive, well-scaled pivot.
    let scale = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(0.0_f64, f64::max);
    let chol = Cholesky::new(m)?;
    let l = chol.l_dirty();
    let tiny = 1e-14 * scale.max(f64::MIN_POSITIVE);
    if (0..l.nrows()).any(|i| !(l[(i, i)] * l[(i, i)] > tiny)) {
        return None;
    }
    Some(chol)
}

/// Unbiased (n - 1) sample covariance of the given dataset columns.
pub fn sample_cov(data: &Dataset, cols: &[usize]) -> Result<CovView> {
    let n = data.n_rows();
    let p = cols.len();
    if let Some(&c) = cols.iter().find(|&&c| c >= data.n_cols()) {
        return input(format!("column {c} out of range"));
    }
    if n < p + 2 {
        return input(format!("{n} rows are too few for a {p}-column covariance"));
    }
    let mut centered = DMatrix::zeros(n, p);
    for (k, &c) in cols.iter().enumerate() {
        let col = data.matrix().column(c);
        let mean = col.sum() / n as f64;
        let max_abs = col.amax();
        let mut ss = 0.0;
        for (r, v) in col.iter().enumerate() {
            let d = v - mean;
            centered[(r, k)] = d;
            ss += d * d;
        }
        let var = ss / (n - 1) as f64;
        if max_abs == 0.0 || var <= (1e-12 * max_abs).powi(2) {
            return Err(Error::DegenerateColumn(data.columns()[c].id.clone()));
        }
    }
    let mut m = centered.tr_mul(&centered) / (n - 1) as f64;
    for i in 0..p {
        for j in 0..i {
            m[(j, i)] = m[(i, j)];
        }
    }
    let labels = cols.iter().map(|&c| data.columns()[c].id.clone()).collect();
    CovView::new(m, labels, SampleSize::Finite(n))
}

/// Partial correlation of `a` and `b` given `s`, from the precision matrix
/// of the submatrix on `{a, b} ∪ s`.
pub fn partial_corr(cov: &CovView, a: usize, b: usize, s: &[usize]) -> Result<f64> {
    let idx = query_indices(cov, a, b, s)?;
    let chol = cholesky(submatrix(&cov.matrix, &idx))
        .ok_or_else(|| Error::Singular { set: cov.labels_of(s) })?;
    let prec = chol.inverse();
    let denom = (prec[(0, 0)] * prec[(1, 1)]).sqrt();
    Ok((-prec[(0, 1)] / denom).clamp(-1.0, 1.0))
}

/// Partial correlation computed as the correlation of the residuals of `a`
/// and `b` after regressing each on `s`.
pub fn partial_corr_residual(cov: &CovView, a: usize, b: usize, s: &[usize]) -> Result<f64> {
    query_indices(cov, a, b, s)?;
    let singular = || Error::Singular { set: cov.labels_of(s) };
    let (raa, rbb, rab) = if s.is_empty() {
        (cov.get(a, a), cov.get(b, b), cov.get(a, b))
    } else {
        let chol = cholesky(submatrix(&cov.matrix, s)).ok_or_else(singular)?;
        let col = |t: usize| DVector::from_iterator(s.len(), s.iter().map(|&k| cov.get(k, t)));
        let (sa, sb) = (col(a), col(b));
        let (ca, cb) = (chol.solve(&sa), chol.solve(&sb));
        (cov.get(a, a) - sa.dot(&ca), cov.get(b, b) - sb.dot(&cb), cov.get(a, b) - sa.dot(&cb))
    };
    if !(raa > 0.0 && rbb > 0.0) {
        return Err(singular());
    }
    Ok((rab / (raa * rbb).sqrt()).clamp(-1.0, 1.0))
}

fn query_indices(cov: &CovView, a: usize, b: usize, s: &[usize]) -> Result<Vec<usize>> {
    cov.check(&[a, b])?;
    cov.check(s)?;
    if a == b {
        return input("partial correlation needs two distinct variables");
    }
    if s.contains(&a) || s.contains(&b) {
        return input("conditioning set overlaps the query pair");
    }
    let mut idx = Vec::with_capacity(s.len() + 2);
    idx.extend([a, b]);
    idx.extend_from_slice(s);
    Ok(idx)
}

/// Covariance over `base` plus one synthetic column `phi = beta' Z`, where
/// `z` indexes the columns combined by `beta`. The new column is last and
/// labelled `phi_label`.
pub fn synthetic_column_cov(
    cov: &CovView,
    base: &[usize],
    z: &[usize],
    beta: &[f64],
    phi_label: &str,
) -> Result<CovView> {
    if z.is_empty() || z.len() != beta.len() {
        return input(format!("beta has {} entries for {} covariates", beta.len(), z.len()));
    }
    cov.check(base)?;
    cov.check(z)?;
    let k = base.len();
    let mut m = DMatrix::zeros(k + 1, k + 1);
    for (r, &i) in base.iter().enumerate() {
        for (c, &j) in base.iter().enumerate() {
            m[(r, c)] = cov.get(i, j);
        }
        let cross: f64 = z.iter().zip(beta).map(|(&zj, bj)| bj * cov.get(zj, i)).sum();
        m[(r, k)] = cross;
        m[(k, r)] = cross;
    }
    let mut var = 0.0;
    for (a, &za) in z.iter().enumerate() {
        let row: f64 = z.iter().zip(beta).map(|(&zb, bb)| bb * cov.get(za, zb)).sum();
        var += beta[a] * row;
    }
    if !(var >= 1e-12) {
        return Err(Error::DegenerateDirection(var));
    }
    m[(k, k)] = var;
    let mut labels = cov.labels_of(base);
    labels.push(phi_label.to_owned());
    CovView::new(m, labels, cov.n_eff)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OlsFit {
    pub coefficients: Vec<f64>,
    pub residual_variance: f64,
}

/// Least squares of `y` on `xs` from second moments: `Σxx⁻¹ Σxy`.
///
/// On a sample covariance this equals OLS with an intercept.
pub fn ols(cov: &CovView, y: usize, xs: &[usize]) -> Result<OlsFit> {
    cov.check(&[y])?;
    cov.check(xs)?;
    if xs.contains(&y) {
        return input("response appears among the regressors");
    }
    if xs.is_empty() {
        return Ok(OlsFit { coefficients: Vec::new(), residual_variance: cov.get(y, y) });
    }
    let chol = cholesky(submatrix(&cov.matrix, xs))
        .ok_or_else(|| Error::Singular { set: cov.labels_of(xs) })?;
    let sxy = DVector::from_iterator(xs.len(), xs.iter().map(|&k| cov.get(k, y)));
    let coef = chol.solve(&sxy);
    let resid = (cov.get(y, y) - sxy.dot(&coef)).max(0.0);
    Ok(OlsFit { coefficients: coef.iter().copied().collect(), residual_variance: resid })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub reject: bool,
    pub alpha_used: f64,
}

/// Two-sided Fisher-z test of a zero (partial) correlation.
pub fn fisher_z_test(r: f64, n: usize, s_size: usize, alpha: f64) -> Result<TestResult> {
    if !(r.abs() <= 1.0) {
        return input(format!("correlation {r} outside [-1, 1]"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return input(format!("significance level {alpha} outside (0, 1]"));
    }
    if n < s_size + 4 {
        return input(format!("n = {n} too small for a conditioning set of size {s_size}"));
    }
    if r.abs() == 1.0 {
        return Ok(TestResult { statistic: r * f64::INFINITY, p_value: 0.0, reject: true, alpha_used: alpha });
    }
    let z = 0.5 * ((1.0 + r) / (1.0 - r)).ln();
    let statistic = ((n - s_size - 3) as f64).sqrt() * z;
    let p_value = erfc(statistic.abs() / std::f64::consts::SQRT_2).clamp(0.0, 1.0);
    Ok(TestResult { statistic, p_value, reject: p_value < alpha, alpha_used: alpha })
}

/// Fisher-z test of `ρ(a, b | s) = 0` on a sample covariance.
pub fn independence_test(cov: &CovView, a: usize, b: usize, s: &[usize], alpha: f64) -> Result<TestResult> {
    let SampleSize::Finite(n) = cov.n_eff() else {
        return Err(Error::PopulationView);
    };
    let r = partial_corr(cov, a, b, s)?;
    fisher_z_test(r, n, s.len(), alpha)
}

pub fn bonferroni(alpha: f64, m: usize) -> Result<f64> {
    if m == 0 {
        return input("Bonferroni correction needs at least one test");
    }
    Ok(alpha / m as f64)
}
