//! Log-likelihood, score, and observed/expected information.
//!
//! With `z_t = (y_t - mu_t) / sigma_t` the per-observation log-likelihood of
//! the maximum model is `-ln sigma_t - z_t - exp(-z_t)`. Derivatives flow
//! through the links and predictors by the chain rule; every quantity is
//! built from the per-observation diagonals in [`DiagonalBundle`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, ModelFrame, ModelSpec};
use crate::special::{gamma2, EULER};

/// Per-observation quantities at one parameter value, in maximum form.
///
/// Diagonal matrices are stored as vectors: `z` (𝓩), `zbreve` (𝓩̆ =
/// exp(-z)), `t` (T = 1/g'(mu)), `h` (H = 1/h'(sigma)), `phi` (Φ = sigma),
/// `ell` (𝔏, the log-likelihood contributions). `x` and `zmat` are the
/// derivative matrices of the location and dispersion predictors.
#[derive(Debug, Clone)]
pub struct DiagonalBundle {
    pub mu: DVector<f64>,
    pub phi: DVector<f64>,
    pub z: DVector<f64>,
    pub zbreve: DVector<f64>,
    pub t: DVector<f64>,
    pub h: DVector<f64>,
    pub ell: DVector<f64>,
    pub x: DMatrix<f64>,
    pub zmat: DMatrix<f64>,
    pub(crate) curvature: Curvature,
}

/// Second-derivative pieces needed only by the observed information.
#[derive(Debug, Clone)]
pub(crate) struct Curvature {
    pub eta_jac: DMatrix<f64>,
    pub mu_curv: DMatrix<f64>,
    pub mu_link2: DVector<f64>,
    pub sigma_curv: DMatrix<f64>,
    pub sigma_link2: DVector<f64>,
}

impl DiagonalBundle {
    pub fn n(&self) -> usize {
        self.z.len()
    }

    pub fn loglik(&self) -> f64 {
        self.ell.iter().sum()
    }

    /// `d mu_t / d beta`, i.e. the rows of `T X`.
    pub fn dmu(&self) -> DMatrix<f64> {
        let mut out = self.x.clone();
        for (t, mut row) in out.row_iter_mut().enumerate() {
            row *= self.t[t];
        }
        out
    }

    /// `d sigma_t / d gamma`, i.e. the rows of `H Z`.
    pub fn dsigma(&self) -> DMatrix<f64> {
        let mut out = self.zmat.clone();
        for (t, mut row) in out.row_iter_mut().enumerate() {
            row *= self.h[t];
        }
        out
    }

    /// `d ell_t / d mu_t = (1 - exp(-z)) / sigma`.
    pub fn dl_dmu(&self, t: usize) -> f64 {
        (1.0 - self.zbreve[t]) / self.phi[t]
    }

    /// `d ell_t / d sigma_t = (-1 + z - z exp(-z)) / sigma`.
    pub fn dl_dsigma(&self, t: usize) -> f64 {
        let z = self.z[t];
        (-1.0 + z - z * self.zbreve[t]) / self.phi[t]
    }

    /// Per-observation score contributions, `n x (k + m)`.
    pub fn perobs_scores(&self) -> DMatrix<f64> {
        let (n, k, m) = (self.n(), self.x.ncols(), self.zmat.ncols());
        let mut out = DMatrix::zeros(n, k + m);
        for t in 0..n {
            let a = self.dl_dmu(t) * self.t[t];
            let b = self.dl_dsigma(t) * self.h[t];
            for j in 0..k {
                out[(t, j)] = a * self.x[(t, j)];
            }
            for j in 0..m {
                out[(t, k + j)] = b * self.zmat[(t, j)];
            }
        }
        out
    }

    pub fn score(&self) -> DVector<f64> {
        column_sums(&self.perobs_scores())
    }

    /// Negative Hessian of the log-likelihood.
    pub fn observed_info(&self) -> DMatrix<f64> {
        let (n, k, m) = (self.n(), self.x.ncols(), self.zmat.ncols());
        let p = k + m;
        let dmu = self.dmu();
        let dsig = self.dsigma();
        let c = &self.curvature;
        let mut hess = DMatrix::zeros(p, p);
        for t in 0..n {
            let (z, ez, s) = (self.z[t], self.zbreve[t], self.phi[t]);
            let s2 = s * s;
            let l_mm = -ez / s2;
            let l_ms = (-1.0 + ez - z * ez) / s2;
            let l_ss = (1.0 - 2.0 * z + 2.0 * z * ez - z * z * ez) / s2;
            let l_m = self.dl_dmu(t);
            let l_s = self.dl_dsigma(t);
            for i in 0..k {
                for j in 0..=i {
                    let mut v =
                        l_mm * dmu[(t, i)] * dmu[(t, j)] + l_m * c.mu_link2[t] * c.eta_jac[(t, i)] * c.eta_jac[(t, j)];
                    if i == j {
                        v += l_m * c.mu_curv[(t, i)];
                    }
                    hess[(i, j)] += v;
                }
            }
            for i in 0..m {
                for j in 0..k {
                    hess[(k + i, j)] += l_ms * dsig[(t, i)] * dmu[(t, j)];
                }
                for j in 0..=i {
                    let mut v = l_ss * dsig[(t, i)] * dsig[(t, j)]
                        + l_s * c.sigma_link2[t] * self.zmat[(t, i)] * self.zmat[(t, j)];
                    if i == j {
                        v += l_s * c.sigma_curv[(t, i)];
                    }
                    hess[(k + i, k + j)] += v;
                }
            }
        }
        symmetrize_lower(&mut hess);
        -hess
    }

    /// Fisher information: `X'Φ⁻¹T²Φ⁻¹X`, `(E-1) X'Φ⁻¹THΦ⁻¹Z` and
    /// `(1 + Γ''(2)) Z'Φ⁻¹H²Φ⁻¹Z`.
    pub fn expected_info(&self) -> DMatrix<f64> {
        let (n, k, m) = (self.n(), self.x.ncols(), self.zmat.ncols());
        let dmu = self.dmu();
        let dsig = self.dsigma();
        let cross = EULER - 1.0;
        let disp = 1.0 + gamma2(2.0);
        let mut info = DMatrix::zeros(k + m, k + m);
        for t in 0..n {
            let w = 1.0 / (self.phi[t] * self.phi[t]);
            for i in 0..k {
                for j in 0..=i {
                    info[(i, j)] += w * dmu[(t, i)] * dmu[(t, j)];
                }
            }
            for i in 0..m {
                for j in 0..k {
                    info[(k + i, j)] += cross * w * dsig[(t, i)] * dmu[(t, j)];
                }
                for j in 0..=i {
                    info[(k + i, k + j)] += disp * w * dsig[(t, i)] * dsig[(t, j)];
                }
            }
        }
        symmetrize_lower(&mut info);
        info
    }
}

fn symmetrize_lower(a: &mut DMatrix<f64>) {
    let p = a.nrows();
    for i in 0..p {
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
        }
    }
}

/// Column sums in row order, so that the score is reproducible bit for bit
/// from the per-observation rows.
pub fn column_sums(a: &DMatrix<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.ncols());
    for t in 0..a.nrows() {
        for j in 0..a.ncols() {
            out[j] += a[(t, j)];
        }
    }
    out
}

/// Likelihood quantities at one parameter value.
#[derive(Debug, Clone)]
pub struct LikelihoodState {
    pub theta: DVector<f64>,
    pub loglik: f64,
    pub score: DVector<f64>,
    pub observed: DMatrix<f64>,
    pub expected: DMatrix<f64>,
    pub perobs: DMatrix<f64>,
    pub bundle: DiagonalBundle,
}

impl LikelihoodState {
    pub fn evaluate(frame: &ModelFrame, theta: &DVector<f64>) -> Result<Self> {
        let bundle = frame.evaluate(theta)?;
        let perobs = bundle.perobs_scores();
        Ok(Self {
            theta: theta.clone(),
            loglik: bundle.loglik(),
            score: column_sums(&perobs),
            observed: bundle.observed_info(),
            expected: bundle.expected_info(),
            perobs,
            bundle,
        })
    }
}

impl ModelFrame {
    pub fn loglik(&self, theta: &[f64]) -> Result<f64> {
        Ok(self.evaluate(&DVector::from_column_slice(theta))?.loglik())
    }

    /// Log-likelihood and score in one pass.
    pub fn loglik_and_score(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let b = self.evaluate(theta)?;
        let (n, k, m) = (b.n(), b.x.ncols(), b.zmat.ncols());
        let mut g = DVector::zeros(k + m);
        for t in 0..n {
            let a = b.dl_dmu(t) * b.t[t];
            let c = b.dl_dsigma(t) * b.h[t];
            for j in 0..k {
                g[j] += a * b.x[(t, j)];
            }
            for j in 0..m {
                g[k + j] += c * b.zmat[(t, j)];
            }
        }
        let ll = b.loglik();
        if !ll.is_finite() {
            return Err(Error::Evaluation("log-likelihood is not finite".into()));
        }
        Ok((ll, g))
    }

    pub fn state(&self, theta: &DVector<f64>) -> Result<LikelihoodState> {
        LikelihoodState::evaluate(self, theta)
    }
}

/// Sum of per-observation log densities.
pub fn loglik(model: &ModelSpec, data: &Dataset, theta: &[f64]) -> Result<f64> {
    ModelFrame::new(model, data)?.loglik(theta)
}

/// Score vector and the `n x (k + m)` matrix of per-observation
/// contributions.
pub fn score(model: &ModelSpec, data: &Dataset, theta: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let b = ModelFrame::new(model, data)?.evaluate(&DVector::from_column_slice(theta))?;
    let per = b.perobs_scores();
    Ok((column_sums(&per), per))
}

pub fn observed_info(model: &ModelSpec, data: &Dataset, theta: &[f64]) -> Result<DMatrix<f64>> {
    Ok(ModelFrame::new(model, data)?.evaluate(&DVector::from_column_slice(theta))?.observed_info())
}

pub fn expected_info(model: &ModelSpec, data: &Dataset, theta: &[f64]) -> Result<DMatrix<f64>> {
    let info = ModelFrame::new(model, data)?.evaluate(&DVector::from_column_slice(theta))?.expected_info();
    if info.clone().cholesky().is_none() {
        return Err(Error::RankDeficient("expected information is not positive definite".into()));
    }
    Ok(info)
}

/// Serializable snapshot of a [`LikelihoodState`] without the bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSummary {
    pub loglik: f64,
    pub score: Vec<f64>,
}
