//! Orthogonal reparameterization for a location coefficient of interest and
//! the statistic built on it.
//!
//! With interest coordinate `r`, the new parameter `vartheta` keeps the
//! positional layout of `theta`: `vartheta_r = theta_r` and every other
//! coordinate satisfies `theta_j = vartheta_j - vartheta_r c_j`, where
//! `c = I_(r)(r)^{-1} I_(r)r` is taken from the expected information at an
//! anchor. At the anchor the expected information of `vartheta` has no
//! cross terms between the interest and the nuisance block.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fit::{fit_frame, fit_restricted_frame, FitResult, HypothesisSpec};
use crate::hots::{adjust, signed_lr, NEAR_ZERO};
use crate::linalg::{delete_entry, delete_row_col, positive_det, spd_inverse};
use crate::model::{Dataset, ModelFrame, ModelSpec};
use crate::optim::{maximize, BfgsOptions};

#[derive(Debug, Clone)]
pub struct OrthogonalizedModel {
    pub base: ModelSpec,
    pub interest: usize,
    pub anchor: DVector<f64>,
    /// `c` in `theta_j = vartheta_j - vartheta_r c_j`; `c_r = 0`.
    pub coefficients: DVector<f64>,
}

/// Likelihood quantities in the orthogonal parameterization.
#[derive(Debug, Clone)]
pub struct ReparamLikelihood {
    pub loglik: f64,
    pub score: DVector<f64>,
    /// Score component of the interest parameter.
    pub score_interest: f64,
    pub observed: DMatrix<f64>,
    pub expected: DMatrix<f64>,
    /// Expected information of the interest parameter.
    pub info_interest: f64,
}

impl OrthogonalizedModel {
    /// Coefficients attached to the other location parameters.
    pub fn location_map(&self) -> Vec<f64> {
        let k = self.base.k();
        (0..k).filter(|&j| j != self.interest).map(|j| self.coefficients[j]).collect()
    }

    /// Coefficients attached to the dispersion parameters.
    pub fn dispersion_map(&self) -> Vec<f64> {
        self.coefficients.iter().skip(self.base.k()).copied().collect()
    }

    pub fn to_theta(&self, vartheta: &DVector<f64>) -> DVector<f64> {
        let v = vartheta[self.interest];
        let mut th = vartheta - v * &self.coefficients;
        th[self.interest] = v;
        th
    }

    pub fn to_vartheta(&self, theta: &DVector<f64>) -> DVector<f64> {
        let v = theta[self.interest];
        let mut out = theta + v * &self.coefficients;
        out[self.interest] = v;
        out
    }

    /// `d theta / d vartheta`: the identity with column `r` replaced by
    /// `(-c, 1)`.
    pub fn jacobian(&self) -> DMatrix<f64> {
        let p = self.coefficients.len();
        let mut m = DMatrix::identity(p, p);
        for j in 0..p {
            if j != self.interest {
                m[(j, self.interest)] = -self.coefficients[j];
            }
        }
        m
    }

    pub fn evaluate(&self, frame: &ModelFrame, vartheta: &DVector<f64>) -> Result<ReparamLikelihood> {
        let state = frame.state(&self.to_theta(vartheta))?;
        let m = self.jacobian();
        let score = m.transpose() * &state.score;
        let observed = m.transpose() * &state.observed * &m;
        let expected = m.transpose() * &state.expected * &m;
        let r = self.interest;
        Ok(ReparamLikelihood {
            loglik: state.loglik,
            score_interest: score[r],
            info_interest: expected[(r, r)],
            score,
            observed,
            expected,
        })
    }

    fn loglik_and_score(&self, frame: &ModelFrame, vartheta: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
        let (ll, g) = frame.loglik_and_score(&self.to_theta(vartheta))?;
        Ok((ll, self.jacobian().transpose() * g))
    }
}

/// Builds the reparameterization from the expected information at `anchor`.
pub fn orthogonalize(
    model: &ModelSpec,
    data: &Dataset,
    hyp: &HypothesisSpec,
    anchor: &DVector<f64>,
) -> Result<OrthogonalizedModel> {
    orthogonalize_frame(&ModelFrame::new(model, data)?, hyp, anchor)
}

pub fn orthogonalize_frame(
    frame: &ModelFrame,
    hyp: &HypothesisSpec,
    anchor: &DVector<f64>,
) -> Result<OrthogonalizedModel> {
    hyp.check(frame.n_params())?;
    let r = hyp.param;
    if r >= frame.k() {
        return Err(Error::Unsupported(
            "the orthogonal parameterization needs the interest parameter in the location block".into(),
        ));
    }
    let info = frame.evaluate(anchor)?.expected_info();
    let rest = delete_row_col(&info, r);
    let cross = delete_entry(&DVector::from_iterator(info.nrows(), info.column(r).iter().copied()), r);
    let sol = spd_inverse(&rest, "nuisance block of the expected information at the anchor")? * cross;
    Ok(OrthogonalizedModel {
        base: frame.spec().clone(),
        interest: r,
        anchor: anchor.clone(),
        coefficients: sol.insert_row(r, 0.0),
    })
}

/// `(l*, l*_r, J*, I*_rr)` at `vartheta`.
pub fn reparam_likelihood(
    om: &OrthogonalizedModel,
    data: &Dataset,
    vartheta: &DVector<f64>,
) -> Result<(f64, f64, DMatrix<f64>, f64)> {
    let rl = om.evaluate(&ModelFrame::new(&om.base, data)?, vartheta)?;
    Ok((rl.loglik, rl.score_interest, rl.observed, rl.info_interest))
}

fn refit(
    om: &OrthogonalizedModel,
    frame: &ModelFrame,
    start: &DVector<f64>,
    fixed: Option<f64>,
) -> Result<DVector<f64>> {
    let r = om.interest;
    match fixed {
        None => {
            let out = maximize(|v| om.loglik_and_score(frame, v), start.clone(), None, &BfgsOptions::default())?;
            Ok(out.x)
        }
        Some(v0) => {
            let expand = |psi: &DVector<f64>| psi.clone().insert_row(r, v0);
            let out = maximize(
                |psi| {
                    let (ll, g) = om.loglik_and_score(frame, &expand(psi))?;
                    Ok((ll, delete_entry(&g, r)))
                },
                delete_entry(start, r),
                None,
                &BfgsOptions::default(),
            )?;
            Ok(expand(&out.x))
        }
    }
}

/// Correction factor of the orthogonal-parameterization statistic, with its
/// sign taken from `R`.
pub fn r0_u(frame: &ModelFrame, full: &FitResult, restr: &FitResult, hyp: &HypothesisSpec) -> Result<f64> {
    let om = orthogonalize_frame(frame, hyp, &restr.theta_hat)?;
    let r = hyp.param;
    let vhat = refit(&om, frame, &om.to_vartheta(&full.theta_hat), None)?;
    let vtilde = refit(&om, frame, &om.to_vartheta(&restr.theta_hat), Some(hyp.null_value))?;
    let at_hat = om.evaluate(frame, &vhat)?;
    let at_tilde = om.evaluate(frame, &vtilde)?;
    let jh = positive_det(&at_hat.observed, "observed information at the unrestricted estimate")?;
    let jt = positive_det(
        &delete_row_col(&at_tilde.observed, r),
        "nuisance block of the observed information at the restricted estimate",
    )?;
    if !(at_hat.info_interest > 0.0 && at_tilde.info_interest > 0.0) {
        return Err(Error::Conditioning {
            what: "interest information in the orthogonal parameterization".into(),
            determinants: vec![at_hat.info_interest, at_tilde.info_interest],
        });
    }
    let magnitude =
        (at_tilde.score_interest * (jt * at_hat.info_interest / (jh * at_tilde.info_interest)).sqrt()).abs();
    let sign = signed_lr(full, restr, hyp)?.signum();
    Ok(sign * magnitude)
}

/// Fits both models and returns the adjusted statistic.
pub fn r0_statistic(model: &ModelSpec, data: &Dataset, hyp: &HypothesisSpec) -> Result<f64> {
    let frame = ModelFrame::new(model, data)?;
    let full = fit_frame(&frame, None)?;
    let mut warm = full.theta_hat.clone();
    warm[hyp.param] = hyp.null_value;
    let restr = fit_restricted_frame(&frame, hyp, Some(&warm))?;
    let r = signed_lr(&full, &restr, hyp)?;
    if r.abs() < NEAR_ZERO {
        return Ok(r);
    }
    adjust(r, r0_u(&frame, &full, &restr, hyp)?)
}
