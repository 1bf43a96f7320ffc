//! Full and restricted maximum likelihood by BFGS with analytic gradients.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::LikelihoodState;
use crate::linalg::{delete_entry, spd_inverse, sup_norm};
use crate::model::{Dataset, ModelFrame, ModelSpec};
use crate::optim::{maximize, BfgsOptions};
use crate::special::EULER;

/// Alternative hypothesis direction for a one-sided test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// H1: parameter > null value.
    Greater,
    /// H1: parameter < null value.
    Less,
}

impl std::str::FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "greater" | ">" => Ok(Direction::Greater),
            "less" | "<" => Ok(Direction::Less),
            other => Err(Error::Model(format!("unknown direction '{other}' (expected greater or less)"))),
        }
    }
}

/// A scalar null hypothesis on one coordinate of `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSpec {
    pub param: usize,
    pub null_value: f64,
    pub direction: Direction,
}

impl HypothesisSpec {
    pub fn new(param: usize, null_value: f64, direction: Direction) -> Self {
        Self { param, null_value, direction }
    }

    pub fn check(&self, n_params: usize) -> Result<()> {
        if self.param >= n_params {
            return Err(Error::Model(format!("parameter index {} out of range (model has {n_params})", self.param)));
        }
        if !self.null_value.is_finite() {
            return Err(Error::Model("null value must be finite".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta_hat: DVector<f64>,
    pub loglik_hat: f64,
    pub state: LikelihoodState,
    pub converged: bool,
    pub iterations: usize,
    /// Sup-norm of the gradient over the free coordinates.
    pub grad_norm: f64,
    /// Square roots of the diagonal of the inverse expected information;
    /// NaN when it is singular.
    pub se: DVector<f64>,
    /// `(param, value)` for a restricted fit.
    pub restricted_to: Option<(usize, f64)>,
}

/// Serializable form of a [`FitResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub params: Vec<String>,
    pub theta: Vec<f64>,
    pub se: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub grad_norm: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub restricted_to: Option<(usize, f64)>,
}

impl FitResult {
    pub fn report(&self, spec: &ModelSpec) -> FitReport {
        FitReport {
            params: spec.param_names(),
            theta: self.theta_hat.iter().copied().collect(),
            se: self.se.iter().copied().collect(),
            loglik: self.loglik_hat,
            converged: self.converged,
            iterations: self.iterations,
            grad_norm: self.grad_norm,
            restricted_to: self.restricted_to,
        }
    }
}

/// Least squares on the linear location columns, moment-matched dispersion.
pub fn default_init(model: &ModelSpec, data: &Dataset) -> Result<DVector<f64>> {
    Ok(initial_values(&ModelFrame::new(model, data)?))
}

pub(crate) fn initial_values(frame: &ModelFrame) -> DVector<f64> {
    let n = frame.n();
    let (k, m) = (frame.k(), frame.m());
    let loc = frame.location_predictor();
    let disp = frame.dispersion_predictor();
    let link = frame.spec().dispersion.link;
    let mu_sign = frame.mu_sign();

    // response oriented so that E[r] = eta + mu_sign * E * sigma
    let offset = loc.power_offset(n);
    let r: Vec<f64> = frame.response_max_form().iter().zip(&offset).map(|(y, o)| mu_sign * y - o).collect();
    let cols = loc.linear_columns(n);
    let idx: Vec<usize> = (0..k).filter(|&j| cols[j].is_some()).collect();

    let mut theta = DVector::zeros(k + m);
    for j in 0..k {
        if cols[j].is_none() {
            theta[j] = 1.0;
        }
    }

    let resid_var = |fitted: &[f64]| {
        let res: Vec<f64> = r.iter().zip(fitted).map(|(a, b)| a - b).collect();
        let mean = res.iter().sum::<f64>() / n as f64;
        res.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64
    };

    let mut fitted = vec![0.0; n];
    let mut ls_ok = false;
    if !idx.is_empty() && n > idx.len() {
        let xm = DMatrix::from_fn(n, idx.len(), |t, c| cols[idx[c]].as_ref().unwrap()[t]);
        let rv = DVector::from_column_slice(&r);
        let svd = xm.clone().svd(true, true);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smax > 0.0 && smin > 1e-10 * smax {
            if let Ok(b) = svd.solve(&rv, 0.0) {
                if b.iter().all(|v| v.is_finite()) {
                    for (c, &j) in idx.iter().enumerate() {
                        theta[j] = b[c];
                    }
                    let f = &xm * b;
                    fitted.copy_from_slice(f.as_slice());
                    ls_ok = true;
                }
            }
        }
    }
    if !ls_ok {
        for &j in &idx {
            theta[j] = 0.0;
        }
    }
    let mut var = resid_var(&fitted);
    if !(var > 0.0 && var.is_finite()) {
        var = 1.0;
    }
    let sigma0 = (6.0 * var).sqrt() / std::f64::consts::PI;
    if ls_ok {
        let shift = mu_sign * EULER * sigma0;
        if let Some(j) =
            (0..k).find(|&j| matches!(&frame.spec().location.predictor.terms()[j], crate::model::Term::Intercept))
        {
            theta[j] -= shift;
        }
    }

    let target = link.link(sigma0);
    let dterms = frame.spec().dispersion.predictor.terms();
    if disp.has_intercept() {
        for (j, term) in dterms.iter().enumerate() {
            theta[k + j] = match term {
                crate::model::Term::Intercept => target,
                crate::model::Term::Linear(_) => 0.0,
                crate::model::Term::Power(_) => 1.0,
            };
        }
    } else {
        // no constant column: least squares of the target on the linear columns
        let dcols = disp.linear_columns(n);
        let doff = disp.power_offset(n);
        let didx: Vec<usize> = (0..m).filter(|&j| dcols[j].is_some()).collect();
        for j in 0..m {
            theta[k + j] = if dcols[j].is_none() { 1.0 } else { 0.0 };
        }
        if !didx.is_empty() {
            let zm = DMatrix::from_fn(n, didx.len(), |t, c| dcols[didx[c]].as_ref().unwrap()[t]);
            let rhs = DVector::from_iterator(n, doff.iter().map(|o| target - o));
            if let Ok(g) = zm.svd(true, true).solve(&rhs, 1e-12) {
                for (c, &j) in didx.iter().enumerate() {
                    theta[k + j] = g[c];
                }
            }
        }
    }
    theta
}

fn standard_errors(expected: &DMatrix<f64>) -> DVector<f64> {
    match spd_inverse(expected, "expected information") {
        Ok(inv) => DVector::from_iterator(inv.nrows(), inv.diagonal().iter().map(|v| v.sqrt())),
        Err(_) => DVector::from_element(expected.nrows(), f64::NAN),
    }
}

fn starting_metric(frame: &ModelFrame, theta: &DVector<f64>, drop: Option<usize>) -> Option<DMatrix<f64>> {
    let info = frame.evaluate(theta).ok()?.expected_info();
    let info = match drop {
        Some(r) => crate::linalg::delete_row_col(&info, r),
        None => info,
    };
    spd_inverse(&info, "expected information").ok()
}

/// Unrestricted fit on a bound frame.
pub fn fit_frame(frame: &ModelFrame, init: Option<&DVector<f64>>) -> Result<FitResult> {
    let theta0 = init.cloned().unwrap_or_else(|| initial_values(frame));
    if theta0.len() != frame.n_params() {
        return Err(Error::Model(format!("init has {} values, model has {}", theta0.len(), frame.n_params())));
    }
    if frame.n() <= frame.n_params() {
        return Err(Error::Data(format!("{} observations for {} parameters", frame.n(), frame.n_params())));
    }
    let h0 = starting_metric(frame, &theta0, None);
    let out = maximize(|th| frame.loglik_and_score(th), theta0, h0, &BfgsOptions::default())?;
    let state = frame.state(&out.x)?;
    Ok(FitResult {
        se: standard_errors(&state.expected),
        theta_hat: out.x,
        loglik_hat: state.loglik,
        state,
        converged: out.converged,
        iterations: out.iterations,
        grad_norm: out.grad_norm,
        restricted_to: None,
    })
}

/// Fit with the hypothesis coordinate held at its null value; the free
/// coordinates are optimized directly.
pub fn fit_restricted_frame(
    frame: &ModelFrame,
    hyp: &HypothesisSpec,
    init: Option<&DVector<f64>>,
) -> Result<FitResult> {
    hyp.check(frame.n_params())?;
    let r = hyp.param;
    let mut theta0 = init.cloned().unwrap_or_else(|| initial_values(frame));
    if theta0.len() != frame.n_params() {
        return Err(Error::Model(format!("init has {} values, model has {}", theta0.len(), frame.n_params())));
    }
    if frame.n() < frame.n_params() {
        return Err(Error::Data(format!("{} observations for {} parameters", frame.n(), frame.n_params())));
    }
    theta0[r] = hyp.null_value;
    let expand = |psi: &DVector<f64>| {
        let mut th = psi.clone().insert_row(r, hyp.null_value);
        th[r] = hyp.null_value;
        th
    };
    let h0 = starting_metric(frame, &theta0, Some(r));
    let psi0 = delete_entry(&theta0, r);
    let out = maximize(
        |psi| {
            let (ll, g) = frame.loglik_and_score(&expand(psi))?;
            Ok((ll, delete_entry(&g, r)))
        },
        psi0,
        h0,
        &BfgsOptions::default(),
    )?;
    let theta = expand(&out.x);
    let state = frame.state(&theta)?;
    let grad_norm = sup_norm(&delete_entry(&state.score, r));
    Ok(FitResult {
        se: standard_errors(&state.expected),
        theta_hat: theta,
        loglik_hat: state.loglik,
        state,
        converged: out.converged,
        iterations: out.iterations,
        grad_norm,
        restricted_to: Some((r, hyp.null_value)),
    })
}

pub fn fit_full(model: &ModelSpec, data: &Dataset, init: Option<&DVector<f64>>) -> Result<FitResult> {
    fit_frame(&ModelFrame::new(model, data)?, init)
}

pub fn fit_restricted(
    model: &ModelSpec,
    data: &Dataset,
    hyp: &HypothesisSpec,
    init: Option<&DVector<f64>>,
) -> Result<FitResult> {
    fit_restricted_frame(&ModelFrame::new(model, data)?, hyp, init)
}
