use nalgebra::{DMatrix, DVector};

use super::{Dataset, ModelSpec, PredictorSpec, Term};
use crate::error::{Error, Result};
use crate::inference::{Curvature, DiagonalBundle};

#[derive(Debug, Clone)]
enum BoundTerm {
    Intercept,
    Linear(Vec<f64>),
    Power { x: Vec<f64>, ln_x: Vec<f64> },
}

/// A predictor with its covariate columns resolved against a dataset.
#[derive(Debug, Clone)]
pub(crate) struct BoundPredictor {
    terms: Vec<BoundTerm>,
}

pub(crate) struct PredictorEval {
    pub values: DVector<f64>,
    pub jacobian: DMatrix<f64>,
    /// Diagonal of the per-observation Hessian of the predictor; terms do
    /// not share parameters so off-diagonal entries vanish.
    pub curvature: DMatrix<f64>,
}

impl BoundPredictor {
    pub fn bind(spec: &PredictorSpec, data: &Dataset) -> Result<Self> {
        let terms = spec
            .terms()
            .iter()
            .map(|t| match t {
                Term::Intercept => Ok(BoundTerm::Intercept),
                Term::Linear(name) => Ok(BoundTerm::Linear(data.column(name)?.to_vec())),
                Term::Power(name) => {
                    let x = data.column(name)?.to_vec();
                    if let Some(i) = x.iter().position(|&v| v <= 0.0) {
                        return Err(Error::Data(format!(
                            "covariate '{name}' must be positive in pow(); row {} is {}",
                            i + 1,
                            x[i]
                        )));
                    }
                    let ln_x = x.iter().map(|v| v.ln()).collect();
                    Ok(BoundTerm::Power { x, ln_x })
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { terms })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn has_intercept(&self) -> bool {
        self.terms.iter().any(|t| matches!(t, BoundTerm::Intercept))
    }

    pub fn eval(&self, params: &[f64], n: usize) -> PredictorEval {
        let p = self.terms.len();
        let mut values = DVector::zeros(n);
        let mut jacobian = DMatrix::zeros(n, p);
        let mut curvature = DMatrix::zeros(n, p);
        for (j, (term, &b)) in self.terms.iter().zip(params).enumerate() {
            match term {
                BoundTerm::Intercept => {
                    for t in 0..n {
                        values[t] += b;
                        jacobian[(t, j)] = 1.0;
                    }
                }
                BoundTerm::Linear(x) => {
                    for t in 0..n {
                        values[t] += b * x[t];
                        jacobian[(t, j)] = x[t];
                    }
                }
                BoundTerm::Power { x, ln_x } => {
                    for t in 0..n {
                        let xb = x[t].powf(b);
                        values[t] += xb;
                        jacobian[(t, j)] = xb * ln_x[t];
                        curvature[(t, j)] = xb * ln_x[t] * ln_x[t];
                    }
                }
            }
        }
        PredictorEval { values, jacobian, curvature }
    }

    /// Columns that are linear in their parameter, as an `n x p` matrix, with
    /// `None` for power terms. Used for least-squares starting values.
    pub fn linear_columns(&self, n: usize) -> Vec<Option<Vec<f64>>> {
        self.terms
            .iter()
            .map(|t| match t {
                BoundTerm::Intercept => Some(vec![1.0; n]),
                BoundTerm::Linear(x) => Some(x.clone()),
                BoundTerm::Power { .. } => None,
            })
            .collect()
    }

    /// Sum of the power terms evaluated at exponent one.
    pub fn power_offset(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        for term in &self.terms {
            if let BoundTerm::Power { x, .. } = term {
                for t in 0..n {
                    out[t] += x[t];
                }
            }
        }
        out
    }
}

/// A model bound to a dataset, ready for repeated likelihood evaluation.
///
/// Internally everything is expressed in maximum form: for a minimum model
/// the response is negated and the location enters with a minus sign, so
/// the same derivative formulas serve both tails.
#[derive(Debug, Clone)]
pub struct ModelFrame {
    spec: ModelSpec,
    data: Dataset,
    y: DVector<f64>,
    location: BoundPredictor,
    dispersion: BoundPredictor,
    mu_sign: f64,
}

impl ModelFrame {
    pub fn new(spec: &ModelSpec, data: &Dataset) -> Result<Self> {
        spec.validate(data)?;
        let location = BoundPredictor::bind(&spec.location.predictor, data)?;
        let dispersion = BoundPredictor::bind(&spec.dispersion.predictor, data)?;
        let tail_sign = spec.tail.sign();
        let mu_sign = tail_sign * if spec.location.negated { -1.0 } else { 1.0 };
        let y = DVector::from_iterator(data.n(), data.response().iter().map(|v| tail_sign * v));
        Ok(Self { spec: spec.clone(), data: data.clone(), y, location, dispersion, mu_sign })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    /// Same model and covariates with a new response vector.
    pub fn with_response(&self, response: Vec<f64>) -> Result<Self> {
        let data = self.data.with_response(response)?;
        let tail_sign = self.spec.tail.sign();
        let y = DVector::from_iterator(data.n(), data.response().iter().map(|v| tail_sign * v));
        Ok(Self { y, data, ..self.clone() })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.location.len()
    }

    pub fn m(&self) -> usize {
        self.dispersion.len()
    }

    pub fn n_params(&self) -> usize {
        self.k() + self.m()
    }

    /// Response in maximum form.
    pub fn response_max_form(&self) -> &DVector<f64> {
        &self.y
    }

    pub(crate) fn location_predictor(&self) -> &BoundPredictor {
        &self.location
    }

    pub(crate) fn dispersion_predictor(&self) -> &BoundPredictor {
        &self.dispersion
    }

    /// `+1` when the max-form location is `g^{-1}(eta)`, `-1` when negated.
    pub(crate) fn mu_sign(&self) -> f64 {
        self.mu_sign
    }

    /// Location and dispersion of every observation in the model's own tail
    /// orientation.
    pub fn distribution_params(&self, theta: &[f64]) -> Result<Vec<crate::evd::GumbelParams>> {
        let b = self.evaluate(&DVector::from_column_slice(theta))?;
        let s = self.spec.tail.sign();
        b.mu.iter()
            .zip(b.phi.iter())
            .map(|(&mu, &sigma)| crate::evd::GumbelParams::new(s * mu, sigma, self.spec.tail))
            .collect()
    }

    /// Evaluates predictors, links and residual diagonals at `theta`.
    pub fn evaluate(&self, theta: &DVector<f64>) -> Result<DiagonalBundle> {
        let (k, m, n) = (self.k(), self.m(), self.n());
        if theta.len() != k + m {
            return Err(Error::Model(format!("expected {} parameters, got {}", k + m, theta.len())));
        }
        if let Some(i) = theta.iter().position(|v| !v.is_finite()) {
            return Err(Error::Evaluation(format!("parameter {i} is not finite")));
        }
        let beta = &theta.as_slice()[..k];
        let gamma = &theta.as_slice()[k..];
        let loc = self.location.eval(beta, n);
        let disp = self.dispersion.eval(gamma, n);
        let g = self.spec.location.link;
        let hl = self.spec.dispersion.link;

        let mut mu = DVector::zeros(n);
        let mut t_diag = DVector::zeros(n);
        let mut x = loc.jacobian.clone();
        let mut mu_curv = loc.curvature.clone();
        let mut mu_link2 = DVector::zeros(n);
        for t in 0..n {
            let eta = loc.values[t];
            let d1 = g.inverse_d1(eta);
            mu[t] = self.mu_sign * g.inverse(eta);
            mu_link2[t] = self.mu_sign * g.inverse_d2(eta);
            for j in 0..k {
                mu_curv[(t, j)] *= self.mu_sign * d1;
            }
            if self.mu_sign > 0.0 {
                t_diag[t] = d1;
            } else {
                // modified predictor -g^{-1}(eta) under an identity link
                t_diag[t] = 1.0;
                for j in 0..k {
                    x[(t, j)] *= -d1;
                }
            }
        }

        let mut sigma = DVector::zeros(n);
        let mut h_diag = DVector::zeros(n);
        let mut sigma_curv = disp.curvature.clone();
        let mut sigma_link2 = DVector::zeros(n);
        for t in 0..n {
            let delta = disp.values[t];
            let s = hl.inverse(delta);
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Evaluation(format!("dispersion of observation {} is {s}", t + 1)));
            }
            sigma[t] = s;
            let d1 = hl.inverse_d1(delta);
            h_diag[t] = d1;
            sigma_link2[t] = hl.inverse_d2(delta);
            for j in 0..m {
                sigma_curv[(t, j)] *= d1;
            }
        }

        let mut z = DVector::zeros(n);
        let mut zbreve = DVector::zeros(n);
        let mut ell = DVector::zeros(n);
        for t in 0..n {
            let zt = (self.y[t] - mu[t]) / sigma[t];
            let ez = (-zt).exp();
            if !ez.is_finite() || !zt.is_finite() {
                return Err(Error::Evaluation(format!("exp(-z) overflows at observation {}", t + 1)));
            }
            z[t] = zt;
            zbreve[t] = ez;
            ell[t] = -sigma[t].ln() - zt - ez;
        }

        Ok(DiagonalBundle {
            mu,
            phi: sigma,
            z,
            zbreve,
            t: t_diag,
            h: h_diag,
            ell,
            x,
            zmat: disp.jacobian.clone(),
            curvature: Curvature { eta_jac: loc.jacobian, mu_curv, mu_link2, sigma_curv, sigma_link2 },
        })
    }
}
