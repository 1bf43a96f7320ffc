//! Model definition: links, predictor formulas, and the bound model frame.

mod data;
mod formula;
mod frame;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use data::Dataset;
pub use formula::{parse_formula, PredictorSpec, Term};
pub(crate) use frame::BoundPredictor;
pub use frame::ModelFrame;

use crate::error::{Error, Result};
use crate::evd::Tail;

/// Link `g` between the location and its predictor, `g(mu) = eta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LocationLink {
    #[default]
    Identity,
}

impl LocationLink {
    pub fn link(self, mu: f64) -> f64 {
        match self {
            LocationLink::Identity => mu,
        }
    }

    pub fn inverse(self, eta: f64) -> f64 {
        match self {
            LocationLink::Identity => eta,
        }
    }

    /// `d mu / d eta`, which is `1 / g'(mu)`.
    pub fn inverse_d1(self, _eta: f64) -> f64 {
        match self {
            LocationLink::Identity => 1.0,
        }
    }

    pub fn inverse_d2(self, _eta: f64) -> f64 {
        match self {
            LocationLink::Identity => 0.0,
        }
    }
}

/// Link `h` between the dispersion and its predictor, `h(sigma) = delta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DispersionLink {
    Log,
    Identity,
}

impl DispersionLink {
    pub fn link(self, sigma: f64) -> f64 {
        match self {
            DispersionLink::Log => sigma.ln(),
            DispersionLink::Identity => sigma,
        }
    }

    pub fn inverse(self, delta: f64) -> f64 {
        match self {
            DispersionLink::Log => delta.exp(),
            DispersionLink::Identity => delta,
        }
    }

    /// `d sigma / d delta`, which is `1 / h'(sigma)`.
    pub fn inverse_d1(self, delta: f64) -> f64 {
        match self {
            DispersionLink::Log => delta.exp(),
            DispersionLink::Identity => 1.0,
        }
    }

    pub fn inverse_d2(self, delta: f64) -> f64 {
        match self {
            DispersionLink::Log => delta.exp(),
            DispersionLink::Identity => 0.0,
        }
    }
}

impl std::str::FromStr for DispersionLink {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "log" => Ok(DispersionLink::Log),
            "identity" => Ok(DispersionLink::Identity),
            other => Err(Error::Model(format!("unknown dispersion link '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationModel {
    pub predictor: PredictorSpec,
    pub link: LocationLink,
    /// Location is `-g^{-1}(eta)` instead of `g^{-1}(eta)`; set by
    /// [`to_max_form`].
    #[serde(default)]
    pub negated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionModel {
    pub predictor: PredictorSpec,
    pub link: DispersionLink,
}

/// A complete extreme value regression model. Parameters are laid out as
/// `theta = (beta, gamma)`: location terms first, in formula order, then
/// dispersion terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub tail: Tail,
    pub location: LocationModel,
    pub dispersion: DispersionModel,
}

impl ModelSpec {
    pub fn new(
        tail: Tail,
        location: PredictorSpec,
        dispersion: PredictorSpec,
        dispersion_link: DispersionLink,
    ) -> Self {
        Self {
            tail,
            location: LocationModel { predictor: location, link: LocationLink::Identity, negated: false },
            dispersion: DispersionModel { predictor: dispersion, link: dispersion_link },
        }
    }

    /// Parses both formulas.
    pub fn from_formulas(
        tail: Tail,
        location: &str,
        dispersion: &str,
        dispersion_link: DispersionLink,
    ) -> Result<Self> {
        Ok(Self::new(tail, parse_formula(location)?, parse_formula(dispersion)?, dispersion_link))
    }

    /// Number of location parameters.
    pub fn k(&self) -> usize {
        self.location.predictor.len()
    }

    /// Number of dispersion parameters.
    pub fn m(&self) -> usize {
        self.dispersion.predictor.len()
    }

    pub fn n_params(&self) -> usize {
        self.k() + self.m()
    }

    pub fn param_names(&self) -> Vec<String> {
        let name = |t: &Term| match t {
            Term::Intercept => "(Intercept)".to_string(),
            other => other.to_string(),
        };
        self.location
            .predictor
            .terms()
            .iter()
            .map(name)
            .chain(self.dispersion.predictor.terms().iter().map(|t| format!("sigma:{}", name(t))))
            .collect()
    }

    /// Resolves a parameter by name (as in [`param_names`](Self::param_names),
    /// or a bare covariate name) or by zero-based index.
    pub fn param_index(&self, key: &str) -> Result<usize> {
        let names = self.param_names();
        let key = key.trim();
        if let Some(i) = names.iter().position(|n| n == key) {
            return Ok(i);
        }
        if key == "1" || key == "intercept" {
            if let Some(i) = names.iter().position(|n| n == "(Intercept)") {
                return Ok(i);
            }
        }
        if let Some(rest) = key.strip_prefix("sigma:") {
            if rest == "1" || rest == "intercept" {
                if let Some(i) = names.iter().position(|n| n == "sigma:(Intercept)") {
                    return Ok(i);
                }
            }
        }
        if key == "sigma" && self.dispersion.predictor.is_intercept_only() {
            return Ok(self.k());
        }
        if let Ok(i) = key.parse::<usize>() {
            if i < names.len() {
                return Ok(i);
            }
        }
        Err(Error::Model(format!("unknown parameter '{key}' (known: {})", names.join(", "))))
    }

    /// Identity links, linear location predictor and a single constant
    /// dispersion parameter.
    pub fn is_linear_homoskedastic(&self) -> bool {
        self.location.link == LocationLink::Identity
            && self.location.predictor.is_linear()
            && self.dispersion.link == DispersionLink::Identity
            && self.dispersion.predictor.is_intercept_only()
    }

    /// Checks that every covariate the model references exists, and that
    /// covariates raised to a parameter power are strictly positive.
    pub fn validate(&self, data: &Dataset) -> Result<()> {
        for pred in [&self.location.predictor, &self.dispersion.predictor] {
            for term in pred.terms() {
                if let Some(name) = term.covariate() {
                    let col = data.column(name)?;
                    if matches!(term, Term::Power(_)) {
                        if let Some(i) = col.iter().position(|&v| v <= 0.0) {
                            return Err(Error::Data(format!(
                                "covariate '{name}' must be positive in pow(); row {} is {}",
                                i + 1,
                                col[i]
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Rewrites a minimum model as the equivalent maximum model: the response
/// is negated and the location becomes `-g^{-1}(eta)` under an identity
/// link. The log-likelihood is unchanged at every `theta`.
pub fn to_max_form(model: &ModelSpec, data: &Dataset) -> Result<(ModelSpec, Dataset)> {
    if model.tail != Tail::Min {
        return Err(Error::Model("to_max_form expects a minimum extreme value model".into()));
    }
    let mut out = model.clone();
    out.tail = Tail::Max;
    out.location.negated = !model.location.negated;
    let y = data.response().iter().map(|v| -v).collect();
    Ok((out, data.with_response(y)?))
}

/// Values and derivative matrix (`n x p`) of a predictor at `params`.
pub fn eval_predictor(spec: &PredictorSpec, params: &[f64], data: &Dataset) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let bound = BoundPredictor::bind(spec, data)?;
    if params.len() != bound.len() {
        return Err(Error::Model(format!("predictor has {} terms, got {} parameters", bound.len(), params.len())));
    }
    let ev = bound.eval(params, data.n());
    Ok((ev.values, ev.jacobian))
}
