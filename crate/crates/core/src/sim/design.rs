use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evd::Tail;
use crate::fit::{Direction, HypothesisSpec};
use crate::hots::Statistic;
use crate::model::{parse_formula, DispersionLink, ModelSpec};

/// A covariate column drawn from a uniform distribution on `(lo, hi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateSpec {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
}

/// Everything needed to run a Monte Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimDesign {
    pub name: String,
    pub model: ModelSpec,
    pub truth: Vec<f64>,
    pub covariates: Vec<CovariateSpec>,
    /// Seed of the single covariate draw shared by all replicates.
    pub covariate_seed: u64,
    /// Draw fresh covariates in every replicate instead.
    pub redraw_covariates: bool,
    pub n: usize,
    pub reps: usize,
    pub hypothesis: HypothesisSpec,
    pub alphas: Vec<f64>,
    pub statistics: Vec<Statistic>,
    pub seed: u64,
}

fn uniform(names: &[&str], lo: f64, hi: f64) -> Vec<CovariateSpec> {
    names.iter().map(|n| CovariateSpec { name: n.to_string(), lo, hi }).collect()
}

impl SimDesign {
    /// Linear location with four covariates and constant dispersion; the
    /// first slope is tested.
    pub fn model1(n: usize) -> Self {
        Self {
            name: "model1".into(),
            model: ModelSpec::from_formulas(Tail::Max, "1 + x1 + x2 + x3 + x4", "1", DispersionLink::Identity).unwrap(),
            truth: vec![1.0, 0.0, 1.0, 6.0, -3.0, 1.0],
            covariates: uniform(&["x1", "x2", "x3", "x4"], -0.5, 0.5),
            covariate_seed: 2013,
            redraw_covariates: false,
            n,
            reps: 10_000,
            hypothesis: HypothesisSpec::new(1, 0.0, Direction::Greater),
            alphas: vec![0.10, 0.05, 0.01],
            statistics: Statistic::ALL.to_vec(),
            seed: 42,
        }
    }

    /// Linear location and log-linear dispersion; the last slope is tested.
    pub fn model2(n: usize) -> Self {
        Self {
            name: "model2".into(),
            model: ModelSpec::from_formulas(Tail::Max, "1 + x1 + x2 + x3", "1 + z1 + z2", DispersionLink::Log).unwrap(),
            truth: vec![1.0, 1.0, 6.0, 0.0, 1.0, 0.1, 0.1],
            covariates: uniform(&["x1", "x2", "x3", "z1", "z2"], -0.5, 0.5),
            hypothesis: HypothesisSpec::new(3, 0.0, Direction::Greater),
            ..Self::model1(n)
        }
    }

    /// Location with a covariate raised to an unknown power; the exponent is
    /// tested.
    pub fn model3(n: usize) -> Self {
        Self {
            name: "model3".into(),
            model: ModelSpec::from_formulas(Tail::Max, "1 + x1 + pow(x2)", "1", DispersionLink::Identity).unwrap(),
            truth: vec![1.0, 1.0, 0.0, 1.0],
            covariates: uniform(&["x1", "x2"], 0.0, 1.0),
            hypothesis: HypothesisSpec::new(2, 0.0, Direction::Greater),
            ..Self::model1(n)
        }
    }

    /// `model1`, `model2` or `model3`.
    pub fn builtin(name: &str, n: usize) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "model1" => Some(Self::model1(n)),
            "model2" => Some(Self::model2(n)),
            "model3" => Some(Self::model3(n)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Design { line: 0, message: m });
        if self.truth.len() != self.model.n_params() {
            return bad(format!(
                "truth has {} values, model has {} parameters",
                self.truth.len(),
                self.model.n_params()
            ));
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.n <= self.model.n_params() {
            return bad(format!("n = {} leaves no degrees of freedom", self.n));
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha {a} outside (0, 1)"));
        }
        for c in &self.covariates {
            if !(c.lo < c.hi) {
                return bad(format!("covariate {}: empty interval ({}, {})", c.name, c.lo, c.hi));
            }
        }
        let known: Vec<&str> = self.covariates.iter().map(|c| c.name.as_str()).collect();
        for pred in [&self.model.location.predictor, &self.model.dispersion.predictor] {
            for name in pred.covariates() {
                if !known.contains(&name) {
                    return bad(format!("covariate '{name}' has no distribution"));
                }
            }
        }
        self.hypothesis.check(self.model.n_params()).or_else(|e| bad(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
        text.parse()
    }

    /// Renders the design in the `key = value` file format.
    pub fn to_design_string(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ");
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            s.push_str(&format!("{k} = {v}\n"));
        };
        line("name", self.name.clone());
        line("family", if self.model.tail == Tail::Max { "max" } else { "min" }.into());
        line("location", self.model.location.predictor.to_string());
        line("dispersion", self.model.dispersion.predictor.to_string());
        line("dispersion_link", format!("{:?}", self.model.dispersion.link).to_ascii_lowercase());
        line("truth", join(&self.truth));
        for c in &self.covariates {
            line("covariate", format!("{} ~ uniform({}, {})", c.name, c.lo, c.hi));
        }
        line("covariate_seed", self.covariate_seed.to_string());
        line("redraw_covariates", self.redraw_covariates.to_string());
        line("n", self.n.to_string());
        line("reps", self.reps.to_string());
        line("param", self.model.param_names()[self.hypothesis.param].clone());
        line("null", self.hypothesis.null_value.to_string());
        line("direction", format!("{:?}", self.hypothesis.direction).to_ascii_lowercase());
        line("alphas", join(&self.alphas));
        line("statistics", self.statistics.iter().map(|s| s.name()).collect::<Vec<_>>().join(", "));
        line("seed", self.seed.to_string());
        s
    }
}

fn parse_covariate(v: &str) -> std::result::Result<CovariateSpec, String> {
    let (name, dist) = v.split_once('~').ok_or("expected 'name ~ uniform(lo, hi)'")?;
    let name = name.trim();
    if name.is_empty() {
        return Err("missing covariate name".into());
    }
    let dist = dist.trim();
    let inner = dist
        .strip_prefix("uniform(")
        .and_then(|r| r.strip_suffix(')'))
        .ok_or_else(|| format!("unsupported distribution '{dist}' (only uniform(lo, hi))"))?;
    let (lo, hi) = inner.split_once(',').ok_or("uniform needs two bounds")?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad bound '{}'", lo.trim()))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad bound '{}'", hi.trim()))?;
    Ok(CovariateSpec { name: name.to_string(), lo, hi })
}

impl std::str::FromStr for SimDesign {
    type Err = Error;

    /// `key = value` lines; `#` starts a comment. Keys: name, family,
    /// location, dispersion, dispersion_link, truth, covariate (repeatable,
    /// `x ~ uniform(lo, hi)`), covariate_seed, redraw_covariates, n, reps,
    /// param, null, direction, alphas, statistics, seed.
    fn from_str(text: &str) -> Result<Self> {
        let mut kv: Vec<(usize, String, String)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Design {
                line: i + 1,
                message: format!("expected 'key = value', got '{line}'"),
            })?;
            kv.push((i + 1, k.trim().to_ascii_lowercase(), v.trim().to_string()));
        }
        let err = |line: usize, m: String| Error::Design { line, message: m };
        let find = |key: &str| kv.iter().rev().find(|(_, k, _)| k == key).map(|(l, _, v)| (*l, v.as_str()));
        let required = |key: &str| find(key).ok_or_else(|| err(0, format!("missing required key '{key}'")));
        let num = |key: &str| -> Result<Option<(usize, f64)>> {
            find(key)
                .map(|(l, v)| {
                    v.parse::<f64>().map(|x| (l, x)).map_err(|_| err(l, format!("{key}: '{v}' is not a number")))
                })
                .transpose()
        };
        let int = |key: &str| -> Result<Option<u64>> {
            find(key)
                .map(|(l, v)| {
                    v.parse::<u64>().map_err(|_| err(l, format!("{key}: '{v}' is not a non-negative integer")))
                })
                .transpose()
        };
        let list = |l: usize, key: &str, v: &str| -> Result<Vec<f64>> {
            v.split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|_| err(l, format!("{key}: '{}' is not a number", x.trim()))))
                .collect()
        };

        for (l, k, _) in &kv {
            const KEYS: [&str; 17] = [
                "name",
                "family",
                "location",
                "dispersion",
                "dispersion_link",
                "truth",
                "covariate",
                "covariate_seed",
                "redraw_covariates",
                "n",
                "reps",
                "param",
                "null",
                "direction",
                "alphas",
                "statistics",
                "seed",
            ];
            if !KEYS.contains(&k.as_str()) {
                return Err(err(*l, format!("unknown key '{k}'")));
            }
        }

        let tail = match find("family") {
            Some((l, v)) => v.parse::<Tail>().map_err(|e| err(l, e.to_string()))?,
            None => Tail::Max,
        };
        let (ll, loc) = required("location")?;
        let location = parse_formula(loc).map_err(|e| err(ll, e.to_string()))?;
        let dispersion = match find("dispersion") {
            Some((l, v)) => parse_formula(v).map_err(|e| err(l, e.to_string()))?,
            None => crate::model::PredictorSpec::intercept(),
        };
        let link = match find("dispersion_link") {
            Some((l, v)) => v.parse::<DispersionLink>().map_err(|e| err(l, e.to_string()))?,
            None if dispersion.is_intercept_only() => DispersionLink::Identity,
            None => DispersionLink::Log,
        };
        let model = ModelSpec::new(tail, location, dispersion, link);

        let (tl, tv) = required("truth")?;
        let truth = list(tl, "truth", tv)?;
        let covariates = kv
            .iter()
            .filter(|(_, k, _)| k == "covariate")
            .map(|(l, _, v)| parse_covariate(v).map_err(|m| err(*l, m)))
            .collect::<Result<Vec<_>>>()?;

        let (pl, pv) = required("param")?;
        let param = model.param_index(pv).map_err(|e| err(pl, e.to_string()))?;
        let null_value = num("null")?.map(|(_, v)| v).unwrap_or(0.0);
        let direction = match find("direction") {
            Some((l, v)) => v.parse::<Direction>().map_err(|e| err(l, e.to_string()))?,
            None => Direction::Greater,
        };
        let alphas = match find("alphas") {
            Some((l, v)) => list(l, "alphas", v)?,
            None => vec![0.10, 0.05, 0.01],
        };
        let statistics = match find("statistics") {
            Some((l, v)) => Statistic::parse_list(v).map_err(|e| err(l, e.to_string()))?,
            None => Statistic::ALL.to_vec(),
        };
        let redraw = match find("redraw_covariates") {
            Some((l, v)) => {
                v.parse::<bool>().map_err(|_| err(l, format!("redraw_covariates: '{v}' is not true/false")))?
            }
            None => false,
        };
        let design = SimDesign {
            name: find("name").map(|(_, v)| v.to_string()).unwrap_or_else(|| "design".into()),
            model,
            truth,
            covariates,
            covariate_seed: int("covariate_seed")?.unwrap_or(2013),
            redraw_covariates: redraw,
            n: int("n")?.ok_or_else(|| err(0, "missing required key 'n'".into()))? as usize,
            reps: int("reps")?.unwrap_or(10_000) as usize,
            hypothesis: HypothesisSpec::new(param, null_value, direction),
            alphas,
            statistics,
            seed: int("seed")?.unwrap_or(42),
        };
        design.validate()?;
        Ok(design)
    }
}
