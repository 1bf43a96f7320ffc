//! Browser bindings: Gumbel density curves, fitting and testing on CSV
//! text, and small single-threaded size studies. Every export returns a
//! JSON string.

use evreg::hots::{fit_pair, tests_from_fits};
use evreg::sim::{run_size, SimDesign};
use evreg::{
    datasets, Dataset, Direction, DispersionLink, GumbelParams, HypothesisSpec, ModelFrame, ModelSpec, PredictorSpec,
    Statistic, Tail,
};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest replicate count accepted by [`size_study`]; the page runs on
/// the main thread.
pub const MAX_REPS: usize = 20_000;

fn tail(family: &str) -> Result<Tail, String> {
    family.parse().map_err(|e: evreg::Error| e.to_string())
}

pub fn density_json(mu: f64, sigma: f64, family: &str, points: usize) -> Result<String, String> {
    let p = GumbelParams::new(mu, sigma, tail(family)?).map_err(|e| e.to_string())?;
    let points = points.clamp(2, 2000);
    let lo = p.quantile(0.001).map_err(|e| e.to_string())?;
    let hi = p.quantile(0.999).map_err(|e| e.to_string())?;
    let x: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
    let density = x.iter().map(|&v| p.density(v)).collect::<evreg::Result<Vec<f64>>>().map_err(|e| e.to_string())?;
    Ok(json!({ "x": x, "density": density, "mean": p.mean(), "variance": p.variance() }).to_string())
}

#[allow(clippy::too_many_arguments)]
pub fn fit_test_json(
    csv: &str,
    response: &str,
    location: &str,
    dispersion: &str,
    family: &str,
    param: &str,
    null_value: f64,
    direction: &str,
) -> Result<String, String> {
    let err = |e: evreg::Error| e.to_string();
    let data = Dataset::from_csv_reader(csv.as_bytes(), response).map_err(err)?;
    let location: PredictorSpec = location.parse().map_err(err)?;
    let dispersion: PredictorSpec = dispersion.parse().map_err(err)?;
    let link = if dispersion.is_intercept_only() { DispersionLink::Identity } else { DispersionLink::Log };
    let spec = ModelSpec::new(tail(family)?, location, dispersion, link);
    let frame = ModelFrame::new(&spec, &data).map_err(err)?;
    let direction: Direction = direction.parse().map_err(err)?;
    let hyp = HypothesisSpec::new(spec.param_index(param).map_err(err)?, null_value, direction);
    let (full, restr) = fit_pair(&frame, &hyp, None).map_err(err)?;
    let test = tests_from_fits(&frame, &full, &restr, &hyp, &Statistic::ALL).map_err(err)?;
    Ok(json!({ "fit": full.report(&spec), "test": test }).to_string())
}

pub fn size_json(model: &str, n: usize, reps: usize, seed: u64) -> Result<String, String> {
    if reps == 0 || reps > MAX_REPS {
        return Err(format!("reps must be between 1 and {MAX_REPS}"));
    }
    let mut design = SimDesign::builtin(model, n).ok_or_else(|| format!("unknown design '{model}'"))?;
    design.reps = reps;
    design.seed = seed;
    design.validate().map_err(|e| e.to_string())?;
    let r = run_size(&design, 1).map_err(|e| e.to_string())?;
    serde_json::to_string(&r).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn niwot_csv() -> String {
    datasets::NIWOT_CSV.to_string()
}

/// Density of a maximum or minimum Gumbel distribution over its central
/// 99.8% range.
#[wasm_bindgen]
pub fn density_curve(mu: f64, sigma: f64, family: &str, points: usize) -> Result<String, JsError> {
    density_json(mu, sigma, family, points).map_err(|e| JsError::new(&e))
}

/// Fits the model to CSV text and runs every one-sided test on `param`.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn fit_and_test(
    csv: &str,
    response: &str,
    location: &str,
    dispersion: &str,
    family: &str,
    param: &str,
    null_value: f64,
    direction: &str,
) -> Result<String, JsError> {
    fit_test_json(csv, response, location, dispersion, family, param, null_value, direction)
        .map_err(|e| JsError::new(&e))
}

/// Null rejection rates of a built-in design (model1, model2, model3).
#[wasm_bindgen]
pub fn size_study(model: &str, n: usize, reps: usize, seed: u64) -> Result<String, JsError> {
    size_json(model, n, reps, seed).map_err(|e| JsError::new(&e))
}
