//! The signed likelihood ratio statistic and its small-sample adjustments.
//!
//! Every adjusted statistic has the form `R + ln|U/R| / R` and differs only
//! in the correction factor `U`:
//!
//! | statistic | `U` from |
//! |-----------|----------|
//! | `Rstar`   | exact ancillary, linear homoskedastic models ([`barndorff_u`]) |
//! | `Rtilde`  | approximate ancillary ([`fraser_u`]) |
//! | `Rbar`    | model-based covariances ([`skovgaard_u`]) |
//! | `Rhat`    | empirical covariances ([`severini_u`]) |
//! | `R0star`  | orthogonal parameterization ([`crate::ortho`]) |

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{fit_frame, fit_restricted_frame, Direction, FitResult, HypothesisSpec};
use crate::inference::DiagonalBundle;
use crate::linalg::{delete_row, delete_row_col, det, positive_det, stack_row};
use crate::model::{Dataset, ModelFrame, ModelSpec};
use crate::special::{gamma, gamma1, gamma2, EULER};

/// Below this `|R|` every adjusted statistic is reported as `R`.
pub const NEAR_ZERO: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Statistic {
    R,
    Rstar,
    R0star,
    Rbar,
    Rhat,
    Rtilde,
}

impl Statistic {
    pub const ALL: [Statistic; 6] =
        [Statistic::R, Statistic::Rstar, Statistic::R0star, Statistic::Rbar, Statistic::Rhat, Statistic::Rtilde];

    pub fn name(self) -> &'static str {
        match self {
            Statistic::R => "R",
            Statistic::Rstar => "Rstar",
            Statistic::R0star => "R0star",
            Statistic::Rbar => "Rbar",
            Statistic::Rhat => "Rhat",
            Statistic::Rtilde => "Rtilde",
        }
    }

    /// Parses `all` or a comma-separated list of names (case-insensitive).
    pub fn parse_list(text: &str) -> Result<Vec<Statistic>> {
        if text.trim().eq_ignore_ascii_case("all") {
            return Ok(Self::ALL.to_vec());
        }
        let mut out = Vec::new();
        for part in text.split(',') {
            let s: Statistic = part.parse()?;
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out.sort();
        Ok(out)
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Statistic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        Self::ALL.into_iter().find(|st| st.name().to_ascii_lowercase() == key).ok_or_else(|| {
            Error::Model(format!(
                "unknown statistic '{}' (expected one of R, Rstar, R0star, Rbar, Rhat, Rtilde)",
                s.trim()
            ))
        })
    }
}

/// Per-observation comparisons of the unrestricted and restricted fits.
#[derive(Debug, Clone)]
pub struct CrossFitDiagonals {
    /// `sigma_hat / sigma_tilde`
    pub c: DVector<f64>,
    /// `(mu_hat - mu_tilde) / sigma_tilde`
    pub d: DVector<f64>,
    /// `exp(-d)`
    pub dbreve: DVector<f64>,
    /// `Gamma(1 + c)`
    pub m: DVector<f64>,
    /// `Gamma'(1 + c)`
    pub n: DVector<f64>,
    /// `Gamma''(1 + c)`
    pub p: DVector<f64>,
}

impl CrossFitDiagonals {
    pub fn new(hat: &DiagonalBundle, tilde: &DiagonalBundle) -> Self {
        let len = hat.n();
        let mut out = Self {
            c: DVector::zeros(len),
            d: DVector::zeros(len),
            dbreve: DVector::zeros(len),
            m: DVector::zeros(len),
            n: DVector::zeros(len),
            p: DVector::zeros(len),
        };
        for t in 0..len {
            let c = hat.phi[t] / tilde.phi[t];
            let d = (hat.mu[t] - tilde.mu[t]) / tilde.phi[t];
            out.c[t] = c;
            out.d[t] = d;
            out.dbreve[t] = (-d).exp();
            if c == 1.0 {
                // exact values at the coincidence point so the covariance
                // vector vanishes identically there
                out.m[t] = 1.0;
                out.n[t] = 1.0 - EULER;
                out.p[t] = gamma2(2.0);
            } else {
                out.m[t] = gamma(1.0 + c);
                out.n[t] = gamma1(1.0 + c);
                out.p[t] = gamma2(1.0 + c);
            }
        }
        out
    }
}

/// Signed root of the likelihood ratio statistic.
pub fn signed_lr(full: &FitResult, restr: &FitResult, hyp: &HypothesisSpec) -> Result<f64> {
    let drop = full.loglik_hat - restr.loglik_hat;
    let tol = 1e-8 * full.loglik_hat.abs().max(1.0);
    if drop < -tol {
        return Err(Error::InconsistentFits { full: full.loglik_hat, restricted: restr.loglik_hat });
    }
    let diff = full.theta_hat[hyp.param] - hyp.null_value;
    let sign = if diff > 0.0 {
        1.0
    } else if diff < 0.0 {
        -1.0
    } else {
        0.0
    };
    Ok(sign * (2.0 * drop.max(0.0)).sqrt())
}

/// `R + ln|U / R| / R`.
pub fn adjust(r: f64, u: f64) -> Result<f64> {
    if !r.is_finite() || !u.is_finite() {
        return Err(Error::Domain(format!("adjust needs finite inputs, got R={r}, U={u}")));
    }
    if u == 0.0 {
        return Err(Error::UndefinedAdjustment);
    }
    if r == 0.0 {
        return Err(Error::Domain("adjust is undefined at R = 0".into()));
    }
    Ok(r + (u / r).abs().ln() / r)
}

/// Standard normal distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * statrs::function::erf::erfc_inv(2.0 * p)
}

pub fn p_value(stat: f64, direction: Direction) -> f64 {
    match direction {
        Direction::Less => normal_cdf(stat),
        Direction::Greater => normal_cdf(-stat),
    }
}

/// Determinants shared by every `U`: `|J_hat|` and `|J_tilde_psi psi|`.
fn observed_dets(full: &FitResult, restr: &FitResult, hyp: &HypothesisSpec) -> Result<(f64, f64)> {
    let jh = positive_det(&full.state.observed, "observed information at the unrestricted estimate")?;
    let jt = positive_det(
        &delete_row_col(&restr.state.observed, hyp.param),
        "nuisance block of the observed information at the restricted estimate",
    )?;
    Ok((jh, jt))
}

/// `d ell_t / d y_t` at every observation.
fn dl_dy(b: &DiagonalBundle) -> DVector<f64> {
    DVector::from_iterator(b.n(), (0..b.n()).map(|t| (-1.0 + b.zbreve[t]) / b.phi[t]))
}

/// The `(k + m) x n` matrix of `d^2 ell_t / d theta d y_t`.
pub fn sample_space_derivative(b: &DiagonalBundle) -> DMatrix<f64> {
    let dmu = b.dmu();
    let dsig = b.dsigma();
    let (n, k, m) = (b.n(), dmu.ncols(), dsig.ncols());
    let mut a = DMatrix::zeros(k + m, n);
    for t in 0..n {
        let s2 = b.phi[t] * b.phi[t];
        let wm = b.zbreve[t] / s2;
        let ws = (1.0 - b.zbreve[t] + b.z[t] * b.zbreve[t]) / s2;
        for j in 0..k {
            a[(j, t)] = dmu[(t, j)] * wm;
        }
        for j in 0..m {
            a[(k + j, t)] = dsig[(t, j)] * ws;
        }
    }
    a
}

/// Ancillary directions `-(dF/dtheta) / f`; for the Gumbel family these are
/// `d mu_t / d theta` and `z_t d sigma_t / d theta`.
pub fn ancillary_directions(b: &DiagonalBundle) -> DMatrix<f64> {
    let dmu = b.dmu();
    let mut dsig = b.dsigma();
    for (t, mut row) in dsig.row_iter_mut().enumerate() {
        row *= b.z[t];
    }
    let (n, k, m) = (b.n(), dmu.ncols(), dsig.ncols());
    let mut v = DMatrix::zeros(n, k + m);
    v.columns_mut(0, k).copy_from(&dmu);
    v.columns_mut(k, m).copy_from(&dsig);
    v
}

/// Exact-ancillary correction for linear models with a constant dispersion
/// and identity links.
pub fn barndorff_u(spec: &ModelSpec, full: &FitResult, restr: &FitResult, hyp: &HypothesisSpec) -> Result<f64> {
    if !spec.is_linear_homoskedastic() {
        return Err(Error::Unsupported(
            "the exact-ancillary statistic needs a linear location, constant dispersion and identity links".into(),
        ));
    }
    let hat = &full.state.bundle;
    let tilde = &restr.state.bundle;
    let row = dl_dy(hat) - dl_dy(tilde);
    let a_psi = delete_row(&sample_space_derivative(tilde), hyp.param);
    // configuration: columns of the design and the standardized residuals
    let (n, k) = (hat.n(), hat.x.ncols());
    let mut w = DMatrix::zeros(n, k + 1);
    w.columns_mut(0, k).copy_from(&hat.x);
    w.column_mut(k).copy_from(&hat.z);
    let top = w.transpose() * &row;
    let num = det(&stack_row(&top, &(a_psi * &w)));
    let (jh, jt) = observed_dets(full, restr, hyp)?;
    Ok(num / (jt * jh).sqrt())
}

/// Approximate-ancillary correction.
pub fn fraser_u(full: &FitResult, restr: &FitResult, hyp: &HypothesisSpec) -> Result<f64> {
    let hat = &full.state.bundle;
    let tilde = &restr.state.bundle;
    let v = ancillary_directions(hat);
    let row = dl_dy(hat) - dl_dy(tilde);
    let top = v.transpose() * &row;
    let av_tilde = delete_row(&(sample_space_derivative(tilde) * &v), hyp.param);
    let av_hat = sample_space_derivative(hat) * &v;
    let denom = det(&av_hat);
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::Conditioning { what: "A V at the unrestricted estimate".into(), determinants: vec![denom] });
    }
    let (jh, jt) = observed_dets(full, restr, hyp)?;
    Ok(det(&stack_row(&top, &av_tilde)) / denom * (jh / jt).sqrt())
}

/// Model-based covariances: `q_bar` and `Upsilon_bar` (rows indexed by the
/// score at the unrestricted estimate).
pub fn skovgaard_covariances(hat: &DiagonalBundle, tilde: &DiagonalBundle) -> (DVector<f64>, DMatrix<f64>) {
    let cf = CrossFitDiagonals::new(hat, tilde);
    let hx = hat.dmu();
    let hz = hat.dsigma();
    let tx = tilde.dmu();
    let tz = tilde.dsigma();
    let (n, k, m) = (hat.n(), hx.ncols(), hz.ncols());
    let mut q = DVector::zeros(k + m);
    let mut ups = DMatrix::zeros(k + m, k + m);
    for t in 0..n {
        let (c, d, db) = (cf.c[t], cf.d[t], cf.dbreve[t]);
        let (mm, nn, pp) = (cf.m[t], cf.n[t], cf.p[t]);
        let sh = hat.phi[t];
        let ss = sh * tilde.phi[t];
        let q_b = c * (1.0 - mm * db) / sh;
        let q_g = (c * (EULER + nn * db) - 1.0) / sh;
        let u_bb = c * mm * db / ss;
        let u_bg = c * (1.0 + db * (-mm - c * nn + mm * d)) / ss;
        let u_gb = -c * nn * db / ss;
        let u_gg = c * (EULER + db * (nn + c * pp - nn * d)) / ss;
        for i in 0..k {
            q[i] += hx[(t, i)] * q_b;
            for j in 0..k {
                ups[(i, j)] += hx[(t, i)] * tx[(t, j)] * u_bb;
            }
            for j in 0..m {
                ups[(i, k + j)] += hx[(t, i)] * tz[(t, j)] * u_bg;
            }
        }
        for i in 0..m {
            q[k + i] += hz[(t, i)] * q_g;
            for j in 0..k {
                ups[(k + i, j)] += hz[(t, i)] * tx[(t, j)] * u_gb;
            }
            for j in 0..m {
                ups[(k + i, k + j)] += hz[(t, i)] * tz[(t, j)] * u_gg;
            }
        }
    }
    (q, ups)
}

/// Covariance-based correction using expected values under the
/// unrestricted fit.
pub fn skovgaard_u(full: &FitResult, restr: &FitResult, hyp: &HypothesisSpec) -> Result<f64> {
    let (q, ups) = skovgaard_covariances(&full.state.bundle, &restr.state.bundle);
    let ih = positive_det(&full.state.expected, "expected information at the unrestricted estimate")?;
    let (jh, jt) = observed_dets(full, restr, hyp)?;
    Ok(det(&stack_row(&q, &delete_row(&ups, hyp.param))) / ih * (jh / jt).sqrt())
}

/// Empirical covariances: `q_hat` and `Upsilon_hat` (rows indexed by the
/// score at the restricted estimate).
pub fn severini_covariances(hat: &DiagonalBundle, tilde: &DiagonalBundle) -> (DVector<f64>, DMatrix<f64>) {
    let hx = hat.dmu();
    let hz = hat.dsigma();
    let tx = tilde.dmu();
    let tz = tilde.dsigma();
    let (n, k, m) = (hat.n(), hx.ncols(), hz.ncols());
    let mut q = DVector::zeros(k + m);
    let mut ups = DMatrix::zeros(k + m, k + m);
    for t in 0..n {
        let (ah, bh) = (hat.dl_dmu(t), hat.dl_dsigma(t));
        let (at, bt) = (tilde.dl_dmu(t), tilde.dl_dsigma(t));
        let diff = hat.ell[t] - tilde.ell[t];
        for i in 0..k {
            q[i] += diff * ah * hx[(t, i)];
        }
        for i in 0..m {
            q[k + i] += diff * bh * hz[(t, i)];
        }
        for i in 0..k {
            for j in 0..k {
                ups[(i, j)] += at * ah * tx[(t, i)] * hx[(t, j)];
            }
            for j in 0..m {
                ups[(i, k + j)] += at * bh * tx[(t, i)] * hz[(t, j)];
            }
        }
        for i in 0..m {
            for j in 0..k {
                ups[(k + i, j)] += bt * ah * tz[(t, i)] * hx[(t, j)];
            }
            for j in 0..m {
                ups[(k + i, k + j)] += bt * bh * tz[(t, i)] * hz[(t, j)];
            }
        }
    }
    (q, ups)
}

/// Empirical-covariance correction. The information determinant is the
/// empirical one, `sum_t s_t s_t'` of the per-observation scores at the
/// unrestricted estimate.
pub fn severini_u(full: &FitResult, restr: &FitResult, hyp: &HypothesisSpec) -> Result<f64> {
    let (q, ups) = severini_covariances(&full.state.bundle, &restr.state.bundle);
    let per = &full.state.perobs;
    let emp = per.transpose() * per;
    let ie = positive_det(&emp, "empirical information at the unrestricted estimate")?;
    let (jh, jt) = observed_dets(full, restr, hyp)?;
    Ok(det(&stack_row(&q, &delete_row(&ups, hyp.param))) / ie * (jh / jt).sqrt())
}

/// Statistics, p-values and diagnostics for one hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub hypothesis: HypothesisSpec,
    pub param_name: String,
    pub estimate: f64,
    pub loglik_full: f64,
    pub loglik_restricted: f64,
    pub converged_full: bool,
    pub converged_restricted: bool,
    /// `|R|` fell below the near-zero threshold; adjusted values equal `R`.
    pub near_zero: bool,
    pub statistics: BTreeMap<Statistic, f64>,
    pub p_values: BTreeMap<Statistic, f64>,
    /// Correction factors behind each adjusted statistic.
    pub u_values: BTreeMap<Statistic, f64>,
    /// Requested statistics that do not apply to this model.
    pub unsupported: BTreeMap<Statistic, String>,
    /// Requested statistics whose computation failed.
    pub failed: BTreeMap<Statistic, String>,
}

impl TestReport {
    pub fn get(&self, s: Statistic) -> Option<f64> {
        self.statistics.get(&s).copied()
    }

    pub fn converged(&self) -> bool {
        self.converged_full && self.converged_restricted
    }
}

/// Fits both models once and evaluates the requested statistics.
pub fn run_tests(model: &ModelSpec, data: &Dataset, hyp: &HypothesisSpec, which: &[Statistic]) -> Result<TestReport> {
    run_tests_frame(&ModelFrame::new(model, data)?, hyp, which)
}

pub fn run_tests_frame(frame: &ModelFrame, hyp: &HypothesisSpec, which: &[Statistic]) -> Result<TestReport> {
    let (full, restr) = fit_pair(frame, hyp, None)?;
    tests_from_fits(frame, &full, &restr, hyp, which)
}

/// Unrestricted and restricted fits for one hypothesis. `init` seeds the
/// restricted search; its tested coordinate is replaced by the null value.
pub fn fit_pair(
    frame: &ModelFrame,
    hyp: &HypothesisSpec,
    init: Option<&DVector<f64>>,
) -> Result<(FitResult, FitResult)> {
    hyp.check(frame.n_params())?;
    // The unrestricted fit starts from the restricted one so both estimates
    // sit on the same local branch. Nonlinear predictors can have extra
    // maxima far out (a power term with a huge exponent acts as an
    // indicator for the largest covariate value), and a default start
    // occasionally lands there.
    let restr = fit_restricted_frame(frame, hyp, init)?;
    let full = match fit_frame(frame, Some(&restr.theta_hat)) {
        Ok(f) if f.converged => f,
        first => match fit_frame(frame, None) {
            Ok(f) if f.converged || first.is_err() => f,
            _ => first?,
        },
    };
    let restr = if restr.converged {
        restr
    } else {
        // a poor start can leave the constrained search stuck
        let mut warm = full.theta_hat.clone();
        warm[hyp.param] = hyp.null_value;
        match fit_restricted_frame(frame, hyp, Some(&warm)) {
            Ok(r) if r.converged => r,
            _ => restr,
        }
    };
    Ok((full, restr))
}

/// Evaluates statistics for given fits.
pub fn tests_from_fits(
    frame: &ModelFrame,
    full: &FitResult,
    restr: &FitResult,
    hyp: &HypothesisSpec,
    which: &[Statistic],
) -> Result<TestReport> {
    let spec = frame.spec();
    let r = signed_lr(full, restr, hyp)?;
    let near_zero = r.abs() < NEAR_ZERO;
    let mut report = TestReport {
        hypothesis: *hyp,
        param_name: spec.param_names()[hyp.param].clone(),
        estimate: full.theta_hat[hyp.param],
        loglik_full: full.loglik_hat,
        loglik_restricted: restr.loglik_hat,
        converged_full: full.converged,
        converged_restricted: restr.converged,
        near_zero,
        statistics: BTreeMap::new(),
        p_values: BTreeMap::new(),
        u_values: BTreeMap::new(),
        unsupported: BTreeMap::new(),
        failed: BTreeMap::new(),
    };
    for &s in which {
        let u = match s {
            Statistic::R => {
                report.statistics.insert(s, r);
                report.p_values.insert(s, p_value(r, hyp.direction));
                continue;
            }
            Statistic::Rstar => barndorff_u(spec, full, restr, hyp),
            Statistic::R0star => crate::ortho::r0_u(frame, full, restr, hyp),
            Statistic::Rbar => skovgaard_u(full, restr, hyp),
            Statistic::Rhat => severini_u(full, restr, hyp),
            Statistic::Rtilde => fraser_u(full, restr, hyp),
        };
        let value = match u {
            Err(Error::Unsupported(msg)) => {
                report.unsupported.insert(s, msg);
                continue;
            }
            Err(e) if !near_zero => {
                report.failed.insert(s, e.to_string());
                continue;
            }
            Err(_) => r,
            Ok(u) => {
                report.u_values.insert(s, u);
                if near_zero {
                    r
                } else {
                    match adjust(r, u) {
                        Ok(v) => v,
                        Err(e) => {
                            report.failed.insert(s, e.to_string());
                            continue;
                        }
                    }
                }
            }
        };
        report.statistics.insert(s, value);
        report.p_values.insert(s, p_value(value, hyp.direction));
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evd::Tail;
    use crate::model::DispersionLink;

    #[test]
    fn adjust_closed_forms() {
        assert!((adjust(1.0, std::f64::consts::E).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(adjust(2.0, 2.0).unwrap(), 2.0);
        assert_eq!(adjust(1.0, 0.0), Err(Error::UndefinedAdjustment));
        assert!(adjust(f64::NAN, 1.0).is_err());
        // absolute value inside the logarithm
        assert_eq!(adjust(-2.0, 2.0).unwrap(), -2.0);
    }

    #[test]
    fn p_values() {
        assert_eq!(p_value(0.0, Direction::Greater), 0.5);
        assert!((p_value(-2.2912, Direction::Less) - 0.0110).abs() < 5e-5);
        assert!((p_value(2.0102, Direction::Greater) - 0.0222).abs() < 5e-5);
        for x in [-3.0, -0.4, 0.0, 1.7] {
            assert!((p_value(x, Direction::Less) + p_value(x, Direction::Greater) - 1.0).abs() < 1e-15);
            assert!((normal_quantile(normal_cdf(x)) - x).abs() < 1e-10);
        }
        assert!((normal_quantile(0.95) - 1.6448536269514722).abs() < 1e-12);
    }

    #[test]
    fn statistic_names() {
        assert_eq!(Statistic::parse_list("all").unwrap().len(), 6);
        assert_eq!(Statistic::parse_list("rtilde, R").unwrap(), vec![Statistic::R, Statistic::Rtilde]);
        assert!(Statistic::parse_list("Rfoo").is_err());
        let json = serde_json::to_string(&BTreeMap::from([(Statistic::R0star, 1.0)])).unwrap();
        assert_eq!(json, r#"{"R0star":1.0}"#);
    }

    fn niwot() -> (ModelSpec, Dataset, HypothesisSpec) {
        (
            ModelSpec::from_formulas(Tail::Max, "1 + temperature", "1", DispersionLink::Identity).unwrap(),
            crate::datasets::niwot(),
            HypothesisSpec::new(1, 0.0, Direction::Less),
        )
    }

    #[test]
    fn niwot_statistics() {
        let (m, d, h) = niwot();
        let rep = run_tests(&m, &d, &h, &Statistic::ALL).unwrap();
        let get = |s| rep.get(s).unwrap();
        assert!((get(Statistic::R) + 2.291250).abs() < 1e-5);
        assert!((get(Statistic::Rtilde) + 1.904286).abs() < 1e-5);
        assert!((get(Statistic::Rstar) - get(Statistic::Rtilde)).abs() < 1e-6);
        assert!((get(Statistic::Rbar) + 1.6085).abs() < 2e-4);
        assert!((get(Statistic::Rhat) + 1.7592).abs() < 2e-4);
        assert!(rep.unsupported.is_empty() && rep.failed.is_empty());
    }

    #[test]
    fn coincident_fits() {
        let (m, d, _) = niwot();
        let frame = ModelFrame::new(&m, &d).unwrap();
        let full = fit_frame(&frame, None).unwrap();
        let hyp = HypothesisSpec::new(1, full.theta_hat[1], Direction::Greater);
        let restr = fit_restricted_frame(&frame, &hyp, Some(&full.theta_hat)).unwrap();
        let (qb, _) = skovgaard_covariances(&full.state.bundle, &restr.state.bundle);
        let (qh, _) = severini_covariances(&full.state.bundle, &restr.state.bundle);
        assert!(qb.iter().all(|&v| v == 0.0), "{qb}");
        assert!(qh.iter().all(|&v| v == 0.0), "{qh}");
        let cf = CrossFitDiagonals::new(&full.state.bundle, &restr.state.bundle);
        assert!(cf.c.iter().all(|&v| v == 1.0) && cf.d.iter().all(|&v| v == 0.0));
        let rep = tests_from_fits(&frame, &full, &restr, &hyp, &Statistic::ALL).unwrap();
        assert!(rep.near_zero);
        for s in Statistic::ALL {
            assert_eq!(rep.statistics[&s], 0.0, "{s}");
            assert_eq!(rep.p_values[&s], 0.5);
        }
    }

    #[test]
    fn exact_ancillary_needs_linear_homoskedastic_model() {
        let (_, d, h) = niwot();
        let m = ModelSpec::from_formulas(Tail::Max, "1 + temperature", "1", DispersionLink::Log).unwrap();
        let rep = run_tests(&m, &d, &h, &Statistic::ALL).unwrap();
        assert!(rep.unsupported.contains_key(&Statistic::Rstar));
        assert_eq!(rep.statistics.len(), 5);
    }

    #[test]
    fn sign_follows_estimate() {
        let (m, d, _) = niwot();
        let rep = run_tests(&m, &d, &HypothesisSpec::new(1, -1.0, Direction::Greater), &[Statistic::R]).unwrap();
        assert!(rep.estimate > -1.0 && rep.statistics[&Statistic::R] > 0.0);
        let drop = rep.loglik_full - rep.loglik_restricted;
        assert!((rep.statistics[&Statistic::R].powi(2) - 2.0 * drop).abs() < 1e-10);
    }

    /// `ln|U/R| / R` has a finite limit as the null value approaches the
    /// estimate, so the gap between each adjusted statistic and `R` settles.
    #[test]
    fn adjustment_gap_settles_near_the_estimate() {
        let (m, d, _) = niwot();
        let frame = ModelFrame::new(&m, &d).unwrap();
        let full = fit_frame(&frame, None).unwrap();
        let gaps: Vec<Vec<f64>> = [0.2, 0.05, 0.0125, 0.003]
            .iter()
            .map(|eps| {
                let hyp = HypothesisSpec::new(1, full.theta_hat[1] - eps, Direction::Greater);
                let rep = run_tests_frame(&frame, &hyp, &Statistic::ALL).unwrap();
                let r = rep.statistics[&Statistic::R];
                Statistic::ALL.iter().map(|s| rep.statistics[s] - r).collect()
            })
            .collect();
        for s in 1..Statistic::ALL.len() {
            let steps: Vec<f64> = gaps.windows(2).map(|w| (w[1][s] - w[0][s]).abs()).collect();
            assert!(steps.windows(2).all(|w| w[1] < 0.5 * w[0]), "{steps:?}");
        }
    }
}
