//! Acceptance checks. Each check prints one `PASS`/`FAIL` line to stdout
//! (written past the harness capture so it shows in plain `cargo test`
//! output) and the test asserts that every line of its criterion passed.
//!
//! Set `EVREG_FULL_GRID=1` to also print the full null rejection grid for
//! model 1 and write p-value discrepancy curves for all three models under
//! `target/acceptance-grid/`.

use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use evreg::fit::{fit_frame, fit_restricted_frame};
use evreg::hots::{severini_covariances, skovgaard_covariances, tests_from_fits};
use evreg::ortho::orthogonalize_frame;
use evreg::sim::{
    design_frame, discrepancy_csv, exact_critical_values, ks_distance_normal, pvalue_discrepancy, run_power, run_size,
    size_csv, SimDesign, SimResult,
};
use evreg::{
    datasets, fit_full, run_tests, Direction, DispersionLink, HypothesisSpec, ModelFrame, ModelSpec, Statistic, Tail,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

struct Criterion {
    id: &'static str,
    failed: Vec<String>,
}

impl Criterion {
    fn new(id: &'static str) -> Self {
        Self { id, failed: Vec::new() }
    }

    fn line(&mut self, ok: bool, text: String) {
        let tag = if ok { "PASS" } else { "FAIL" };
        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "{tag} [{}] {text}", self.id);
        if !ok {
            self.failed.push(text);
        }
    }

    fn within(&mut self, label: &str, got: f64, target: f64, tol: f64) {
        let ok = (got - target).abs() <= tol;
        self.line(ok, format!("{label}: {got:.6} (target {target} ± {tol})"));
    }

    fn at_most(&mut self, label: &str, got: f64, bound: f64) {
        self.line(got <= bound, format!("{label}: {got:.3e} (bound {bound:.1e})"));
    }

    fn faster(&mut self, label: &str, took: Duration, limit: Duration) {
        self.line(took < limit, format!("{label}: {took:?} (limit {limit:?})"));
    }

    fn finish(self) {
        assert!(self.failed.is_empty(), "criterion {} failed:\n  {}", self.id, self.failed.join("\n  "));
    }
}

fn niwot_model() -> ModelSpec {
    ModelSpec::from_formulas(Tail::Max, "1 + temperature", "1", DispersionLink::Identity).unwrap()
}

#[test]
fn niwot_fit() {
    let mut c = Criterion::new("1 niwot fit");
    let start = Instant::now();
    let fit = fit_full(&niwot_model(), &datasets::niwot(), None).unwrap();
    let took = start.elapsed();
    c.line(fit.converged, format!("optimizer converged after {} iterations", fit.iterations));
    for (i, (name, est, se)) in
        [("beta0", 34.3412, 3.0910), ("beta1", -0.4409, 0.1740), ("sigma", 3.4211, 0.8435)].into_iter().enumerate()
    {
        c.within(&format!("{name} estimate"), fit.theta_hat[i], est, 1e-3);
        c.within(&format!("{name} standard error (inverse expected information)"), fit.se[i], se, 1e-2);
    }
    c.faster("runtime", took, Duration::from_secs(1));
    c.finish();
}

#[test]
fn niwot_one_sided_tests() {
    let mut c = Criterion::new("2 niwot tests");
    let start = Instant::now();
    let hyp = HypothesisSpec::new(1, 0.0, Direction::Less);
    let rep = run_tests(&niwot_model(), &datasets::niwot(), &hyp, &Statistic::ALL).unwrap();
    let took = start.elapsed();
    let expected = [
        (Statistic::R, -2.2912, 0.0110),
        (Statistic::R0star, -1.8989, 0.0288),
        (Statistic::Rbar, -1.6085, 0.0539),
        (Statistic::Rhat, -1.7592, 0.0393),
        (Statistic::Rtilde, -1.9043, 0.0284),
        (Statistic::Rstar, -1.9043, 0.0284),
    ];
    for (s, value, p) in expected {
        match (rep.get(s), rep.p_values.get(&s)) {
            (Some(v), Some(&pv)) => {
                c.within(&format!("{s} statistic"), v, value, 2e-3);
                c.within(&format!("{s} p-value"), pv, p, 5e-4);
            }
            _ => c.line(false, format!("{s} not computed")),
        }
    }
    if let (Some(a), Some(b)) = (rep.get(Statistic::Rstar), rep.get(Statistic::Rtilde)) {
        c.at_most("|Rstar - Rtilde|", (a - b).abs(), 1e-3);
    }
    c.faster("runtime", took, Duration::from_secs(2));
    c.finish();
}

fn size_study(design: SimDesign) -> SimResult {
    let r = run_size(&design, 0).unwrap();
    let mut out = std::io::stdout().lock();
    let _ =
        writeln!(out, "info: {} n={} reps={} failures={} elapsed {:?}", r.design, r.n, r.reps, r.failures, r.elapsed);
    r
}

fn model1_n200() -> &'static SimResult {
    static CELL: OnceLock<SimResult> = OnceLock::new();
    CELL.get_or_init(|| size_study(SimDesign::model1(200)))
}

#[test]
fn model1_null_rejection_rates() {
    let mut c = Criterion::new("3 model 1 size");
    let small = size_study(SimDesign::model1(20));
    for (s, target) in [
        (Statistic::R, 8.1),
        (Statistic::Rtilde, 5.0),
        (Statistic::R0star, 5.0),
        (Statistic::Rbar, 4.0),
        (Statistic::Rhat, 3.8),
    ] {
        let tol = if s == Statistic::R { 0.9 } else { 0.8 };
        c.within(&format!("n=20 alpha=5% {s} rate (%)"), 100.0 * small.rate(s, 0.05).unwrap(), target, tol);
    }
    let large = model1_n200();
    for s in Statistic::ALL {
        c.within(&format!("n=200 alpha=5% {s} rate (%)"), 100.0 * large.rate(s, 0.05).unwrap(), 5.0, 0.8);
    }
    c.finish();
}

#[test]
fn model1_power_with_exact_critical_values() {
    let mut c = Criterion::new("4 model 1 power");
    let mut d = SimDesign::model1(20);
    d.alphas = vec![0.10];
    d.statistics = vec![Statistic::R, Statistic::Rtilde];
    let crit = exact_critical_values(&d, 100_000, 0).unwrap();
    let power = run_power(&d, &[0.0, 3.0], &crit, 0).unwrap();
    let rate = |s, eps| 100.0 * power.rate(s, eps, 0.10).unwrap();
    c.within("eps=3 R power (%)", rate(Statistic::R, 3.0), 94.6, 1.0);
    c.within("eps=3 Rtilde power (%)", rate(Statistic::Rtilde, 3.0), 94.8, 1.0);
    for s in [Statistic::R, Statistic::Rtilde] {
        c.within(&format!("eps=0 {s} power (%)"), rate(s, 0.0), 10.0, 0.8);
    }
    c.finish();
}

#[test]
fn model3_null_rejection_rates() {
    let mut c = Criterion::new("5 model 3 size");
    let r = size_study(SimDesign::model3(15));
    for (s, target, tol) in [(Statistic::R, 14.2, 1.1), (Statistic::Rbar, 8.7, 1.0), (Statistic::Rhat, 10.6, 1.0)] {
        c.within(&format!("n=15 alpha=10% {s} rate (%)"), 100.0 * r.rate(s, 0.10).unwrap(), target, tol);
    }
    c.finish();
}

/// Relative error against the larger of the entry scale and one.
fn worst_relative(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs() / scale))
}

fn fd_check(frame: &ModelFrame, theta: &[f64]) -> (f64, f64) {
    let ll = |t: &[f64]| frame.loglik(t).unwrap();
    let p = theta.len();
    let bump = |d: &[(usize, f64)]| {
        let mut t = theta.to_vec();
        for &(i, v) in d {
            t[i] += v;
        }
        ll(&t)
    };
    let step = |j: usize| 1e-3 * theta[j].abs().max(1.0);
    let fd_score = DMatrix::from_fn(p, 1, |j, _| {
        let d = |h: f64| (bump(&[(j, h)]) - bump(&[(j, -h)])) / (2.0 * h);
        (4.0 * d(step(j) / 2.0) - d(step(j))) / 3.0
    });
    let fd_hess = DMatrix::from_fn(p, p, |i, j| {
        let second = |s: f64| {
            let (a, b) = (2.0 * step(i) * s, 2.0 * step(j) * s);
            if i == j {
                (bump(&[(i, a)]) - 2.0 * bump(&[]) + bump(&[(i, -a)])) / (a * a)
            } else {
                (bump(&[(i, a), (j, b)]) - bump(&[(i, a), (j, -b)]) - bump(&[(i, -a), (j, b)])
                    + bump(&[(i, -a), (j, -b)]))
                    / (4.0 * a * b)
            }
        };
        (4.0 * second(0.5) - second(1.0)) / 3.0
    });
    let state = frame.state(&DVector::from_column_slice(theta)).unwrap();
    let score = DMatrix::from_column_slice(p, 1, state.score.as_slice());
    (worst_relative(&score, &fd_score), worst_relative(&(-&state.observed), &fd_hess))
}

fn simulated(design: &SimDesign, truth: &[f64], stream: u64) -> ModelFrame {
    let base = design_frame(design).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(design.seed);
    rng.set_stream(stream);
    let y = base.distribution_params(truth).unwrap().iter().map(|p| p.sample(&mut rng)).collect();
    base.with_response(y).unwrap()
}

#[test]
fn property_suite() {
    let mut c = Criterion::new("6 properties");

    let designs = [SimDesign::model1(20), SimDesign::model2(40), SimDesign::model3(15)];
    let (mut score_err, mut hess_err) = (0.0f64, 0.0f64);
    for d in &designs {
        for stream in 0..3 {
            let frame = simulated(d, &d.truth, stream);
            let (s, h) = fd_check(&frame, &d.truth);
            score_err = score_err.max(s);
            hess_err = hess_err.max(h);
        }
    }
    c.at_most("score vs finite differences, worst relative error", score_err, 1e-7);
    c.at_most("observed information vs finite-difference Hessian, worst relative error", hess_err, 1e-4);

    // Monte Carlo moments of the score and observed information at the truth.
    for d in [SimDesign::model2(40), SimDesign::model3(15)] {
        let base = design_frame(&d).unwrap();
        let theta = DVector::from_column_slice(&d.truth);
        let expected = base.state(&theta).unwrap().expected;
        let p = theta.len();
        let sims = 20_000u64;
        let mut mean_j = DMatrix::zeros(p, p);
        let mut sum = DVector::zeros(p);
        let mut sum_sq = DVector::zeros(p);
        for i in 0..sims {
            let st = simulated(&d, &d.truth, i).state(&theta).unwrap();
            mean_j += &st.observed;
            sum += &st.score;
            sum_sq += st.score.component_mul(&st.score);
        }
        mean_j /= sims as f64;
        let worst = (0..p)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .map(|(i, j)| (mean_j[(i, j)] - expected[(i, j)]).abs() / (expected[(i, i)] * expected[(j, j)]).sqrt())
            .fold(0.0f64, f64::max);
        c.at_most(&format!("{}: mean observed information vs expected, worst relative deviation", d.name), worst, 0.02);
        let worst_z = (0..p)
            .map(|j| {
                let m = sum[j] / sims as f64;
                let var = sum_sq[j] / sims as f64 - m * m;
                m.abs() / (var / sims as f64).sqrt()
            })
            .fold(0.0f64, f64::max);
        c.at_most(&format!("{}: mean score in Monte Carlo standard errors", d.name), worst_z, 3.0);
    }

    // Maximum/minimum duality.
    {
        let d = SimDesign::model3(15);
        let frame = simulated(&d, &d.truth, 11);
        let data = frame.data();
        let reflected_y: Vec<f64> = data.response().iter().map(|v| -v).collect();
        let spec = ModelSpec::from_formulas(Tail::Max, "1 + x1 + pow(x2)", "1", DispersionLink::Identity).unwrap();
        let mut min_spec = spec.clone();
        min_spec.tail = Tail::Min;
        min_spec.location.negated = true;
        let max_frame = ModelFrame::new(&spec, data).unwrap();
        let min_frame = ModelFrame::new(&min_spec, &data.with_response(reflected_y).unwrap()).unwrap();
        let theta = [0.7, 1.2, -0.4, 1.3];
        let (a, b) = (max_frame.loglik(&theta).unwrap(), min_frame.loglik(&theta).unwrap());
        c.at_most("min/max duality, log-likelihood difference (relative)", (a - b).abs() / a.abs().max(1.0), 1e-12);
    }

    // Parameter orthogonality at the anchor.
    {
        let d = SimDesign::model2(40);
        let frame = simulated(&d, &d.truth, 5);
        let fit = fit_frame(&frame, None).unwrap();
        let om = orthogonalize_frame(&frame, &d.hypothesis, &fit.theta_hat).unwrap();
        let rl = om.evaluate(&frame, &om.to_vartheta(&fit.theta_hat)).unwrap();
        let r = d.hypothesis.param;
        let worst = (0..rl.expected.nrows())
            .filter(|&j| j != r)
            .map(|j| rl.expected[(r, j)].abs() / (rl.expected[(r, r)] * rl.expected[(j, j)]).sqrt())
            .fold(0.0f64, f64::max);
        c.at_most("orthogonalized interest/nuisance expected information (relative)", worst, 1e-8);
    }

    // Skovgaard and Severini score covariances vanish when the fits coincide.
    {
        let frame = ModelFrame::new(&niwot_model(), &datasets::niwot()).unwrap();
        let full = fit_frame(&frame, None).unwrap();
        let hyp = HypothesisSpec::new(1, full.theta_hat[1], Direction::Greater);
        let restr = fit_restricted_frame(&frame, &hyp, Some(&full.theta_hat)).unwrap();
        let (qb, _) = skovgaard_covariances(&full.state.bundle, &restr.state.bundle);
        let (qh, _) = severini_covariances(&full.state.bundle, &restr.state.bundle);
        let worst = qb.iter().chain(qh.iter()).fold(0.0f64, |m, v| m.max(v.abs()));
        c.at_most("Skovgaard and Severini score covariances at coincident fits", worst, 0.0);
        let rep = tests_from_fits(&frame, &full, &restr, &hyp, &Statistic::ALL).unwrap();
        c.line(rep.statistics.values().all(|&v| v == 0.0), "every statistic is zero at coincident fits".into());
    }

    // Normality of adjusted statistics at n=200.
    let large = model1_n200();
    for s in Statistic::ALL.into_iter().filter(|&s| s != Statistic::R) {
        let mut v = large.values(s).unwrap().to_vec();
        v.sort_by(f64::total_cmp);
        c.at_most(&format!("n=200 {s} Kolmogorov-Smirnov distance to N(0,1)"), ks_distance_normal(&v), 0.025);
    }

    // Byte-identical output across thread counts.
    {
        let mut d = SimDesign::model2(25);
        d.reps = 400;
        let one = size_csv(&run_size(&d, 1).unwrap()).unwrap();
        let four = size_csv(&run_size(&d, 4).unwrap()).unwrap();
        c.line(one == four, format!("size study CSV identical for 1 and 4 threads ({} bytes)", one.len()));
    }

    c.finish();
}

#[test]
fn full_grid() {
    if std::env::var("EVREG_FULL_GRID").map_or(true, |v| v != "1") {
        return;
    }
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "model 1 null rejection rates (%), alpha = 10/5/1");
    for n in [15, 20, 30, 40, 100, 200] {
        let r = run_size(&SimDesign::model1(n), 0).unwrap();
        let cells: Vec<String> = Statistic::ALL
            .iter()
            .map(|&s| {
                let rates: Vec<String> =
                    r.alphas.iter().map(|&a| format!("{:.1}", 100.0 * r.rate(s, a).unwrap())).collect();
                format!("{s} {}", rates.join("/"))
            })
            .collect();
        let _ = writeln!(out, "n={n:<4} {}", cells.join("  "));
    }
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../target/acceptance-grid");
    std::fs::create_dir_all(&dir).unwrap();
    for model in ["model1", "model2", "model3"] {
        for n in [15, 20, 30] {
            let d = SimDesign::builtin(model, n).unwrap();
            let (_, curve) = pvalue_discrepancy(&d, 0).unwrap();
            let path = dir.join(format!("{model}_n{n}_discrepancy.csv"));
            std::fs::write(&path, discrepancy_csv(&curve).unwrap()).unwrap();
            let _ = writeln!(out, "wrote {}", path.display());
        }
    }
}
