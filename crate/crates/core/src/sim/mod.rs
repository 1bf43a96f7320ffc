//! Monte Carlo studies of size, power and p-value accuracy.
//!
//! Replicate `i` draws its responses from a ChaCha8 generator seeded with
//! the design seed on stream `i`, so results do not depend on how
//! replicates are scheduled across threads.

mod design;
mod output;

use std::collections::BTreeMap;
use std::time::Duration;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use design::{CovariateSpec, SimDesign};
pub use output::{critical_values_csv, discrepancy_csv, discrepancy_svg, power_csv, size_csv};

use crate::error::{Error, Result};
use crate::fit::Direction;
use crate::hots::{normal_cdf, normal_quantile, p_value, run_tests_frame, Statistic};
use crate::model::{Dataset, ModelFrame};

/// Stream offset separating the critical-value study from the size study.
const CRITICAL_STREAM: u64 = 1 << 40;

/// Fraction of failed replicates above which a study carries a warning.
pub const FAILURE_WARNING: f64 = 0.05;

/// Per-statistic outcome of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticSummary {
    pub statistic: Statistic,
    /// Replicates in which the statistic was computed.
    pub evaluated: usize,
    /// Replicates with converged fits in which the statistic failed.
    pub failed: usize,
    pub unsupported: bool,
    /// Rejection counts, one per nominal level.
    pub rejections: Vec<usize>,
    pub rates: Vec<f64>,
    /// Sorted statistic values.
    #[serde(skip)]
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    pub design: String,
    pub n: usize,
    pub reps: usize,
    /// Replicates with both fits converged.
    pub successes: usize,
    /// Replicates whose fits failed or did not converge.
    pub failures: usize,
    pub alphas: Vec<f64>,
    pub statistics: Vec<StatisticSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl SimResult {
    pub fn summary(&self, s: Statistic) -> Option<&StatisticSummary> {
        self.statistics.iter().find(|x| x.statistic == s && !x.unsupported)
    }

    pub fn rate(&self, s: Statistic, alpha: f64) -> Option<f64> {
        let i = self.alphas.iter().position(|a| (a - alpha).abs() < 1e-12)?;
        self.summary(s).map(|x| x.rates[i])
    }

    pub fn values(&self, s: Statistic) -> Option<&[f64]> {
        self.summary(s).map(|x| x.values.as_slice())
    }
}

/// Draws every covariate column once from its uniform distribution.
fn draw_covariates<R: Rng>(design: &SimDesign, rng: &mut R) -> Vec<(String, Vec<f64>)> {
    design
        .covariates
        .iter()
        .map(|c| {
            let col = (0..design.n)
                .map(|_| loop {
                    // open interval so that powers of the covariate stay defined
                    let u: f64 = rng.random();
                    if u > 0.0 {
                        break c.lo + (c.hi - c.lo) * u;
                    }
                })
                .collect();
            (c.name.clone(), col)
        })
        .collect()
}

/// The model bound to the design's fixed covariates, with a zero response.
pub fn design_frame(design: &SimDesign) -> Result<ModelFrame> {
    design.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(design.covariate_seed);
    let cols = draw_covariates(design, &mut rng);
    ModelFrame::new(&design.model, &Dataset::new("y", vec![0.0; design.n], cols)?)
}

fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone)]
enum Outcome {
    Failed,
    Done(Vec<std::result::Result<f64, bool>>),
}

fn one_replicate(design: &SimDesign, base: &ModelFrame, truth: &DVector<f64>, stream: u64) -> Outcome {
    let mut rng = replicate_rng(design.seed, stream);
    let frame = if design.redraw_covariates {
        let cols = draw_covariates(design, &mut rng);
        match Dataset::new("y", vec![0.0; design.n], cols).and_then(|d| ModelFrame::new(&design.model, &d)) {
            Ok(f) => f,
            Err(_) => return Outcome::Failed,
        }
    } else {
        base.clone()
    };
    let params = match frame.distribution_params(truth.as_slice()) {
        Ok(p) => p,
        Err(_) => return Outcome::Failed,
    };
    let y: Vec<f64> = params.iter().map(|p| p.sample(&mut rng)).collect();
    let Ok(frame) = frame.with_response(y) else { return Outcome::Failed };
    match run_tests_frame(&frame, &design.hypothesis, &design.statistics) {
        Ok(rep) if rep.converged() => Outcome::Done(
            design
                .statistics
                .iter()
                .map(|s| match rep.statistics.get(s) {
                    Some(&v) => Ok(v),
                    None => Err(rep.unsupported.contains_key(s)),
                })
                .collect(),
        ),
        _ => Outcome::Failed,
    }
}

/// Evaluates `f(0), ..., f(n-1)` and returns results in index order.
fn run_indexed<T, F>(n: usize, threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::Io(format!("thread pool: {e}")))?;
        Ok(pool.install(|| (0..n).into_par_iter().map(&f).collect()))
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok((0..n).map(f).collect())
    }
}

struct Collected {
    successes: usize,
    failures: usize,
    values: Vec<Vec<f64>>,
    failed: Vec<usize>,
    unsupported: Vec<bool>,
}

fn collect(design: &SimDesign, truth: &[f64], reps: usize, stream0: u64, threads: usize) -> Result<Collected> {
    let base = design_frame(design)?;
    let truth = DVector::from_column_slice(truth);
    let outcomes = run_indexed(reps, threads, |i| one_replicate(design, &base, &truth, stream0 + i as u64))?;
    let k = design.statistics.len();
    let mut c = Collected {
        successes: 0,
        failures: 0,
        values: vec![Vec::new(); k],
        failed: vec![0; k],
        unsupported: vec![false; k],
    };
    for o in outcomes {
        match o {
            Outcome::Failed => c.failures += 1,
            Outcome::Done(vals) => {
                c.successes += 1;
                for (j, v) in vals.into_iter().enumerate() {
                    match v {
                        Ok(x) => c.values[j].push(x),
                        Err(true) => c.unsupported[j] = true,
                        Err(false) => c.failed[j] += 1,
                    }
                }
            }
        }
    }
    Ok(c)
}

fn failure_warning(failures: usize, reps: usize) -> Option<String> {
    let frac = failures as f64 / reps as f64;
    (frac > FAILURE_WARNING).then(|| format!("{failures} of {reps} replicates failed to fit ({:.1}%)", 100.0 * frac))
}

fn check_null_truth(design: &SimDesign) -> Result<()> {
    let h = &design.hypothesis;
    if design.truth[h.param] != h.null_value {
        return Err(Error::Design {
            line: 0,
            message: format!(
                "truth for the tested parameter is {}, not the null value {}",
                design.truth[h.param], h.null_value
            ),
        });
    }
    Ok(())
}

fn rejects(stat: f64, alpha: f64, direction: Direction) -> bool {
    p_value(stat, direction) < alpha
}

#[cfg(not(target_arch = "wasm32"))]
fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = std::time::Instant::now();
    let out = f();
    (out, start.elapsed())
}

// std has no clock on wasm32-unknown-unknown
#[cfg(target_arch = "wasm32")]
fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    (f(), Duration::ZERO)
}

/// Null rejection rates against standard normal critical values.
pub fn run_size(design: &SimDesign, threads: usize) -> Result<SimResult> {
    check_null_truth(design)?;
    let (c, elapsed) = timed(|| collect(design, &design.truth, design.reps, 0, threads));
    let c = c?;
    let statistics = design
        .statistics
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let mut values = c.values[j].clone();
            let rejections: Vec<usize> = design
                .alphas
                .iter()
                .map(|&a| values.iter().filter(|&&v| rejects(v, a, design.hypothesis.direction)).count())
                .collect();
            let evaluated = values.len();
            values.sort_by(f64::total_cmp);
            StatisticSummary {
                statistic: s,
                evaluated,
                failed: c.failed[j],
                unsupported: c.unsupported[j] && evaluated == 0,
                rates: rejections
                    .iter()
                    .map(|&r| if evaluated > 0 { r as f64 / evaluated as f64 } else { f64::NAN })
                    .collect(),
                rejections,
                values,
            }
        })
        .collect();
    Ok(SimResult {
        design: design.name.clone(),
        n: design.n,
        reps: design.reps,
        successes: c.successes,
        failures: c.failures,
        alphas: design.alphas.clone(),
        statistics,
        warning: failure_warning(c.failures, design.reps),
        elapsed,
    })
}

/// Type-1 empirical quantile (inverse of the empirical distribution
/// function) of sorted values.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "empirical quantile of no values");
    let n = sorted.len();
    let k = ((n as f64 * p).ceil() as usize).clamp(1, n);
    sorted[k - 1]
}

/// Kolmogorov-Smirnov distance between sorted values and the standard
/// normal distribution.
pub fn ks_distance_normal(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    sorted.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = normal_cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Size-correcting critical values estimated from simulated null
/// statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalValues {
    pub alphas: Vec<f64>,
    pub direction: Direction,
    pub reps: usize,
    pub failures: usize,
    pub values: BTreeMap<Statistic, Vec<f64>>,
}

impl CriticalValues {
    /// Critical values from sorted null statistics: the `1 - alpha` quantile
    /// for upper-tail tests and the `alpha` quantile for lower-tail tests.
    pub fn from_sorted(sorted: &BTreeMap<Statistic, Vec<f64>>, alphas: &[f64], direction: Direction) -> Self {
        let values = sorted
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(&s, v)| {
                let q = alphas
                    .iter()
                    .map(|&a| match direction {
                        Direction::Greater => empirical_quantile(v, 1.0 - a),
                        Direction::Less => empirical_quantile(v, a),
                    })
                    .collect();
                (s, q)
            })
            .collect();
        Self { alphas: alphas.to_vec(), direction, reps: 0, failures: 0, values }
    }

    pub fn get(&self, s: Statistic, alpha: f64) -> Option<f64> {
        let i = self.alphas.iter().position(|a| (a - alpha).abs() < 1e-12)?;
        self.values.get(&s).map(|v| v[i])
    }
}

/// Simulates `reps` null samples and returns the empirical critical values.
pub fn exact_critical_values(design: &SimDesign, reps: usize, threads: usize) -> Result<CriticalValues> {
    check_null_truth(design)?;
    let c = collect(design, &design.truth, reps, CRITICAL_STREAM, threads)?;
    let sorted: BTreeMap<Statistic, Vec<f64>> = design
        .statistics
        .iter()
        .zip(c.values)
        .map(|(&s, mut v)| {
            v.sort_by(f64::total_cmp);
            (s, v)
        })
        .collect();
    let mut cv = CriticalValues::from_sorted(&sorted, &design.alphas, design.hypothesis.direction);
    cv.reps = reps;
    cv.failures = c.failures;
    Ok(cv)
}

/// Rejection rates under alternatives that move the tested parameter
/// `epsilon` away from the null value in the direction of the alternative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub design: String,
    pub n: usize,
    pub reps: usize,
    pub alphas: Vec<f64>,
    pub epsilons: Vec<f64>,
    /// `rates[statistic][epsilon][alpha]`
    pub rates: BTreeMap<Statistic, Vec<Vec<f64>>>,
    pub failures: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
}

impl PowerResult {
    pub fn rate(&self, s: Statistic, epsilon: f64, alpha: f64) -> Option<f64> {
        let e = self.epsilons.iter().position(|x| (x - epsilon).abs() < 1e-12)?;
        let a = self.alphas.iter().position(|x| (x - alpha).abs() < 1e-12)?;
        self.rates.get(&s).map(|r| r[e][a])
    }
}

pub fn run_power(
    design: &SimDesign,
    epsilons: &[f64],
    critical: &CriticalValues,
    threads: usize,
) -> Result<PowerResult> {
    let h = design.hypothesis;
    let mut rates: BTreeMap<Statistic, Vec<Vec<f64>>> = BTreeMap::new();
    let mut failures = Vec::new();
    for &eps in epsilons {
        let mut truth = design.truth.clone();
        truth[h.param] = match h.direction {
            Direction::Greater => h.null_value + eps,
            Direction::Less => h.null_value - eps,
        };
        let c = collect(design, &truth, design.reps, 0, threads)?;
        failures.push(c.failures);
        for (j, &s) in design.statistics.iter().enumerate() {
            let Some(crit) = critical.values.get(&s) else { continue };
            let vals = &c.values[j];
            let row = critical
                .alphas
                .iter()
                .zip(crit)
                .map(|(_, &cv)| {
                    let hits = vals
                        .iter()
                        .filter(|&&v| match h.direction {
                            Direction::Greater => v > cv,
                            Direction::Less => v < cv,
                        })
                        .count();
                    if vals.is_empty() {
                        f64::NAN
                    } else {
                        hits as f64 / vals.len() as f64
                    }
                })
                .collect();
            rates.entry(s).or_default().push(row);
        }
    }
    let total: usize = failures.iter().sum();
    Ok(PowerResult {
        design: design.name.clone(),
        n: design.n,
        reps: design.reps,
        alphas: critical.alphas.clone(),
        epsilons: epsilons.to_vec(),
        rates,
        warning: failure_warning(total, design.reps * epsilons.len().max(1)),
        failures,
    })
}

/// Asymptotic p-values at which discrepancies are reported: 0.1% to 25%.
pub fn discrepancy_grid() -> Vec<f64> {
    let mut g = vec![0.001, 0.0025, 0.005, 0.0075];
    g.extend((2..=50).map(|i| i as f64 * 0.005));
    g
}

/// Relative p-value discrepancy `(empirical - asymptotic) / asymptotic`
/// on [`discrepancy_grid`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyCurve {
    pub design: String,
    pub n: usize,
    pub reps: usize,
    pub grid: Vec<f64>,
    pub curves: BTreeMap<Statistic, Vec<f64>>,
}

/// Discrepancy curve of sorted null statistics.
pub fn discrepancy_from_values(sorted: &[f64], grid: &[f64], direction: Direction) -> Vec<f64> {
    let n = sorted.len() as f64;
    grid.iter()
        .map(|&p| {
            let emp = match direction {
                Direction::Greater => {
                    let c = normal_quantile(1.0 - p);
                    sorted.len() - sorted.partition_point(|&v| v < c)
                }
                Direction::Less => {
                    let c = normal_quantile(p);
                    sorted.partition_point(|&v| v <= c)
                }
            } as f64
                / n;
            (emp - p) / p
        })
        .collect()
}

pub fn pvalue_discrepancy(design: &SimDesign, threads: usize) -> Result<(SimResult, DiscrepancyCurve)> {
    let size = run_size(design, threads)?;
    let grid = discrepancy_grid();
    let curves = size
        .statistics
        .iter()
        .filter(|s| !s.unsupported && !s.values.is_empty())
        .map(|s| (s.statistic, discrepancy_from_values(&s.values, &grid, design.hypothesis.direction)))
        .collect();
    let curve = DiscrepancyCurve { design: design.name.clone(), n: design.n, reps: design.reps, grid, curves };
    Ok((size, curve))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_matches_sort_definition() {
        let v: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        assert_eq!(empirical_quantile(&v, 0.95), 10.0);
        assert_eq!(empirical_quantile(&v, 0.9), 9.0);
        assert_eq!(empirical_quantile(&v, 0.91), 10.0);
        assert_eq!(empirical_quantile(&v, 0.0), 1.0);
        assert_eq!(empirical_quantile(&v, 0.1), 1.0);
        assert_eq!(empirical_quantile(&v, 0.11), 2.0);
    }

    #[test]
    fn normal_statistic_critical_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut v: Vec<f64> = (0..200_000).map(|_| normal_quantile(rng.random_range(1e-12..1.0))).collect();
        v.sort_by(f64::total_cmp);
        let cv = CriticalValues::from_sorted(&BTreeMap::from([(Statistic::R, v.clone())]), &[0.05], Direction::Greater);
        assert!((cv.get(Statistic::R, 0.05).unwrap() - 1.645).abs() < 0.02);
        let d = discrepancy_from_values(&v, &discrepancy_grid(), Direction::Greater);
        // 3 standard errors of a binomial proportion, relative
        for (p, x) in discrepancy_grid().iter().zip(&d) {
            assert!(x.abs() < 3.0 * ((1.0 - p) / (p * 200_000.0)).sqrt(), "p={p}: {x}");
        }
        assert!(ks_distance_normal(&v) < 0.005);
    }

    #[test]
    fn single_replicate_rate_is_binary() {
        let mut d = SimDesign::model1(20);
        d.reps = 1;
        let r = run_size(&d, 1).unwrap();
        for s in &r.statistics {
            for &rate in &s.rates {
                assert!(rate == 0.0 || rate == 1.0);
            }
        }
    }

    #[test]
    fn covariates_fixed_per_design() {
        let d = SimDesign::model3(15);
        let a = design_frame(&d).unwrap();
        let b = design_frame(&d).unwrap();
        assert_eq!(a.data(), b.data());
        assert!(a.data().column("x2").unwrap().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn size_requires_null_truth() {
        let mut d = SimDesign::model1(20);
        d.truth[1] = 0.5;
        assert!(run_size(&d, 1).is_err());
    }

    #[test]
    fn unsupported_statistic_is_marked() {
        let mut d = SimDesign::model2(40);
        d.reps = 3;
        let r = run_size(&d, 1).unwrap();
        assert!(r.statistics.iter().any(|s| s.statistic == Statistic::Rstar && s.unsupported));
        assert!(r.rate(Statistic::Rstar, 0.05).is_none());
        assert!(r.rate(Statistic::Rbar, 0.05).is_some());
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let mut d = SimDesign::model3(15);
        d.reps = 64;
        let a = run_size(&d, 1).unwrap();
        let b = run_size(&d, 4).unwrap();
        assert_eq!(size_csv(&a).unwrap(), size_csv(&b).unwrap());
        for s in Statistic::ALL {
            assert_eq!(a.values(s), b.values(s));
        }
    }
}
