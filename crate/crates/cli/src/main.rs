use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evreg::hots::{fit_pair, tests_from_fits};
use evreg::sim::{
    critical_values_csv, discrepancy_csv, discrepancy_svg, exact_critical_values, power_csv, pvalue_discrepancy,
    run_power, run_size, size_csv, SimDesign, SimResult,
};
use evreg::{
    datasets, fit::fit_frame, Dataset, Direction, DispersionLink, Error, FitReport, HypothesisSpec, ModelFrame,
    ModelSpec, PredictorSpec, Statistic, Tail, TestReport,
};
use nalgebra::DVector;

#[derive(Parser)]
#[command(name = "evreg", version, about = "Extreme value regression with adjusted signed likelihood ratio tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model by maximum likelihood.
    Fit(FitArgs),
    /// One-sided tests on a single parameter.
    Test(TestArgs),
    /// Monte Carlo size, power or p-value discrepancy study.
    Simulate(SimArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// CSV file with a header row.
    #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
    data: Option<PathBuf>,
    /// Bundled dataset (niwot).
    #[arg(long)]
    dataset: Option<String>,
    /// Response column; bundled datasets have a default.
    #[arg(long)]
    response: Option<String>,
    /// Location formula, e.g. "1 + x1 + pow(x2)".
    #[arg(long, default_value = "1")]
    location: String,
    /// Dispersion formula.
    #[arg(long, default_value = "1")]
    dispersion: String,
    #[arg(long, value_enum, default_value_t = Family::Max)]
    family: Family,
    /// auto picks identity for a constant dispersion and log otherwise.
    #[arg(long, value_enum, default_value_t = LinkArg::Auto)]
    dispersion_link: LinkArg,
    /// Starting values from an earlier JSON fit report.
    #[arg(long)]
    init: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = OutFormat::Text)]
    out: OutFormat,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct TestArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Parameter name (as printed by `fit`) or index.
    #[arg(long)]
    param: String,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    null: f64,
    /// Side of the alternative hypothesis.
    #[arg(long, value_enum)]
    direction: DirectionArg,
    /// "all" or a comma-separated list (R, Rstar, R0star, Rbar, Rhat, Rtilde).
    #[arg(long, default_value = "all")]
    stats: String,
}

#[derive(Args)]
struct SimArgs {
    /// Design file, or a built-in design: model1, model2, model3.
    #[arg(long)]
    design: String,
    /// Sample size for a built-in design.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_enum, default_value_t = Mode::Size)]
    mode: Mode,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "EVREG_THREADS", default_value_t = 0)]
    threads: usize,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Shifts of the tested parameter for power mode, e.g. "0,1,2,3".
    #[arg(long, value_delimiter = ',')]
    epsilons: Vec<f64>,
    /// Null replicates behind the exact critical values in power mode.
    #[arg(long, default_value_t = 100_000)]
    critical_reps: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Max,
    Min,
}

#[derive(Clone, Copy, ValueEnum)]
enum LinkArg {
    Auto,
    Log,
    Identity,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum OutFormat {
    Json,
    Text,
}

#[derive(Clone, Copy, ValueEnum)]
enum DirectionArg {
    Greater,
    Less,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Size,
    Power,
    Discrepancy,
}

/// Process outcome: 0 ok, 1 usage, 2 data or design, 3 numerical failure.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Syntax { .. } | Error::Formula(_) | Error::Model(_) => 1,
            Error::Data(_) | Error::Domain(_) | Error::Design { .. } | Error::Io(_) => 2,
            _ => 3,
        };
        Failure { code, message: e.to_string() }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure { code: 2, message: format!("{}: {e}", path.display()) }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Test(a) => cmd_test(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(args: &ModelArgs) -> Result<(ModelFrame, Option<DVector<f64>>), Failure> {
    let data = match (&args.data, &args.dataset) {
        (Some(path), _) => {
            let response =
                args.response.as_deref().ok_or_else(|| Failure::usage("--response is required with --data"))?;
            Dataset::from_csv_path(path, response)?
        }
        (None, Some(name)) => {
            let csv = datasets::csv_by_name(name).ok_or_else(|| Failure::usage(format!("unknown dataset '{name}'")))?;
            match &args.response {
                Some(r) => Dataset::from_csv_reader(csv.as_bytes(), r)?,
                None => datasets::by_name(name).expect("bundled dataset"),
            }
        }
        (None, None) => return Err(Failure::usage("one of --data or --dataset is required")),
    };
    let location: PredictorSpec = args.location.parse()?;
    let dispersion: PredictorSpec = args.dispersion.parse()?;
    let link = match args.dispersion_link {
        LinkArg::Log => DispersionLink::Log,
        LinkArg::Identity => DispersionLink::Identity,
        LinkArg::Auto if dispersion.is_intercept_only() => DispersionLink::Identity,
        LinkArg::Auto => DispersionLink::Log,
    };
    let tail = match args.family {
        Family::Max => Tail::Max,
        Family::Min => Tail::Min,
    };
    let spec = ModelSpec::new(tail, location, dispersion, link);
    let frame = ModelFrame::new(&spec, &data)?;
    let init = match &args.init {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            let report: FitReport = serde_json::from_str(&text)
                .map_err(|e| Failure { code: 2, message: format!("{}: not a fit report: {e}", path.display()) })?;
            if report.theta.len() != frame.n_params() {
                return Err(Failure::usage(format!(
                    "{} holds {} parameters, model has {}",
                    path.display(),
                    report.theta.len(),
                    frame.n_params()
                )));
            }
            Some(DVector::from_vec(report.theta))
        }
        None => None,
    };
    Ok((frame, init))
}

fn cmd_fit(args: FitArgs) -> Result<u8, Failure> {
    let (frame, init) = load(&args.model)?;
    let fit = fit_frame(&frame, init.as_ref())?;
    let report = fit.report(frame.spec());
    match args.model.out {
        OutFormat::Json => println!("{}", serde_json::to_string_pretty(&report).expect("report serializes")),
        OutFormat::Text => print!("{}", fit_text(&frame, &report)),
    }
    if !report.converged {
        eprintln!("warning: optimizer did not converge (gradient norm {:.3e})", report.grad_norm);
        return Ok(3);
    }
    Ok(0)
}

fn fit_text(frame: &ModelFrame, r: &FitReport) -> String {
    let spec = frame.spec();
    let family = match spec.tail {
        Tail::Max => "maximum",
        Tail::Min => "minimum",
    };
    let link = match spec.dispersion.link {
        DispersionLink::Log => "log",
        DispersionLink::Identity => "identity",
    };
    let mut s = format!(
        "{family} extreme value regression, n = {}, dispersion link {link}\nlog-likelihood {:.6}, {} after {} iterations\n\n",
        frame.n(),
        r.loglik,
        if r.converged { "converged" } else { "NOT converged" },
        r.iterations
    );
    let width = r.params.iter().map(String::len).max().unwrap_or(0).max(9);
    s += &format!("{:width$}  {:>12}  {:>12}\n", "parameter", "estimate", "std.error");
    for ((name, est), se) in r.params.iter().zip(&r.theta).zip(&r.se) {
        s += &format!("{name:width$}  {est:>12.6}  {se:>12.6}\n");
    }
    s
}

fn cmd_test(args: TestArgs) -> Result<u8, Failure> {
    let which = Statistic::parse_list(&args.stats).map_err(|e| Failure::usage(e.to_string()))?;
    let (frame, init) = load(&args.model)?;
    let spec = frame.spec();
    let param = spec.param_index(&args.param)?;
    let direction = match args.direction {
        DirectionArg::Greater => Direction::Greater,
        DirectionArg::Less => Direction::Less,
    };
    let hyp = HypothesisSpec::new(param, args.null, direction);
    let (full, restr) = fit_pair(&frame, &hyp, init.as_ref())?;
    let test = tests_from_fits(&frame, &full, &restr, &hyp, &which)?;
    let fit = full.report(spec);
    match args.model.out {
        OutFormat::Json => {
            let mut v = serde_json::to_value(&fit).expect("report serializes");
            let t = serde_json::to_value(&test).expect("report serializes");
            if let (Some(obj), serde_json::Value::Object(extra)) = (v.as_object_mut(), t) {
                obj.extend(extra);
            }
            println!("{}", serde_json::to_string_pretty(&v).expect("report serializes"));
        }
        OutFormat::Text => {
            print!("{}", fit_text(&frame, &fit));
            print!("\n{}", test_text(&test, &which));
        }
    }
    if !test.converged() {
        eprintln!("warning: at least one fit did not converge");
        return Ok(3);
    }
    Ok(0)
}

fn test_text(t: &TestReport, which: &[Statistic]) -> String {
    let (h0, h1) = match t.hypothesis.direction {
        Direction::Greater => ("<=", ">"),
        Direction::Less => (">=", "<"),
    };
    let (name, v) = (&t.param_name, t.hypothesis.null_value);
    let mut s = format!("H0: {name} {h0} {v} against H1: {name} {h1} {v}\n");
    s += &format!("restricted log-likelihood {:.6}\n", t.loglik_restricted);
    if t.near_zero {
        s += "signed root is essentially zero; adjusted statistics reported as R\n";
    }
    s += &format!("\n{:9}  {:>10}  {:>10}\n", "statistic", "value", "p-value");
    for &stat in which {
        match (t.statistics.get(&stat), t.p_values.get(&stat)) {
            (Some(x), Some(p)) => s += &format!("{:9}  {x:>10.4}  {p:>10.4}\n", stat.name()),
            _ => {
                let why = t.unsupported.get(&stat).map(|m| format!("unsupported ({m})"));
                let why = why.or_else(|| t.failed.get(&stat).map(|m| format!("failed ({m})")));
                s += &format!("{:9}  {}\n", stat.name(), why.unwrap_or_default());
            }
        }
    }
    s
}

fn load_design(args: &SimArgs) -> Result<SimDesign, Failure> {
    let path = Path::new(&args.design);
    let mut design = if path.is_file() {
        if args.n.is_some() {
            return Err(Failure::usage("--n only applies to built-in designs; set n in the design file"));
        }
        SimDesign::from_path(path)?
    } else {
        let n = args
            .n
            .ok_or_else(|| Failure::usage(format!("'{}' is not a file; built-in designs need --n", args.design)))?;
        SimDesign::builtin(&args.design, n).ok_or_else(|| Failure {
            code: 2,
            message: format!("no design file '{}' and no built-in design of that name", args.design),
        })?
    };
    if let Some(r) = args.reps {
        design.reps = r;
    }
    if let Some(s) = args.seed {
        design.seed = s;
    }
    design.validate()?;
    Ok(design)
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<(), Failure> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_failure(&path, e))
}

fn to_json(value: serde_json::Value) -> String {
    serde_json::to_string_pretty(&value).expect("result serializes") + "\n"
}

fn report_size(r: &SimResult) {
    let levels: Vec<String> = r.alphas.iter().map(|a| format!("{:>7}", format!("{}%", 100.0 * a))).collect();
    println!("{} n={} reps={} failures={}", r.design, r.n, r.reps, r.failures);
    println!("{:9}{}", "", levels.join(""));
    for s in &r.statistics {
        if s.unsupported {
            println!("{:9}unsupported", s.statistic.name());
            continue;
        }
        let rates: Vec<String> = s.rates.iter().map(|v| format!("{:>7.2}", 100.0 * v)).collect();
        println!("{:9}{}", s.statistic.name(), rates.join(""));
    }
    if let Some(w) = &r.warning {
        eprintln!("warning: {w}");
    }
}

fn cmd_simulate(args: SimArgs) -> Result<u8, Failure> {
    let design = load_design(&args)?;
    if matches!(args.mode, Mode::Power) && args.epsilons.is_empty() {
        return Err(Failure::usage("power mode needs --epsilons"));
    }
    let dir = &args.out_dir;
    fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    match args.mode {
        Mode::Size => {
            let r = run_size(&design, args.threads)?;
            write(dir, "size.csv", &size_csv(&r)?)?;
            write(dir, "size.json", &to_json(serde_json::to_value(&r).expect("result serializes")))?;
            report_size(&r);
        }
        Mode::Power => {
            let crit = exact_critical_values(&design, args.critical_reps, args.threads)?;
            write(dir, "critical_values.csv", &critical_values_csv(&crit)?)?;
            let p = run_power(&design, &args.epsilons, &crit, args.threads)?;
            write(dir, "power.csv", &power_csv(&p)?)?;
            write(dir, "power.json", &to_json(serde_json::to_value(&p).expect("result serializes")))?;
            println!("{} n={} reps={} critical reps={}", p.design, p.n, p.reps, crit.reps);
            for (s, rows) in &p.rates {
                let cells: Vec<String> = rows
                    .iter()
                    .zip(&p.epsilons)
                    .map(|(r, e)| {
                        format!(
                            "eps={e}: {}",
                            r.iter().map(|v| format!("{:.2}", 100.0 * v)).collect::<Vec<_>>().join("/")
                        )
                    })
                    .collect();
                println!("{:9}{}", s.name(), cells.join("  "));
            }
            if let Some(w) = &p.warning {
                eprintln!("warning: {w}");
            }
        }
        Mode::Discrepancy => {
            let (r, curve) = pvalue_discrepancy(&design, args.threads)?;
            write(dir, "size.csv", &size_csv(&r)?)?;
            write(dir, "size.json", &to_json(serde_json::to_value(&r).expect("result serializes")))?;
            write(dir, "discrepancy.csv", &discrepancy_csv(&curve)?)?;
            write(dir, "discrepancy.svg", &discrepancy_svg(&curve))?;
            report_size(&r);
        }
    }
    Ok(0)
}
