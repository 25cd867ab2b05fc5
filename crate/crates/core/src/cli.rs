//! Command-line front end. The `reclqr` binary is a thin wrapper around [`run`].
//!
//! Exit codes: 0 success, 1 input or runtime error, 2 a well-formed problem
//! without an optimal controller (or a failed check).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Scenario, ScenarioConfig};
use crate::counterexamples::{reproduce_example, ExampleReport};
use crate::dynamics::{drift_spectrum, simulate_with_cost, Policy};
use crate::error::{Error, Result};
use crate::graph::DirectedGraph;
use crate::json::MatrixJson;
use crate::linalg::{Matrix, Vector};
use crate::performance::{classify_weights_with, stage_cost, WellPosednessVerdict, DEFAULT_CLASSIFY_TOL};
use crate::riccati::{residual_bound, riccati_residual, solve_all, RiccatiSolutionSet, TransformedProblem};
use crate::synthesis::{synthesize_problem, SynthesisOptions};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;

/// Environment variable overriding the classification tolerance.
pub const TOL_ENV: &str = "RECLQR_TOL";

#[derive(Debug, Parser)]
#[command(name = "reclqr", version, about = "Optimal recommendation controllers for multi-topic opinion dynamics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the cost weights and print the verdict as JSON.
    Check {
        #[arg(long)]
        config: PathBuf,
        /// Grid over a broadcast weight, `key=start:stop:count`; repeat for a product grid.
        #[arg(long)]
        sweep: Vec<String>,
    },
    /// Synthesize the optimal controller; writes controller.json and report.json.
    Synthesize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate a policy; writes trajectory.csv and summary.json.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// `uncontrolled`, `zero` or `file:<controller.json>`.
        #[arg(long)]
        policy: Option<String>,
        #[arg(long, conflicts_with = "policy")]
        controller: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce the built-in counterexamples: 1, 2, 3 or all.
    Examples {
        which: String,
        /// Parameter overrides `k=v`, comma separated or repeated.
        #[arg(long, value_delimiter = ',')]
        params: Vec<String>,
        #[arg(long)]
        sweep: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Balance a graph given as an edge list and print the Laplacians as JSON.
    BalanceGraph {
        graph: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_ERROR
        }
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Check { config, sweep } => cmd_check(&config, &sweep),
        Command::Synthesize { config, out } => cmd_synthesize(&config, out.as_deref()),
        Command::Simulate { config, policy, controller, out } => {
            let policy = match (policy, controller) {
                (_, Some(path)) => format!("file:{}", path.display()),
                (Some(p), None) => p,
                (None, None) => "uncontrolled".into(),
            };
            cmd_simulate(&config, &policy, out.as_deref())
        }
        Command::Examples { which, params, sweep, out } => cmd_examples(&which, &params, &sweep, out.as_deref()),
        Command::BalanceGraph { graph, out } => cmd_balance(&graph, out.as_deref()),
    }
}

/// Classification tolerance, honouring `RECLQR_TOL`.
pub fn classification_tolerance() -> Result<f64> {
    match std::env::var(TOL_ENV) {
        Ok(raw) => match raw.trim().parse::<f64>() {
            Ok(t) if t.is_finite() && t > 0.0 => Ok(t),
            _ => Err(Error::Config(format!("{TOL_ENV} must be a positive number, got `{raw}`"))),
        },
        Err(_) => Ok(DEFAULT_CLASSIFY_TOL),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    std::fs::write(&path, contents)?;
    Ok(path)
}

/// Parses `key=start:stop:count` into evenly spaced points, endpoints included.
pub fn parse_sweep(spec: &str) -> Result<(String, Vec<f64>)> {
    let bad = || Error::Config(format!("sweep `{spec}` must look like key=start:stop:count"));
    let (key, range) = spec.split_once('=').ok_or_else(bad)?;
    let parts: Vec<&str> = range.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
    let stop: f64 = parts[1].trim().parse().map_err(|_| bad())?;
    let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
    if count == 0 || !start.is_finite() || !stop.is_finite() {
        return Err(bad());
    }
    let points = if count == 1 {
        vec![start]
    } else {
        (0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect()
    };
    Ok((key.trim().to_string(), points))
}

/// Cartesian product of all sweep specs.
pub fn sweep_grid(specs: &[String]) -> Result<Vec<BTreeMap<String, f64>>> {
    let mut grid = vec![BTreeMap::new()];
    for spec in specs {
        let (key, points) = parse_sweep(spec)?;
        let mut next = Vec::with_capacity(grid.len() * points.len());
        for base in &grid {
            for &v in &points {
                let mut p = base.clone();
                p.insert(key.clone(), v);
                next.push(p);
            }
        }
        grid = next;
    }
    Ok(grid)
}

#[derive(Serialize)]
struct CheckOutput {
    #[serde(flatten)]
    verdict: WellPosednessVerdict,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct SweepPoint<T: Serialize> {
    point: BTreeMap<String, f64>,
    exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    result: Option<T>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

fn merge_codes(codes: impl Iterator<Item = i32>) -> i32 {
    codes.fold(EXIT_OK, |acc, c| if acc == EXIT_ERROR || c == EXIT_ERROR { EXIT_ERROR } else { acc.max(c) })
}

fn check_scenario(scenario: &Scenario, tol: f64) -> Result<(i32, CheckOutput)> {
    let verdict = classify_weights_with(&scenario.mats, tol)?;
    let code = if verdict.regime.is_benign() { EXIT_OK } else { EXIT_NEGATIVE };
    Ok((code, CheckOutput { verdict, warnings: scenario.warnings.clone() }))
}

pub fn cmd_check(config: &Path, sweep: &[String]) -> Result<i32> {
    let tol = classification_tolerance()?;
    let (cfg, base) = ScenarioConfig::from_path(config)?;
    if sweep.is_empty() {
        let scenario = Scenario::build(&cfg, &base)?;
        let (code, out) = check_scenario(&scenario, tol)?;
        print!("{}", to_json(&out)?);
        return Ok(code);
    }
    let grid = sweep_grid(sweep)?;
    let points: Vec<SweepPoint<CheckOutput>> = grid
        .into_par_iter()
        .map(|point| {
            let outcome = (|| {
                let mut cfg = cfg.clone();
                for (k, &v) in &point {
                    cfg.weights.set(k, v)?;
                }
                check_scenario(&Scenario::build(&cfg, &base)?, tol)
            })();
            match outcome {
                Ok((code, out)) => SweepPoint { point, exit_code: code, result: Some(out), error: None },
                Err(e) => SweepPoint { point, exit_code: EXIT_ERROR, result: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    print!("{}", to_json(&points)?);
    Ok(merge_codes(points.iter().map(|p| p.exit_code)))
}

#[derive(Serialize)]
struct SynthesisReport<'a> {
    verdict: &'a WellPosednessVerdict,
    exists: bool,
    unique: bool,
    hurwitz: Option<bool>,
    #[serde(with = "crate::json::spectrum")]
    closed_loop_spectrum: Vec<num_complex::Complex64>,
    #[serde(with = "crate::json::spectrum")]
    open_loop_spectrum: Vec<num_complex::Complex64>,
    riccati_residual: Option<f64>,
    residual_bound: Option<f64>,
    closed_loop_consistency: Option<f64>,
    predicted_cost_from_x0: Option<f64>,
    average_cost: f64,
    dropped_constant: f64,
    #[serde(with = "crate::json::vector")]
    uncontrolled_equilibrium: Vector,
    solutions: Option<RiccatiSolutionSet>,
    solutions_error: Option<String>,
    diagnostics: Vec<String>,
}

pub fn cmd_synthesize(config: &Path, out: Option<&Path>) -> Result<i32> {
    let tol = classification_tolerance()?;
    let scenario = Scenario::load(config)?;
    let verdict = classify_weights_with(&scenario.mats, tol)?;
    let tp = TransformedProblem::from_stage_cost(&scenario.mats, &scenario.sys);
    let opts = SynthesisOptions::default();
    let controller = synthesize_problem(&tp, &scenario.mats.n_cross, verdict.regime, opts)?;
    let (solutions, solutions_error) = match solve_all(&tp, opts.enumeration_cap) {
        Ok(set) => (Some(set), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let mut diagnostics = scenario.warnings.clone();
    diagnostics.extend(controller.notes.iter().cloned());
    let report = SynthesisReport {
        verdict: &verdict,
        exists: controller.exists,
        unique: controller.unique,
        hurwitz: controller.hurwitz,
        closed_loop_spectrum: controller.spectrum.clone(),
        open_loop_spectrum: drift_spectrum(&scenario.sys)?,
        riccati_residual: controller.p_used.as_ref().map(|p| riccati_residual(&tp, p)),
        residual_bound: controller.p_used.as_ref().map(residual_bound),
        closed_loop_consistency: controller.closed_loop_consistency,
        predicted_cost_from_x0: controller.predicted_cost(&scenario.x0),
        average_cost: controller.average_cost(),
        dropped_constant: scenario.mats.dropped_constant,
        uncontrolled_equilibrium: scenario.sys.x_eq.clone(),
        solutions,
        solutions_error,
        diagnostics,
    };
    let dir = out.map(Path::to_path_buf).or_else(|| scenario.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    let cpath = write_file(&dir, "controller.json", &to_json(&controller)?)?;
    let rpath = write_file(&dir, "report.json", &to_json(&report)?)?;
    for d in &report.diagnostics {
        eprintln!("warning: {d}");
    }
    println!("regime: {}", verdict.regime);
    println!("controller: {}", cpath.display());
    println!("report: {}", rpath.display());
    Ok(if controller.k.is_some() { EXIT_OK } else { EXIT_NEGATIVE })
}

#[derive(Debug, Deserialize)]
struct FeedforwardFile {
    #[serde(with = "crate::json::vector")]
    s: Vector,
    #[serde(with = "crate::json::vector")]
    equilibrium: Vector,
    average_cost: f64,
}

/// The parts of a controller.json needed to run and score it.
#[derive(Debug, Deserialize)]
pub struct ControllerFile {
    #[serde(default, with = "crate::json::opt_matrix")]
    k: Option<Matrix>,
    #[serde(default, with = "crate::json::opt_vector")]
    b: Option<Vector>,
    #[serde(default, with = "crate::json::opt_matrix")]
    p_used: Option<Matrix>,
    #[serde(default)]
    feedforward: Option<FeedforwardFile>,
}

impl ControllerFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read controller {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// `V(x0) − V(x*)` with `V(x) = xᵀPx + 2sᵀx`.
    fn relative_value(&self, x0: &Vector) -> Option<f64> {
        let p = self.p_used.as_ref()?;
        let v = |x: &Vector| x.dot(&(p * x)) + self.feedforward.as_ref().map_or(0.0, |f| 2.0 * f.s.dot(x));
        Some(v(x0) - self.feedforward.as_ref().map_or(0.0, |f| v(&f.equilibrium)))
    }
}

#[derive(Serialize)]
struct SimulationSummary {
    policy: String,
    horizon: f64,
    dt: f64,
    samples: usize,
    #[serde(with = "crate::json::vector")]
    final_state: Vector,
    distance_to_x_eq: f64,
    total_cost: f64,
    predicted_total_cost: Option<f64>,
    dropped_constant: f64,
    diverged: bool,
    diverged_at: Option<f64>,
    warnings: Vec<String>,
}

pub fn cmd_simulate(config: &Path, policy_name: &str, out: Option<&Path>) -> Result<i32> {
    let scenario = Scenario::load(config)?;
    let nm = scenario.sys.dim();
    let mut predicted_rate_and_value = None;
    let policy: Box<dyn Policy + Sync> = match policy_name {
        "uncontrolled" => Box::new(|_: f64, x: &Vector| x.clone()),
        "zero" => Box::new(move |_: f64, _: &Vector| Vector::zeros(nm)),
        other => {
            let path = other
                .strip_prefix("file:")
                .ok_or_else(|| Error::Config(format!("unknown policy `{other}`; use uncontrolled, zero or file:<path>")))?;
            let file = ControllerFile::load(Path::new(path))?;
            let k = file.k.clone().ok_or_else(|| Error::Config("controller has no gain".into()))?;
            let b = file.b.clone().unwrap_or_else(|| Vector::zeros(k.nrows()));
            if k.shape() != (nm, nm) || b.len() != nm {
                return Err(Error::Dimension(format!(
                    "controller is {}x{} with offset length {}, scenario has dimension {nm}",
                    k.nrows(),
                    k.ncols(),
                    b.len()
                )));
            }
            if let Some(v) = file.relative_value(&scenario.x0) {
                let rate = file.feedforward.as_ref().map_or(0.0, |f| f.average_cost);
                predicted_rate_and_value = Some((rate, v));
            }
            Box::new(move |_: f64, x: &Vector| -(&k * x) + &b)
        }
    };
    let mats = &scenario.mats;
    let cost = |x: &Vector, u: &Vector| stage_cost(mats, x, u);
    let traj = simulate_with_cost(&scenario.sys, &*policy, &scenario.x0, scenario.horizon, scenario.dt, &cost)?;
    let t_end = traj.times.last().copied().unwrap_or(0.0);
    let constant = mats.dropped_constant;
    let final_state = traj.final_state().clone();
    let summary = SimulationSummary {
        policy: policy_name.to_string(),
        horizon: scenario.horizon,
        dt: scenario.dt,
        samples: traj.len(),
        distance_to_x_eq: (&final_state - &scenario.sys.x_eq).amax(),
        final_state,
        total_cost: traj.total_cost() + constant * t_end,
        predicted_total_cost: predicted_rate_and_value
            .filter(|_| !traj.diverged())
            .map(|(rate, v)| v + (rate + constant) * t_end),
        dropped_constant: constant,
        diverged: traj.diverged(),
        diverged_at: traj.diverged_at,
        warnings: scenario.warnings.clone(),
    };
    let dir = out.map(Path::to_path_buf).or_else(|| scenario.output.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let csv_path = dir.join("trajectory.csv");
    let mut csv = std::io::BufWriter::new(std::fs::File::create(&csv_path)?);
    traj.write_csv(&mut csv)?;
    csv.flush()?;
    let spath = write_file(&dir, "summary.json", &to_json(&summary)?)?;
    if summary.diverged {
        eprintln!("warning: trajectory diverged at t = {}", t_end);
    }
    println!("trajectory: {}", csv_path.display());
    println!("summary: {}", spath.display());
    Ok(EXIT_OK)
}

fn parameter_name(raw: &str) -> &str {
    match raw {
        "η" => "eta",
        "ξ" => "xi",
        "β" => "beta",
        other => other,
    }
}

fn parse_params(params: &[String]) -> Result<BTreeMap<String, f64>> {
    let mut map = BTreeMap::new();
    for p in params.iter().filter(|p| !p.trim().is_empty()) {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("parameter `{p}` must look like key=value")))?;
        let v: f64 = v.trim().parse().map_err(|_| Error::Config(format!("parameter `{p}` is not a number")))?;
        map.insert(parameter_name(k.trim()).to_string(), v);
    }
    Ok(map)
}

fn print_example(report: &ExampleReport) {
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        let detail = match (c.deviation, c.tolerance) {
            (Some(d), Some(t)) => format!(" (deviation {d:.3e}, tolerance {t:.0e})"),
            _ if !c.detail.is_empty() => format!(" ({})", c.detail),
            _ => String::new(),
        };
        println!("{status} example {} {}{detail}", report.example, c.name);
    }
    let passed = report.checks.iter().filter(|c| c.passed).count();
    let params: Vec<String> = report.parameters.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!(
        "example {} [{}]: {} ({passed}/{} checks)",
        report.example,
        params.join(", "),
        if report.passed { "PASS" } else { "FAIL" },
        report.checks.len()
    );
}

pub fn cmd_examples(which: &str, params: &[String], sweep: &[String], out: Option<&Path>) -> Result<i32> {
    let selected: Vec<u8> = match which {
        "all" => vec![1, 2, 3],
        "1" => vec![1],
        "2" => vec![2],
        "3" => vec![3],
        other => return Err(Error::OutOfRange(format!("unknown example `{other}`; expected 1, 2, 3 or all"))),
    };
    let overrides = parse_params(params)?;
    if selected.len() > 1 && (!overrides.is_empty() || !sweep.is_empty()) {
        return Err(Error::Config("parameters and sweeps need a single example".into()));
    }
    let mut runs = Vec::new();
    for &ex in &selected {
        if sweep.is_empty() {
            runs.push((ex, overrides.clone()));
        } else {
            for point in sweep_grid(sweep)? {
                let mut p = overrides.clone();
                p.extend(point.into_iter().map(|(k, v)| (parameter_name(&k).to_string(), v)));
                runs.push((ex, p));
            }
        }
    }
    let reports: Vec<ExampleReport> =
        runs.into_par_iter().map(|(ex, p)| reproduce_example(ex, &p)).collect::<Result<_>>()?;
    for r in &reports {
        print_example(r);
    }
    if let Some(dir) = out {
        let path = write_file(dir, "examples_report.json", &to_json(&reports)?)?;
        println!("report: {}", path.display());
    }
    Ok(if reports.iter().all(|r| r.passed) { EXIT_OK } else { EXIT_NEGATIVE })
}

#[derive(Serialize)]
struct BalanceOutput {
    n: usize,
    balancing_weights: Vec<f64>,
    laplacian: MatrixJson,
    balanced_laplacian: MatrixJson,
    symmetric_balanced: MatrixJson,
    column_sum_residual: f64,
    row_sum_residual: f64,
}

pub fn cmd_balance(graph: &Path, out: Option<&Path>) -> Result<i32> {
    let text = std::fs::read_to_string(graph)
        .map_err(|e| Error::Config(format!("cannot read graph {}: {e}", graph.display())))?;
    let pair = DirectedGraph::parse(&text)?.balance()?;
    let output = BalanceOutput {
        n: pair.n(),
        balancing_weights: pair.balancing_weights.as_slice().to_vec(),
        laplacian: MatrixJson::from_matrix(&pair.l),
        balanced_laplacian: MatrixJson::from_matrix(&pair.l_b),
        symmetric_balanced: MatrixJson::from_matrix(&pair.symmetric_balanced()),
        column_sum_residual: pair.l_b.row_sum().amax(),
        row_sum_residual: pair.l_b.column_sum().amax(),
    };
    let json = to_json(&output)?;
    print!("{json}");
    if let Some(dir) = out {
        write_file(dir, "balance.json", &json)?;
    }
    Ok(EXIT_OK)
}
