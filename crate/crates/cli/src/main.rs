//! `inflation`: build, solve and analyse inflation relaxations from the
//! command line.
//!
//! Exit codes: 0 solved or feasible, 1 infeasible, 2 usage error,
//! 3 numerically unknown.

mod input;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use inflation_core::analysis::{
    certificate_as_probs, max_within_feasible, CriticalOptions, ParamFamily, ProbabilityCertificate,
    SearchMethod,
};
use inflation_core::monomial::Knowability;
use inflation_core::relaxation::{Direction, Relaxation, RelaxationOptions};
use inflation_core::sdp::{self, SdpProblem, SdpSolution, SolveOptions, Status, DEFAULT_SIZE_CAP};
use serde::Serialize;
use serde_json::json;

use input::{load_distribution, load_scenario, LoadedScenario};

#[derive(Debug)]
pub enum CliError {
    Usage(String),
}

impl From<inflation_core::Error> for CliError {
    fn from(e: inflation_core::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Parser, Debug)]
#[command(name = "inflation", version, about = "Inflation relaxations for causal compatibility")]
struct Cli {
    /// Print machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,

    /// Log solver progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build a relaxation and report its size.
    Relax {
        #[command(flatten)]
        relax: RelaxArgs,
        /// Write the moment matrix as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Solve a feasibility or optimization problem.
    Solve(SolveArgs),
    /// Solve and write the infeasibility certificate over probabilities.
    Certify(SolveArgs),
    /// Largest visibility of `v·target + (1 − v)·noise` that stays feasible.
    Critical(CriticalArgs),
    /// Write the problem in sparse SDPA format without solving.
    Export {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Output `.dat-s` path.
        #[arg(long)]
        output: PathBuf,
        /// Also write the moment matrix as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Version and build information.
    About,
}

#[derive(Args, Debug)]
struct RelaxArgs {
    /// Scenario JSON file.
    #[arg(short, long)]
    scenario: PathBuf,
    /// Generating set, e.g. `npa2`, `physical2` or `npa2+local1`.
    #[arg(short, long, default_value = "npa2")]
    columns: String,
    /// Longest column word.
    #[arg(long)]
    max_length: Option<usize>,
    /// Commuting operators (classical latent nodes).
    #[arg(long)]
    commuting: bool,
    /// Possibilistic problem over the support of the distribution.
    #[arg(long)]
    supports: bool,
}

#[derive(Args, Debug)]
struct ProblemArgs {
    #[command(flatten)]
    relax: RelaxArgs,
    /// Distribution file: nested JSON arrays indexed [out…, in…], or text.
    #[arg(short, long)]
    distribution: Option<PathBuf>,
    /// Objective, e.g. `<A0 B0> + <A0 B1> + <A1 B0> - <A1 B1>`.
    #[arg(short, long)]
    objective: Option<String>,
    #[arg(long, value_enum, default_value_t = Sense::Max)]
    direction: Sense,
    /// Fold semi-knowable moments using the distribution.
    #[arg(long)]
    lpi: bool,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Solve feasibility as maximization of the smallest eigenvalue.
    #[arg(long)]
    feas_as_optim: bool,
    /// Write the certificate as JSON when infeasible.
    #[arg(long)]
    certificate: Option<PathBuf>,
    /// Write the problem in SDPA format before solving.
    #[arg(long)]
    export: Option<PathBuf>,
    /// Largest moment matrix the embedded solver accepts.
    #[arg(long, default_value_t = DEFAULT_SIZE_CAP)]
    size_cap: usize,
    /// Interior-point tolerance.
    #[arg(long, default_value_t = 1e-8)]
    tolerance: f64,
    /// Keep certificate coefficients below 1e-10.
    #[arg(long)]
    no_clean: bool,
}

#[derive(Args, Debug)]
struct CriticalArgs {
    #[command(flatten)]
    relax: RelaxArgs,
    /// Target distribution at visibility 1.
    #[arg(short, long)]
    distribution: PathBuf,
    /// Noise at visibility 0; uniform when absent.
    #[arg(long)]
    noise: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Method::Dual)]
    method: Method,
    /// Width of the final bracket.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
    #[arg(long, default_value_t = 0.0)]
    lo: f64,
    #[arg(long, default_value_t = 1.0)]
    hi: f64,
    #[arg(long)]
    lpi: bool,
    #[arg(long, default_value_t = DEFAULT_SIZE_CAP)]
    size_cap: usize,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sense {
    Max,
    Min,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Method {
    Dual,
    Bisection,
}

fn exit_for(status: Status) -> u8 {
    match status {
        Status::Feasible | Status::Optimal => 0,
        Status::Infeasible => 1,
        Status::Unknown => 3,
    }
}

fn build(args: &RelaxArgs) -> Result<(LoadedScenario, Relaxation), CliError> {
    let loaded = load_scenario(&args.scenario)?;
    let r = Relaxation::from_spec(
        loaded.inflation.clone(),
        &args.columns,
        args.max_length,
        RelaxationOptions {
            commuting: args.commuting,
            supports_problem: args.supports,
        },
    )?;
    Ok((loaded, r))
}

fn prepare(args: &ProblemArgs) -> Result<Relaxation, CliError> {
    if args.relax.supports && args.objective.is_some() {
        return Err(CliError::Usage("objectives are not available with --supports".into()));
    }
    let (_, mut r) = build(&args.relax)?;
    if let Some(path) = &args.distribution {
        r.set_distribution(&load_distribution(path)?, args.lpi)?;
    } else if args.lpi {
        return Err(CliError::Usage("--lpi needs a distribution".into()));
    }
    if let Some(obj) = &args.objective {
        let dir = match args.direction {
            Sense::Max => Direction::Max,
            Sense::Min => Direction::Min,
        };
        r.set_objective_str(obj, dir)?;
    }
    Ok(r)
}

#[derive(Serialize)]
struct RelaxReport {
    columns: usize,
    variables: usize,
    knowable: usize,
    product_knowable: usize,
    semi_knowable: usize,
    unknowable: usize,
    free_variables: usize,
    linear_rows: usize,
    symmetry_group: u128,
    commuting: bool,
    supports_problem: bool,
}

fn relax_report(r: &Relaxation, p: &SdpProblem) -> RelaxReport {
    let count = |f: fn(&Knowability) -> bool| r.variables().iter().filter(|v| f(&v.knowability)).count();
    RelaxReport {
        columns: r.n(),
        variables: r.variables().len(),
        knowable: count(|k| matches!(k, Knowability::Knowable(_))),
        product_knowable: count(|k| matches!(k, Knowability::Product(_))),
        semi_knowable: count(|k| matches!(k, Knowability::Semi { .. })),
        unknowable: count(|k| matches!(k, Knowability::Unknowable)),
        free_variables: p.m(),
        linear_rows: p.lp_rows.len(),
        symmetry_group: r.inflation().group().order,
        commuting: r.options().commuting,
        supports_problem: r.options().supports_problem,
    }
}

fn print_report(json: bool, report: &RelaxReport) {
    if json {
        println!("{}", serde_json::to_string_pretty(report).unwrap());
        return;
    }
    println!("columns          {}", report.columns);
    println!("variables        {}", report.variables);
    println!("  knowable       {}", report.knowable);
    println!("  product        {}", report.product_knowable);
    println!("  semi-knowable  {}", report.semi_knowable);
    println!("  unknowable     {}", report.unknowable);
    println!("free variables   {}", report.free_variables);
    println!("linear rows      {}", report.linear_rows);
    println!("symmetry group   {}", report.symmetry_group);
}

fn cmd_relax(json: bool, args: &RelaxArgs, csv: Option<&Path>) -> Result<u8, CliError> {
    let (_, r) = build(args)?;
    let p = sdp::compile(&r)?;
    if let Some(path) = csv {
        r.export_csv(path)?;
    }
    print_report(json, &relax_report(&r, &p));
    Ok(0)
}

fn certificate_json(cert: &ProbabilityCertificate) -> serde_json::Value {
    let terms: Vec<_> = cert
        .named_terms()
        .into_iter()
        .map(|(term, coefficient)| json!({ "term": term, "coefficient": coefficient }))
        .collect();
    json!({
        "expression": cert.to_string(),
        "terms": terms,
        "distribution_specific": cert.lpi_flag,
    })
}

struct Solved {
    relaxation: Relaxation,
    problem: SdpProblem,
    solution: SdpSolution,
}

fn run_solve(args: &SolveArgs) -> Result<Solved, CliError> {
    let r = prepare(&args.problem)?;
    let p = sdp::compile(&r)?;
    if let Some(path) = &args.export {
        sdp::sdpa::export_sdpa(&p, path)?;
    }
    let mut opts = SolveOptions {
        feas_as_optim: args.feas_as_optim,
        size_cap: args.size_cap,
        clean: !args.no_clean,
        ..Default::default()
    };
    opts.ipm.tolerance = args.tolerance;
    let solution = sdp::solve(&p, &opts);
    Ok(Solved {
        relaxation: r,
        problem: p,
        solution,
    })
}

fn solution_json(s: &Solved, cert: Option<&ProbabilityCertificate>) -> serde_json::Value {
    let sol = &s.solution;
    json!({
        "status": sol.status.to_string(),
        "objective_value": sol.objective_value,
        "columns": s.problem.n,
        "free_variables": s.problem.m(),
        "iterations": sol.iterations,
        "solves": sol.solves,
        "certificate": cert.map(certificate_json),
        "diagnostics": sol.diagnostics,
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).unwrap();
    std::fs::write(path, text + "\n").map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn cmd_solve(json: bool, args: &SolveArgs, certify: bool) -> Result<u8, CliError> {
    let s = run_solve(args)?;
    let sol = &s.solution;
    let cert = match sol.status {
        Status::Infeasible => Some(certificate_as_probs(sol, &s.relaxation, !args.no_clean)),
        _ => None,
    };
    // A certificate that cannot be written over probabilities is reported,
    // not fatal.
    let (cert, cert_error) = match cert {
        Some(Ok(c)) => (Some(c), None),
        Some(Err(e)) => (None, Some(e.to_string())),
        None => (None, None),
    };
    if let (Some(path), Some(c)) = (&args.certificate, &cert) {
        write_json(path, &certificate_json(c))?;
    }
    if json {
        let mut v = solution_json(&s, cert.as_ref());
        if let Some(e) = &cert_error {
            v["certificate_error"] = json!(e);
        }
        println!("{}", serde_json::to_string_pretty(&v).unwrap());
    } else {
        match sol.objective_value {
            Some(v) if sol.status == Status::Optimal => println!("{} {v:.8}", sol.status),
            _ => println!("{}", sol.status),
        }
        for d in &sol.diagnostics {
            eprintln!("note: {d}");
        }
        if let Some(e) = &cert_error {
            eprintln!("note: {e}");
        }
        if certify {
            match &cert {
                Some(c) => println!("{c} >= 0"),
                None if sol.status != Status::Infeasible => {
                    eprintln!("note: no certificate, the problem is not infeasible")
                }
                None => {}
            }
        }
    }
    Ok(exit_for(sol.status))
}

fn cmd_critical(json: bool, args: &CriticalArgs) -> Result<u8, CliError> {
    let (loaded, mut r) = build(&args.relax)?;
    let target = load_distribution(&args.distribution)?;
    let noise = match &args.noise {
        Some(p) => load_distribution(p)?,
        None => loaded.uniform(),
    };
    let family = ParamFamily::mixture(&r, &target, &noise, (args.lo, args.hi))?;
    let mut opts = CriticalOptions {
        method: match args.method {
            Method::Dual => SearchMethod::Dual,
            Method::Bisection => SearchMethod::Bisection,
        },
        tolerance: args.tolerance,
        use_lpi: args.lpi,
        ..Default::default()
    };
    opts.solve.size_cap = args.size_cap;
    let res = max_within_feasible(&mut r, &family, &opts)?;
    if json {
        let probes: Vec<_> = res
            .probes
            .iter()
            .map(|p| json!({ "v": p.parameter, "status": p.status.to_string(), "objective_value": p.objective_value }))
            .collect();
        let v = json!({
            "value": res.value,
            "method": opts.method.to_string(),
            "tolerance": args.tolerance,
            "solves": res.solves,
            "all_feasible": res.all_feasible,
            "no_feasible_point": res.no_feasible_point,
            "probes": probes,
        });
        println!("{}", serde_json::to_string_pretty(&v).unwrap());
    } else {
        println!("critical value {:.6}", res.value);
        println!("solves {}", res.solves);
        if res.all_feasible {
            println!("every probe was feasible; the value is the upper bound");
        }
        if res.no_feasible_point {
            println!("no probe was feasible; the value is the lower bound");
        }
    }
    Ok(0)
}

fn cmd_export(json: bool, args: &ProblemArgs, output: &Path, csv: Option<&Path>) -> Result<u8, CliError> {
    let r = prepare(args)?;
    let p = sdp::compile(&r)?;
    sdp::sdpa::export_sdpa(&p, output)?;
    if let Some(path) = csv {
        r.export_csv(path)?;
    }
    if json {
        let v = json!({
            "output": output.display().to_string(),
            "columns": p.n,
            "free_variables": p.m(),
            "linear_rows": p.lp_rows.len(),
        });
        println!("{}", serde_json::to_string_pretty(&v).unwrap());
    } else {
        println!("wrote {} ({} columns, {} free variables)", output.display(), p.n, p.m());
    }
    Ok(0)
}

fn cmd_about(json: bool) -> u8 {
    let info = json!({
        "name": "inflation",
        "description": env!("CARGO_PKG_DESCRIPTION"),
        "version": env!("CARGO_PKG_VERSION"),
        "solver": "embedded primal-dual interior point (HKM, Mehrotra)",
        "size_cap": DEFAULT_SIZE_CAP,
        "export": "sparse SDPA (.dat-s)",
        "platform": format!("{} ({})", std::env::consts::OS, std::env::consts::ARCH),
    });
    if json {
        println!("{}", serde_json::to_string_pretty(&info).unwrap());
    } else {
        println!("inflation: {}", env!("CARGO_PKG_DESCRIPTION"));
        println!("{}", "=".repeat(72));
        println!("Version:        {}", env!("CARGO_PKG_VERSION"));
        println!("Solver:         {}", info["solver"].as_str().unwrap());
        println!("Size cap:       {DEFAULT_SIZE_CAP} columns");
        println!("Export format:  {}", info["export"].as_str().unwrap());
        println!("Platform:       {}", info["platform"].as_str().unwrap());
    }
    0
}

fn run(cli: &Cli) -> Result<u8, CliError> {
    match &cli.command {
        Command::Relax { relax, csv } => cmd_relax(cli.json, relax, csv.as_deref()),
        Command::Solve(args) => cmd_solve(cli.json, args, false),
        Command::Certify(args) => {
            if args.problem.distribution.is_none() {
                return Err(CliError::Usage("certify needs --distribution".into()));
            }
            cmd_solve(cli.json, args, true)
        }
        Command::Critical(args) => cmd_critical(cli.json, args),
        Command::Export { problem, output, csv } => cmd_export(cli.json, problem, output, csv.as_deref()),
        Command::About => Ok(cmd_about(cli.json)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(CliError::Usage(msg)) => {
            if cli.json {
                println!("{}", json!({ "error": msg }));
            }
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
