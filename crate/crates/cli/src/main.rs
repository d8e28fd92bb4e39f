//! `varholder` command-line front end.
//!
//! Exit codes: 0 success, 1 a verification record failed, 2 input error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use varholder::config::{report_header, RunConfig};
use varholder::domain::distance_fields;
use varholder::elliptic::{max_principle_check, solve_dirichlet, DirichletProblem, SolveOptions};
use varholder::exponent::{check_admissible, log_holder_scan};
use varholder::extend::{epsilon_search, extend_domain, mollify};
use varholder::fd::fd_derivatives;
use varholder::norms::family_norm;
use varholder::potential::newtonian_potential;
use varholder::verify::annulus::annulus_example;
use varholder::verify::suite::{run_all, run_suite, summary_csv, SuiteConfig, SUITES};
use varholder::VerificationRecord;

#[derive(Parser)]
#[command(name = "varholder", version, about = "Variable-exponent Hölder norms and elliptic estimate checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Io {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write verification records (JSON Lines) here.
    #[arg(long)]
    records: Option<PathBuf>,
    /// Write the summary CSV here.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Write the computed field (CSV: x1,x2,x3,value) here.
    #[arg(long)]
    field: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Hölder-type norm of `fields.f`; prints a NormReport as JSON.
    Norm(Io),
    /// Admissibility and log-Hölder constant of the exponent.
    Logholder(Io),
    /// Newtonian potential of `fields.f`.
    Potential(Io),
    /// Dirichlet problem `Lu = f`, `u = φ` on the boundary.
    Solve(Io),
    /// Extension to the tubular neighbourhood of width `options.sigma`.
    Extend(Io),
    /// Extension followed by mollification.
    Mollify(Io),
    /// Run verification suites; prints the summary CSV.
    Verify {
        /// `all` or one suite name.
        #[arg(default_value = "all")]
        suite: String,
        /// Small fixtures for a fast smoke run.
        #[arg(long)]
        quick: bool,
        #[command(flatten)]
        io: Io,
    },
    /// The annulus example `(|x| - γ)^{|x|}`; prints JSON Lines records.
    ExampleAnnulus {
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        zeta: Option<f64>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        nmin: Option<u32>,
        #[arg(long)]
        nmax: Option<u32>,
        /// Lattice spacing.
        #[arg(long)]
        h: Option<f64>,
        #[command(flatten)]
        io: Io,
    },
}

enum Failure {
    Input(String),
    Verification(usize),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn load(io: &Io, command: &str) -> Result<RunConfig, Failure> {
    let cfg = match &io.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
            RunConfig::from_toml(&text).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?
        }
        None => RunConfig::default(),
    };
    cfg.validate(command)?;
    Ok(cfg)
}

fn write_file(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn pick<'a>(flag: &'a Option<PathBuf>, cfg: &'a Option<PathBuf>) -> Option<&'a PathBuf> {
    flag.as_ref().or(cfg.as_ref())
}

fn emit_field(io: &Io, cfg: &RunConfig, csv: impl FnOnce() -> String) -> Outcome {
    match pick(&io.field, &cfg.output.field) {
        Some(p) => write_file(p, &csv()),
        None => Ok(()),
    }
}

fn print_json(v: &impl serde::Serialize) -> Outcome {
    println!("{}", serde_json::to_string(v)?);
    Ok(())
}

fn jsonl(command: &str, cfg: &RunConfig, records: &[VerificationRecord]) -> String {
    let mut s = report_header(command, cfg).to_string();
    s.push('\n');
    for r in records {
        s.push_str(&r.to_json());
        s.push('\n');
    }
    s
}

fn verdict(records: &[VerificationRecord]) -> Outcome {
    let failed = records.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        Err(Failure::Verification(failed))
    } else {
        Ok(())
    }
}

fn norm(io: &Io) -> Outcome {
    let cfg = load(io, "norm")?;
    let lat = cfg.lattice()?;
    let a = cfg.exponent_field(&lat)?;
    let mut f = cfg.f(&lat)?;
    if cfg.norm.k > 0 {
        f = fd_derivatives(&f, cfg.norm.k)?;
    }
    let df = distance_fields(&lat);
    let rep = family_norm(&f, &a, cfg.norm.k, cfg.norm.family, Some(&df), cfg.pair_budget)?;
    print_json(&rep)
}

fn logholder(io: &Io) -> Outcome {
    let cfg = load(io, "logholder")?;
    let lat = cfg.lattice()?;
    let a = cfg.exponent_field(&lat)?;
    let adm = check_admissible(&a, &lat, cfg.pair_budget);
    let scan = log_holder_scan(&a, &lat, cfg.pair_budget);
    print_json(&json!({ "admissibility": adm, "scan": scan }))
}

fn potential(io: &Io) -> Outcome {
    let cfg = load(io, "potential")?;
    let lat = cfg.lattice()?;
    let f = cfg.f(&lat)?;
    let w = newtonian_potential(&f)?;
    print_json(&json!({ "nodes": lat.len(), "sup_w": w.sup(), "sup_f": f.sup() }))?;
    emit_field(io, &cfg, || w.to_csv())
}

fn solve(io: &Io) -> Outcome {
    let cfg = load(io, "solve")?;
    let lat = cfg.lattice()?;
    let op = cfg.operator(&lat)?;
    let p = DirichletProblem::new(op, cfg.f(&lat)?, cfg.phi(&lat)?)?;
    let opts = SolveOptions {
        tol: cfg.options.tol,
        allow_positive_c: cfg.options.allow_positive_c,
        ..SolveOptions::default()
    };
    let s = solve_dirichlet(&p, &opts)?;
    let mp = max_principle_check(&p, &s.u, cfg.options.tol);
    print_json(&json!({
        "nodes": lat.len(),
        "residual": s.residual,
        "method": s.method,
        "iterations": s.iterations,
        "warnings": s.warnings,
        "sup_u": s.u.sup(),
        "max_principle": mp,
    }))?;
    emit_field(io, &cfg, || s.u.to_csv())
}

fn extend(io: &Io) -> Outcome {
    let cfg = load(io, "extend")?;
    let lat = cfg.lattice()?;
    let ext = extend_domain(&cfg.f(&lat)?, &cfg.exponent_field(&lat)?, cfg.options.sigma, cfg.pair_budget)?;
    print_json(&json!({ "nodes": ext.lattice.len(), "sigma": ext.sigma, "report": ext.report }))?;
    emit_field(io, &cfg, || ext.f.to_csv())
}

fn mollify_cmd(io: &Io) -> Outcome {
    let cfg = load(io, "mollify")?;
    let lat = cfg.lattice()?;
    let ext = extend_domain(&cfg.f(&lat)?, &cfg.exponent_field(&lat)?, cfg.options.sigma, cfg.pair_budget)?;
    let (eps, search) = match cfg.options.epsilon {
        Some(e) => (e, None),
        None => {
            let s = epsilon_search(&ext, cfg.options.delta)?;
            (s.epsilon, Some(s))
        }
    };
    let m = mollify(&ext, eps)?;
    print_json(&json!({
        "epsilon": eps,
        "search": search,
        "sup_extension": ext.f.sup(),
        "sup_mollified": m.sup(),
    }))?;
    emit_field(io, &cfg, || m.to_csv())
}

fn verify(suite: &str, quick: bool, io: &Io) -> Outcome {
    let mut cfg = load(io, "verify")?;
    if quick {
        cfg.verify = SuiteConfig::quick();
    }
    let records = match suite {
        "all" => run_all(&cfg.verify)?,
        s if SUITES.contains(&s) => run_suite(s, &cfg.verify)?,
        s => return Err(Failure::Input(format!("unknown suite `{s}`; expected all or one of {}", SUITES.join(", ")))),
    };
    if let Some(p) = pick(&io.records, &cfg.output.records) {
        write_file(p, &jsonl("verify", &cfg, &records))?;
    }
    let csv = summary_csv(&records);
    if let Some(p) = pick(&io.summary, &cfg.output.summary) {
        write_file(p, &csv)?;
    }
    print!("{csv}");
    verdict(&records)
}

#[allow(clippy::too_many_arguments)]
fn example_annulus(
    gamma: Option<f64>,
    zeta: Option<f64>,
    beta: Option<f64>,
    nmin: Option<u32>,
    nmax: Option<u32>,
    h: Option<f64>,
    io: &Io,
) -> Outcome {
    let mut cfg = load(io, "example-annulus")?;
    let p = &mut cfg.annulus;
    p.gamma = gamma.unwrap_or(p.gamma);
    p.zeta = zeta.unwrap_or(p.zeta);
    p.beta = beta.unwrap_or(p.beta);
    p.n_min = nmin.unwrap_or(p.n_min);
    p.n_max = nmax.unwrap_or(p.n_max);
    p.h = h.unwrap_or(p.h);
    let rep = annulus_example(&cfg.annulus)?;
    let text = jsonl("example-annulus", &cfg, &rep.records);
    match pick(&io.records, &cfg.output.records) {
        Some(path) => write_file(path, &text)?,
        None => print!("{text}"),
    }
    if let Some(path) = pick(&io.summary, &cfg.output.summary) {
        write_file(path, &summary_csv(&rep.records))?;
    }
    verdict(&rep.records)
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Norm(io) => norm(&io),
        Command::Logholder(io) => logholder(&io),
        Command::Potential(io) => potential(&io),
        Command::Solve(io) => solve(&io),
        Command::Extend(io) => extend(&io),
        Command::Mollify(io) => mollify_cmd(&io),
        Command::Verify { suite, quick, io } => verify(&suite, quick, &io),
        Command::ExampleAnnulus {
            gamma,
            zeta,
            beta,
            nmin,
            nmax,
            h,
            io,
        } => example_annulus(gamma, zeta, beta, nmin, nmax, h, &io),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let out = run(cli);
    let _ = std::io::stdout().flush();
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Verification(n)) => {
            eprintln!("{n} verification record(s) failed");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
