//! Subcommands of the `normsol` binary. Each returns a process exit code:
//! 0 ok, 2 certificate fail, 3 numerical failure, 4 config error.

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::certify::{
    check_t1, check_tmin_min, check_tmin_mp, check_tne, cnc_normalized, potential_norms,
    Certificate, Theorem,
};
use crate::config::RunConfig;
use crate::constants::{mp_geometry, structural_constants, tilde_thresholds};
use crate::error::{Error, Result};
use crate::functionals::Problem;
use crate::grid::GridFunction;
use crate::limit_problem::{mu_rho, scale_soliton_on, solve_ground_state, GroundStateData};
use crate::solvers::{solve_local_min, solve_mountain_pass, stationarity_norm, SolutionReport};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CERTIFICATE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "normsol", version, about = "Normalized NLS solutions with a nonnegative potential")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TheoremArg {
    T1,
    TminMin,
    TminMp,
}

impl From<TheoremArg> for Theorem {
    fn from(t: TheoremArg) -> Self {
        match t {
            TheoremArg::T1 => Theorem::T1,
            TheoremArg::TminMin => Theorem::TminMin,
            TheoremArg::TminMp => Theorem::TminMp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolveKind {
    Min,
    Mp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepTask {
    Groundstate,
    Constants,
    Certify,
    SolveMin,
    SolveMp,
}

#[derive(Debug, Clone, clap::Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides output.directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ground state of the limit problem and its scaling data.
    Groundstate(Common),
    /// Structural and mountain-pass constants.
    Constants(Common),
    /// Evaluates the hypotheses of a theorem.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        theorem: TheoremArg,
    },
    /// Local minimizer or mountain-pass solution.
    Solve {
        #[arg(value_enum)]
        kind: SolveKind,
        #[command(flatten)]
        common: Common,
        /// Gate for the mountain-pass solver (t1 or tmin-mp).
        #[arg(long, value_enum)]
        theorem: Option<TheoremArg>,
        #[arg(long)]
        trace: bool,
    },
    /// Residuals of a solution profile.
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        solution: PathBuf,
    },
    /// Runs one task over many configs in parallel.
    Sweep {
        #[arg(long, value_enum)]
        task: SweepTask,
        #[arg(long, value_enum)]
        theorem: Option<TheoremArg>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trace: bool,
        #[arg(required = true)]
        configs: Vec<PathBuf>,
    },
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Groundstate(c) => with_config(&c, cmd_groundstate),
        Command::Constants(c) => with_config(&c, cmd_constants),
        Command::Certify { common, theorem } => {
            with_config(&common, |cfg, out| cmd_certify(cfg, theorem.into(), out))
        }
        Command::Solve {
            kind,
            common,
            theorem,
            trace,
        } => with_config(&common, |cfg, out| {
            cmd_solve(cfg, kind, theorem.map(Into::into), trace, out)
        }),
        Command::Diagnose { common, solution } => {
            with_config(&common, |cfg, out| cmd_diagnose(cfg, &solution, out))
        }
        Command::Sweep {
            task,
            theorem,
            out,
            trace,
            configs,
        } => cmd_sweep(task, theorem.map(Into::into), trace, &configs, &out),
    }
}

fn with_config(c: &Common, f: impl FnOnce(&RunConfig, &Path) -> Result<i32>) -> i32 {
    let cfg = match RunConfig::load(&c.config) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let out = c.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    finish(f(&cfg, &out))
}

fn finish(r: Result<i32>) -> i32 {
    match r {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Parameter(_) | Error::GridMismatch(_) | Error::Supercriticality { .. } => {
            EXIT_CONFIG
        }
        Error::Certificate(_) => EXIT_CERTIFICATE,
        _ => EXIT_NUMERICAL,
    }
}

fn write_report(out: &Path, command: &str, cfg: &RunConfig, body: Value) -> Result<()> {
    fs::create_dir_all(out)?;
    let report = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "result": body,
    });
    let f = fs::File::create(out.join("report.json"))?;
    serde_json::to_writer_pretty(BufWriter::new(f), &report)?;
    Ok(())
}

fn write_profile(out: &Path, u: &GridFunction) -> Result<()> {
    fs::create_dir_all(out)?;
    u.write_csv(&out.join("profile.csv"))
}

fn ground_state(cfg: &RunConfig) -> Result<GroundStateData> {
    solve_ground_state(cfg.problem.dim, cfg.problem.p, &cfg.ground_state_grid()?)
}

/// The constants record embedded in every report.
fn constants_record(cfg: &RunConfig, prob: &Problem, gs: &GroundStateData) -> Result<Value> {
    let (dim, p, rho) = (cfg.problem.dim, cfg.problem.p, cfg.problem.rho);
    let sc = structural_constants(dim, p, cfg.solver.delta, gs)?;
    let tilde = tilde_thresholds(dim, p, rho, gs)?;
    let mu = mu_rho(gs, rho)?;
    let mut rec = json!({
        "ground_state": gs.summary(),
        "structural": sc,
        "tilde": tilde,
        "mu_rho": mu,
        "lambda_rho": mu.powi(-2),
    });
    if !prob.is_free() {
        let (nv, nw) = potential_norms(prob, cfg.norms.r, cfg.norms.s)?;
        rec["norm_V_r"] = json!(nv);
        rec["norm_W_s"] = json!(nw);
        rec["geometry"] = serde_json::to_value(mp_geometry(dim, p, cfg.norms.r, nv, gs)?)?;
    }
    rec["mp_constants"] =
        serde_json::to_value(crate::certify::mp_constants(dim, p, cfg.norms.r, cfg.norms.s, gs)?)?;
    Ok(rec)
}

pub fn cmd_groundstate(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let gs = ground_state(cfg)?;
    let z = scale_soliton_on(&gs, cfg.problem.p, cfg.problem.rho, &cfg.build_grid()?)?;
    write_profile(out, &z.z)?;
    let body = json!({
        "ground_state": gs.summary(),
        "rho": z.rho,
        "mu_rho": z.mu_rho,
        "lambda_rho": z.lambda_rho,
        "m_rho": z.m_rho,
    });
    write_report(out, "groundstate", cfg, body)?;
    Ok(EXIT_OK)
}

pub fn cmd_constants(cfg: &RunConfig, out: &Path) -> Result<i32> {
    let gs = ground_state(cfg)?;
    let prob = cfg.problem()?;
    let rec = constants_record(cfg, &prob, &gs)?;
    write_report(out, "constants", cfg, rec)?;
    Ok(EXIT_OK)
}

fn certificate(
    cfg: &RunConfig,
    prob: &Problem,
    gs: &GroundStateData,
    theorem: Theorem,
) -> Result<Certificate> {
    if prob.is_free() {
        return Err(Error::Certificate("V ≡ 0: no hypotheses to certify".into()));
    }
    let (dim, p) = (cfg.problem.dim, cfg.problem.p);
    match theorem {
        Theorem::T1 => check_t1(prob, &structural_constants(dim, p, cfg.solver.delta, gs)?),
        Theorem::TminMin => {
            let (nv, _) = potential_norms(prob, cfg.norms.r, cfg.norms.s)?;
            check_tmin_min(prob, cfg.norms.r, &mp_geometry(dim, p, cfg.norms.r, nv, gs)?)
        }
        Theorem::TminMp => check_tmin_mp(
            prob,
            cfg.norms.r,
            cfg.norms.s,
            &structural_constants(dim, p, cfg.solver.delta, gs)?,
            gs,
        ),
    }
}

pub fn cmd_certify(cfg: &RunConfig, theorem: Theorem, out: &Path) -> Result<i32> {
    let gs = ground_state(cfg)?;
    let prob = cfg.problem()?;
    let cert = certificate(cfg, &prob, &gs, theorem)?;
    let body = json!({
        "certificate": cert,
        "constants": constants_record(cfg, &prob, &gs)?,
    });
    write_report(out, "certify", cfg, body)?;
    Ok(if cert.pass { EXIT_OK } else { EXIT_CERTIFICATE })
}

fn write_trace(out: &Path, rep: &SolutionReport) -> Result<()> {
    let f = fs::File::create(out.join("trace.csv"))?;
    rep.write_trace_csv(BufWriter::new(f))
}

pub fn cmd_solve(
    cfg: &RunConfig,
    kind: SolveKind,
    theorem: Option<Theorem>,
    trace: bool,
    out: &Path,
) -> Result<i32> {
    let gs = ground_state(cfg)?;
    let prob = cfg.problem()?;
    let consts = constants_record(cfg, &prob, &gs)?;
    let (rep, extra, cert) = match kind {
        SolveKind::Min => {
            let (nv, _) = potential_norms(&prob, cfg.norms.r, cfg.norms.s)?;
            let geo = mp_geometry(cfg.problem.dim, cfg.problem.p, cfg.norms.r, nv, &gs)?;
            let cert = check_tmin_min(&prob, cfg.norms.r, &geo)?;
            let rep = solve_local_min(&prob, &geo, None, &cfg.solver)?;
            (rep, Value::Null, Some(cert))
        }
        SolveKind::Mp => {
            let cert = if prob.is_free() {
                None
            } else {
                let th = theorem.unwrap_or(Theorem::TminMp);
                if th == Theorem::TminMin {
                    return Err(Error::Config(
                        "the mountain-pass solver is gated by t1 or tmin-mp".into(),
                    ));
                }
                Some(certificate(cfg, &prob, &gs, th)?)
            };
            let o = solve_mountain_pass(&prob, &gs, cert.as_ref(), &cfg.solver)?;
            let extra = json!({
                "level": o.level,
                "path_max": o.path_max,
                "h0": o.h0,
                "h1": o.h1,
                "sweeps": o.sweeps,
                "splitting": o.splitting,
            });
            (o.report, extra, cert)
        }
    };
    write_profile(out, &rep.u)?;
    if trace || cfg.output.trace {
        write_trace(out, &rep)?;
    }
    let body = json!({
        "solution": rep,
        "mountain_pass": extra,
        "certificate": cert,
        "constants": consts,
    });
    write_report(out, "solve", cfg, body)?;
    Ok(if rep.converged() { EXIT_OK } else { EXIT_NUMERICAL })
}

#[derive(Debug, Serialize)]
pub struct Diagnosis {
    pub breakdown: crate::functionals::EnergyBreakdown,
    pub lambda: Option<f64>,
    pub pohozaev: f64,
    pub pohozaev_rel: f64,
    pub cnc: f64,
    pub proj_grad: f64,
    pub tne: crate::certify::MonotoneFlag,
}

/// Loads a profile and evaluates the residuals on the config's grid when
/// the nodes agree, otherwise on the grid rebuilt from the file.
pub fn diagnose(cfg: &RunConfig, solution: &Path) -> Result<Diagnosis> {
    let u = GridFunction::read_csv(solution)?;
    let cgrid = cfg.build_grid()?;
    let same = cgrid.len() == u.grid().len()
        && cgrid.kind() == u.grid().kind()
        && cgrid.dim() == u.grid().dim()
        && cgrid
            .nodes()
            .iter()
            .zip(u.grid().nodes())
            .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + cgrid.rmax()));
    let grid = if same { cgrid } else { u.grid().clone() };
    let u = GridFunction::new(&grid, u.into_values())?;
    let prob = cfg.problem_on(&grid)?;
    let breakdown = prob.breakdown_slice(u.values());
    let pohozaev = breakdown.pohozaev(prob.dim, prob.p);
    Ok(Diagnosis {
        lambda: breakdown.lambda,
        pohozaev,
        pohozaev_rel: pohozaev.abs() / breakdown.a,
        cnc: if prob.is_free() {
            0.0
        } else {
            cnc_normalized(&prob, &u, 1.0)?
        },
        proj_grad: stationarity_norm(&prob, u.values()),
        tne: check_tne(&prob, 1.0),
        breakdown,
    })
}

pub fn cmd_diagnose(cfg: &RunConfig, solution: &Path, out: &Path) -> Result<i32> {
    let d = diagnose(cfg, solution)?;
    let ok = d.pohozaev_rel <= 1e-3 && d.cnc.abs() <= 1e-3;
    write_report(out, "diagnose", cfg, serde_json::to_value(&d)?)?;
    Ok(if ok { EXIT_OK } else { EXIT_NUMERICAL })
}

pub fn cmd_sweep(
    task: SweepTask,
    theorem: Option<Theorem>,
    trace: bool,
    configs: &[PathBuf],
    out: &Path,
) -> i32 {
    let results: Vec<(String, i32)> = configs
        .par_iter()
        .enumerate()
        .map(|(i, path)| {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let name = format!("{i:03}-{stem}");
            let dir = out.join(&name);
            let code = match RunConfig::load(path) {
                Err(e) => {
                    eprintln!("{}: {e}", path.display());
                    EXIT_CONFIG
                }
                Ok(cfg) => finish(match task {
                    SweepTask::Groundstate => cmd_groundstate(&cfg, &dir),
                    SweepTask::Constants => cmd_constants(&cfg, &dir),
                    SweepTask::Certify => match theorem {
                        Some(t) => cmd_certify(&cfg, t, &dir),
                        None => Err(Error::Config("sweep certify needs --theorem".into())),
                    },
                    SweepTask::SolveMin => cmd_solve(&cfg, SolveKind::Min, theorem, trace, &dir),
                    SweepTask::SolveMp => cmd_solve(&cfg, SolveKind::Mp, theorem, trace, &dir),
                }),
            };
            (name, code)
        })
        .collect();
    let summary: Vec<Value> = results
        .iter()
        .zip(configs)
        .map(|((name, code), path)| json!({"config": path, "output": name, "exit_code": code}))
        .collect();
    let written = fs::create_dir_all(out).and_then(|_| {
        fs::write(
            out.join("sweep.json"),
            serde_json::to_string_pretty(&summary).expect("plain JSON"),
        )
    });
    if let Err(e) = written {
        eprintln!("error: {e}");
        return EXIT_NUMERICAL;
    }
    results.iter().map(|(_, c)| *c).max().unwrap_or(EXIT_OK)
}
