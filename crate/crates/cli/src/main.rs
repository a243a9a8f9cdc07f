//! `dlss`: solve the DLSS equation, certify functional-inequality constants,
//! run the heat-flow verifier, fit decay rates and check the production
//! identities.
//!
//! Exit status: 0 on success, 2 on invalid input, 3 on numerical failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use clap::{Args, Parser, Subcommand, ValueEnum};
use dlss_core::config::{parse_config, Command, RunConfig};
use dlss_core::decay::{default_window, entropy_series, fit_decay};
use dlss_core::identity::identity_suite;
use dlss_core::inequalities::{
    auto_horizon, heatflow_verify, minimize_multistart, remainder_r, MinimizeOptions, QuotientKind, QuotientSpec,
};
use dlss_core::io::{emit_timeseries, format_timeseries, read_timeseries, to_json, write_atomic, CertificationReport};
use dlss_core::{solver, DiffBackend, Error, Field, FieldKind, PeriodicGrid};
use serde_json::json;
use std::f64::consts::TAU;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dlss", version, about = "DLSS solver and functional-inequality verifier")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the DLSS equation from a configuration file and emit the time series as CSV.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output` from the configuration; stdout when neither is set.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Minimize a quotient and compare with its closed-form constant (JSON report).
    Certify(CertifyArgs),
    /// Follow f(t) along the heat-type flow and report the integral remainder.
    Heatflow(HeatflowArgs),
    /// Fit the exponential entropy decay rate of a time-series CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long = "L", default_value_t = TAU)]
        length: f64,
        /// Fit window start; defaults to dropping the first 20% of records.
        #[arg(long)]
        t_lo: Option<f64>,
        /// Fit window end; defaults to the time E falls below 1e-12 E(0).
        #[arg(long)]
        t_hi: Option<f64>,
    },
    /// Check the production identities and the chain bound on random fields (JSON report).
    Identity {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "L", default_value_t = TAU)]
        length: f64,
        #[arg(long = "N", default_value_t = 256)]
        n_points: usize,
        #[arg(long, default_value = "spectral")]
        backend: DiffBackend,
    },
    /// Execute whatever command a configuration file names.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Poincare,
    Logsob,
    Convex,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long, value_enum)]
    kind: Kind,
    /// Derivative order for poincare and logsob.
    #[arg(long, default_value_t = 1)]
    n: u32,
    /// Exponent for convex, in (1, 2].
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long = "L", default_value_t = TAU)]
    length: f64,
    #[arg(long = "N", default_value_t = 256)]
    n_points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    starts: usize,
    #[arg(long, default_value_t = 3000)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value = "spectral")]
    backend: DiffBackend,
    /// Also write the report here.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct HeatflowArgs {
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    #[arg(long = "L", default_value_t = TAU)]
    length: f64,
    #[arg(long = "N", default_value_t = 256)]
    n_points: usize,
    /// Datum `base + amplitude cos(2 pi x / L)`.
    #[arg(long, default_value_t = 1.0)]
    base: f64,
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    #[arg(long = "T", default_value_t = 10.0)]
    t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    dt: f64,
    /// CSV of `t,f,dissipation`.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn validation(field: &str, reason: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

fn quotient_kind(kind: Kind, n: u32, p: f64) -> QuotientKind {
    match kind {
        Kind::Poincare => QuotientKind::Poincare(n),
        Kind::Logsob => QuotientKind::LogSobolev(n),
        Kind::Convex => QuotientKind::ConvexSobolev(p),
    }
}

fn emit(text: &str, output: Option<&Path>) -> dlss_core::Result<()> {
    match output {
        Some(path) => write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn solve(cfg: &RunConfig, output: Option<&Path>) -> dlss_core::Result<()> {
    let grid = cfg.grid()?;
    let u0 = cfg.initial.field(&grid)?;
    let tr = solver::solve(&u0, cfg.t_end, &cfg.solver, cfg.record_every)?;
    if tr.clamped_nodes > 0 {
        eprintln!("clamped {} nodes of the initial datum", tr.clamped_nodes);
    }
    let last = tr.records.last().expect("at least the initial record");
    eprintln!(
        "t = {} entropy_rel = {:e} mass drift = {:e} steps = {} factorizations = {}",
        last.t,
        last.entropy_rel,
        tr.max_relative_mass_drift(),
        tr.stats.steps,
        tr.stats.factorizations
    );
    match output {
        Some(path) => emit_timeseries(&tr.records, path),
        None => emit(&format_timeseries(&tr.records), None),
    }
}

fn certify(
    kind: QuotientKind,
    grid: &PeriodicGrid,
    backend: DiffBackend,
    seed: u64,
    starts: usize,
    opts: MinimizeOptions,
    output: Option<&Path>,
) -> dlss_core::Result<()> {
    if starts == 0 {
        return Err(validation("starts", "must be at least 1"));
    }
    if !(opts.tol > 0.0) {
        return Err(validation("tol", "must be positive"));
    }
    let spec = QuotientSpec::new(kind, grid)?.with_backend(backend);
    let r = minimize_multistart(&spec, seed, starts, opts)?;
    if !r.converged {
        eprintln!(
            "iteration budget exhausted after {} iterations; reporting the best value found",
            r.iterations
        );
    }
    let mut text = to_json(&CertificationReport::new(kind.name(), r.value, r.analytic))?;
    text.push('\n');
    if let Some(path) = output {
        write_atomic(path, text.as_bytes())?;
    }
    emit(&text, None)
}

fn heatflow(a: &HeatflowArgs) -> dlss_core::Result<()> {
    if !(1.0..=2.0).contains(&a.p) {
        return Err(validation("p", "must lie in [1, 2]"));
    }
    if !(a.base > 0.0 && a.amplitude.abs() < a.base) {
        return Err(validation(
            "amplitude",
            "must be smaller than base to keep the datum positive",
        ));
    }
    let grid = PeriodicGrid::new(a.length, a.n_points)?;
    let k = TAU / a.length;
    let u = Field::from_fn(&grid, FieldKind::Density, |x| a.base + a.amplitude * (k * x).cos())?;
    let recs = heatflow_verify(&u, a.p, a.t_end, a.dt)?;
    let v0 = u.map(|x| x.powf(2.0 / a.p))?;
    let rem = remainder_r(&v0, a.p, auto_horizon(&v0, a.p)?.max(a.dt), a.dt)?;
    let max_rise = recs
        .windows(2)
        .map(|w| w[1].f_value - w[0].f_value)
        .fold(f64::NEG_INFINITY, f64::max);
    if let Some(path) = &a.output {
        let mut csv = String::from("t,f,dissipation\n");
        for r in &recs {
            csv.push_str(&format!("{:.16e},{:.16e},{:.16e}\n", r.t, r.f_value, r.dissipation));
        }
        write_atomic(path, csv.as_bytes())?;
    }
    let last = recs.last().expect("at least the initial record");
    let summary = json!({
        "p": a.p,
        "records": recs.len(),
        "f0": recs[0].f_value,
        "f_end": last.f_value,
        "t_end": last.t,
        "max_increase": if recs.len() > 1 { max_rise } else { 0.0 },
        "remainder": rem.total(),
        "remainder_tail": rem.tail_estimate,
        "remainder_horizon": rem.horizon,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Io(e.to_string()))?;
    emit(&format!("{text}\n"), None)
}

fn fit(input: &Path, length: f64, t_lo: Option<f64>, t_hi: Option<f64>) -> dlss_core::Result<()> {
    let series = entropy_series(&read_timeseries(input)?);
    let (lo, hi) = default_window(&series);
    let report = fit_decay(&series, (t_lo.unwrap_or(lo), t_hi.unwrap_or(hi)), length)?;
    emit(&format!("{}\n", to_json(&report)?), None)
}

fn identity(
    grid: &PeriodicGrid,
    backend: DiffBackend,
    trials: usize,
    seed: u64,
    output: Option<&Path>,
) -> dlss_core::Result<()> {
    let report = identity_suite(grid, backend, trials, seed)?;
    emit(&format!("{}\n", to_json(&report)?), output)
}

fn run_config(path: &Path) -> dlss_core::Result<()> {
    let cfg = parse_config(&std::fs::read_to_string(path)?)?;
    let output = cfg.output.as_deref();
    match cfg.command {
        Command::Solve => solve(&cfg, output),
        Command::Certify => {
            let kind = cfg.quotient.ok_or_else(|| validation("kind", "required for certify"))?;
            let opts = MinimizeOptions {
                max_iters: cfg.max_iters,
                tol: cfg.tol,
                remainder: false,
            };
            certify(
                kind,
                &cfg.grid()?,
                cfg.solver.backend,
                cfg.seed,
                cfg.starts,
                opts,
                output,
            )
        }
        Command::HeatFlow => {
            let (base, amplitude) = match cfg.initial {
                dlss_core::config::InitialDatum::CosinePerturbation {
                    base,
                    amplitude,
                    mode: 1,
                } => (base, amplitude),
                _ => return Err(validation("initial", "heatflow runs need a mode-1 cosine datum")),
            };
            heatflow(&HeatflowArgs {
                p: cfg.p,
                length: cfg.length,
                n_points: cfg.n_points,
                base,
                amplitude,
                t_end: cfg.t_end,
                dt: cfg.dt,
                output: cfg.output.clone(),
            })
        }
        Command::DecayFit => fit(cfg.input.as_deref().expect("validated"), cfg.length, None, None),
        Command::Identity => identity(&cfg.grid()?, cfg.solver.backend, cfg.trials, cfg.seed, output),
    }
}

fn dispatch(cli: Cli) -> dlss_core::Result<()> {
    match cli.command {
        Cmd::Solve { config, output } => {
            let cfg = parse_config(&std::fs::read_to_string(&config)?)?;
            solve(&cfg, output.as_deref().or(cfg.output.as_deref()))
        }
        Cmd::Certify(a) => {
            let grid = PeriodicGrid::new(a.length, a.n_points)?;
            let opts = MinimizeOptions {
                max_iters: a.max_iters,
                tol: a.tol,
                remainder: false,
            };
            certify(
                quotient_kind(a.kind, a.n, a.p),
                &grid,
                a.backend,
                a.seed,
                a.starts,
                opts,
                a.output.as_deref(),
            )
        }
        Cmd::Heatflow(a) => heatflow(&a),
        Cmd::Fit {
            input,
            length,
            t_lo,
            t_hi,
        } => {
            if !(length > 0.0 && length.is_finite()) {
                return Err(validation("L", "must be positive"));
            }
            fit(&input, length, t_lo, t_hi)
        }
        Cmd::Identity {
            trials,
            seed,
            length,
            n_points,
            backend,
        } => identity(&PeriodicGrid::new(length, n_points)?, backend, trials, seed, None),
        Cmd::Run { config } => run_config(&config),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            // unreadable or malformed inputs count as invalid input
            if e.is_validation()
                || matches!(
                    e,
                    Error::Io(_) | Error::InsufficientData { .. } | Error::NonPositiveEntropy { .. }
                )
            {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
