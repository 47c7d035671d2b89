//! Command-line front end: configuration, dispatch and serialization.

pub mod config;
pub mod output;

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde_json::{json, Value};
use thiserror::Error;

use resetq_core::analytic::{ModelKind, ModelParams, ModelRegistry, Pmf, QueueModel, Truncation};
use resetq_core::ctmc_sim::{simulate_ctmc, SimConfig};
use resetq_core::oracle::{build_generator, oracle_pmf, pbe_residual, stationary_solve};
use resetq_core::suite::{run_suite, Grid};
use resetq_core::waiting_time::{
    lattice_wh, simulate_recursion, solve_wh, wh_residual, DistributionSpec, RecursionConfig,
    RecursionKind, ResetSpec, WhConfig,
};

pub use config::{Cli, CliCommand, Command, Format, RunConfig, SEED_ENV};
pub use output::{Cell, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED_CHECKS: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid parameter `{name}`: {reason}")]
    Param { name: &'static str, reason: String },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] resetq_core::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        CliError::Param {
            name,
            reason: reason.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Io { .. } => EXIT_FAILED_CHECKS,
            _ => EXIT_VALIDATION,
        }
    }
}

/// Result of a command: the report to write and the exit status to return
/// once it is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub status: i32,
}

fn required<T: Copy>(name: &'static str, v: Option<T>) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::param(name, "is required for this command"))
}

fn dist(name: &'static str, v: &Option<String>) -> Result<DistributionSpec, CliError> {
    let s = v
        .as_deref()
        .ok_or_else(|| CliError::param(name, "is required for this command"))?;
    s.parse().map_err(|e: resetq_core::Error| CliError::param(name, e.to_string()))
}

fn seed(cfg: &RunConfig) -> u64 {
    cfg.seed.unwrap_or(0)
}

fn model_params(cfg: &RunConfig, lambda: f64, kappa: f64) -> Result<(String, ModelParams), CliError> {
    let name = cfg
        .model
        .clone()
        .ok_or_else(|| CliError::param("model", "is required for this command"))?;
    let clearing = name == ModelKind::ClearingOnly.name();
    let mm1m = name == ModelKind::MM1M.name();
    let params = ModelParams {
        kind: ModelKind::from_name(&name).unwrap_or(ModelKind::MMInf),
        lambda,
        mu: cfg.mu.unwrap_or(if clearing { 0.0 } else { 1.0 }),
        kappa,
        nu: cfg.nu.unwrap_or(if mm1m { 1.0 } else { 0.0 }),
        r: cfg.r.unwrap_or(1),
    };
    Ok((name, params))
}

fn build_model(cfg: &RunConfig) -> Result<Box<dyn QueueModel>, CliError> {
    let (name, p) = model_params(cfg, required("lambda", cfg.lambda)?, required("kappa", cfg.kappa)?)?;
    Ok(ModelRegistry::standard().build(&name, p)?)
}

fn truncation(cfg: &RunConfig) -> Truncation {
    Truncation {
        n_max: cfg.nmax,
        eps: cfg.eps.unwrap_or(1e-12),
    }
}

fn pmf_rows(pmf: &Pmf) -> Vec<Vec<Cell>> {
    pmf.head
        .iter()
        .enumerate()
        .map(|(n, p)| vec![Cell::Int(n as u64), Cell::Float(*p)])
        .collect()
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn analytic(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    let pmf = model.stationary(&truncation(cfg))?;
    let residual = pbe_residual(model.params(), &pmf).max;
    Ok(Outcome {
        report: Report {
            params: to_value(model.params()),
            columns: vec!["n", "pi_n"],
            rows: pmf_rows(&pmf),
            tail_mass: Some(pmf.tail_bound()),
            tail: to_value(&pmf.tail),
            diagnostics: json!({
                "n_max": pmf.n_max(),
                "head_sum": pmf.head_sum(),
                "mean": pmf.mean(),
                "pbe_residual": residual,
            }),
        },
        status: EXIT_OK,
    })
}

fn oracle(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    let p = model.params();
    let eps = cfg.eps.unwrap_or(1e-12);
    let pmf = match cfg.nmax {
        Some(n) => stationary_solve(&build_generator(p, n)?)?,
        None => oracle_pmf(p, eps)?,
    };
    let tail = model.tail_bound(pmf.n_max());
    let closed = model
        .stationary(&Truncation::with_eps(eps))
        .map(|c| c.sup_distance(&pmf))
        .ok();
    Ok(Outcome {
        report: Report {
            params: to_value(p),
            columns: vec!["n", "pi_n"],
            rows: pmf_rows(&pmf),
            tail_mass: Some(tail),
            tail: json!({"type": "bounded_remainder", "mass_bound": tail}),
            diagnostics: json!({
                "dimension": pmf.n_max() + 1,
                "pbe_residual": pbe_residual(p, &pmf).max,
                "sup_distance_to_closed_form": closed,
            }),
        },
        status: EXIT_OK,
    })
}

fn simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let model = build_model(cfg)?;
    let d = SimConfig::default();
    let sim = SimConfig {
        horizon: cfg.horizon.unwrap_or(d.horizon),
        burn_in: cfg.burn_in.unwrap_or(d.burn_in),
        seed: seed(cfg),
        batches: cfg.batches.unwrap_or(d.batches),
        replications: cfg.replications.unwrap_or(d.replications),
    };
    let est = simulate_ctmc(model.params(), &sim)?;
    let rows = est
        .pmf
        .head
        .iter()
        .zip(&est.half_width)
        .enumerate()
        .map(|(n, (p, hw))| vec![Cell::Int(n as u64), Cell::Float(*p), Cell::Float(*hw)])
        .collect();
    Ok(Outcome {
        report: Report {
            params: json!({"model": model.params(), "sim": sim}),
            columns: vec!["n", "pi_n", "half_width"],
            rows,
            tail_mass: None,
            tail: Value::Null,
            diagnostics: json!({
                "events": est.events,
                "resets": est.resets,
                "total_time": est.total_time,
                "reset_frequency": est.reset_frequency(),
                "seed": est.seed,
            }),
        },
        status: EXIT_OK,
    })
}

fn recursion_kind(cfg: &RunConfig) -> Result<RecursionKind, CliError> {
    match cfg.kind.as_deref() {
        Some("gg1") => Ok(RecursionKind::GG1),
        Some("ggr") => Ok(RecursionKind::GGr(required("r", cfg.r)?)),
        Some("gginf") => Ok(RecursionKind::GGInf),
        Some(other) => Err(CliError::param(
            "kind",
            format!("unknown recursion `{other}` (known: gg1, ggr, gginf)"),
        )),
        None => Err(CliError::param("kind", "is required for this command")),
    }
}

fn waiting(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let kind = recursion_kind(cfg)?;
    let (u, v) = (dist("u", &cfg.u)?, dist("v", &cfg.v)?);
    let reset = ResetSpec::new(required("q", cfg.q)?)?;
    let d = RecursionConfig::default();
    let burn_in = match cfg.burn_in {
        Some(b) if b >= 0.0 && b.fract() == 0.0 => b as usize,
        Some(b) => return Err(CliError::param("burn_in", format!("must be a whole number of steps, got {b}"))),
        None => d.burn_in,
    };
    let rc = RecursionConfig {
        n_steps: cfg.steps.unwrap_or(d.n_steps),
        burn_in,
        seed: seed(cfg),
        batches: cfg.batches.unwrap_or(d.batches),
    };
    let points = cfg.points.unwrap_or(101);
    if points < 2 {
        return Err(CliError::param("points", format!("must be >= 2, got {points}")));
    }
    let est = simulate_recursion(&kind, &u, &v, &reset, &rc)?;
    let top = est.samples.last().copied().unwrap_or(0.0);
    let rows = (0..points)
        .map(|i| {
            let x = top * i as f64 / (points - 1) as f64;
            vec![Cell::Float(x), Cell::Float(est.ecdf(x))]
        })
        .collect();
    let busy = est.busy.as_ref().map(|(p, hw)| json!({"pmf": p.head, "half_width": hw}));
    Ok(Outcome {
        report: Report {
            params: json!({
                "kind": kind, "u": u, "v": v, "q": reset.q, "recursion": rc,
            }),
            columns: vec!["x", "ecdf"],
            rows,
            tail_mass: None,
            tail: Value::Null,
            diagnostics: json!({
                "samples": est.samples.len(),
                "mean": est.mean,
                "mean_half_width": est.mean_half_width,
                "atom_at_zero": est.atom_at_zero,
                "atom_half_width": est.atom_half_width,
                "regeneration": est.regeneration,
                "resets": est.resets,
                "busy": busy,
                "seed": est.seed,
            }),
        },
        status: EXIT_OK,
    })
}

fn wh(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let q = required("q", cfg.q)?;
    let (u, v) = match (&cfg.u, &cfg.v) {
        (Some(_), Some(_)) => (dist("u", &cfg.u)?, dist("v", &cfg.v)?),
        (None, None) => {
            let x = dist("x", &cfg.x)?;
            if let DistributionSpec::Lattice { masses } = &x {
                let pmf = lattice_wh(masses, q, cfg.nmax.unwrap_or(100))?;
                return Ok(Outcome {
                    report: Report {
                        params: json!({"x": x, "q": q}),
                        columns: vec!["n", "pi_n"],
                        rows: pmf_rows(&pmf),
                        tail_mass: Some(pmf.tail_bound()),
                        tail: to_value(&pmf.tail),
                        diagnostics: json!({"n_max": pmf.n_max(), "head_sum": pmf.head_sum()}),
                    },
                    status: EXIT_OK,
                });
            }
            (DistributionSpec::Deterministic { value: 0.0 }, x)
        }
        _ => return Err(CliError::param("u", "give both `u` and `v`, or `x` alone")),
    };
    let d = WhConfig::default();
    let wc = WhConfig {
        h: cfg.h,
        t_max: cfg.t_max,
        eps: cfg.eps.unwrap_or(d.eps),
        ..d
    };
    let (sol, fx) = solve_wh(&u, &v, q, &wc)?;
    let residual = wh_residual(&sol.cdf, &fx, q)?;
    let beyond = (1.0 - sol.cdf.values.last().copied().unwrap_or(0.0)).max(0.0);
    let rows = sol
        .cdf
        .values
        .iter()
        .enumerate()
        .map(|(k, f)| vec![Cell::Float(k as f64 * sol.cdf.h), Cell::Float(*f)])
        .collect();
    Ok(Outcome {
        report: Report {
            params: json!({"u": u, "v": v, "q": q, "solver": wc}),
            columns: vec!["t", "cdf"],
            rows,
            tail_mass: Some(beyond),
            tail: json!({
                "mass_beyond_grid": beyond,
                "truncation_bound": sol.truncation_bound,
                "discretization_bound": sol.discretization_bound,
            }),
            diagnostics: json!({
                "h": sol.cdf.h,
                "grid_points": sol.cdf.values.len(),
                "terms": sol.terms,
                "residual": residual,
                "atom_at_zero": sol.cdf.atom_at_zero(),
            }),
        },
        status: EXIT_OK,
    })
}

fn verify(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let grid = match cfg.grid.as_deref().unwrap_or("standard") {
        "standard" => Grid::standard(),
        other => return Err(CliError::param("grid", format!("unknown grid `{other}` (known: standard)"))),
    };
    let checks = run_suite(&grid);
    let all = checks.iter().all(|c| c.pass);
    let rows = checks
        .iter()
        .map(|c| {
            vec![
                Cell::Text(c.name.clone()),
                Cell::Float(c.max_err),
                Cell::Float(c.tol),
                Cell::Int(c.points as u64),
                Cell::Text(if c.pass { "PASS" } else { "FAIL" }.into()),
            ]
        })
        .collect();
    Ok(Outcome {
        report: Report {
            params: to_value(&grid),
            columns: vec!["check", "max_err", "tol", "points", "result"],
            rows,
            tail_mass: None,
            tail: Value::Null,
            diagnostics: json!({"failures": checks.iter().filter_map(|c| c.failure.clone()).collect::<Vec<_>>()}),
        },
        status: if all { EXIT_OK } else { EXIT_FAILED_CHECKS },
    })
}

fn sweep(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let lambdas = cfg.lambdas.clone().or(cfg.lambda.map(|l| vec![l]));
    let kappas = cfg.kappas.clone().or(cfg.kappa.map(|k| vec![k]));
    let lambdas = lambdas.ok_or_else(|| CliError::param("lambdas", "is required for sweep"))?;
    let kappas = kappas.ok_or_else(|| CliError::param("kappas", "is required for sweep"))?;
    let points: Vec<(f64, f64)> = lambdas
        .iter()
        .flat_map(|&l| kappas.iter().map(move |&k| (l, k)))
        .collect();
    let trunc = truncation(cfg);
    let results: Vec<Result<(Pmf, f64), CliError>> = points
        .par_iter()
        .map(|&(l, k)| {
            let (name, p) = model_params(cfg, l, k)?;
            let model = ModelRegistry::standard().build(&name, p)?;
            let pmf = model.stationary(&trunc)?;
            let res = pbe_residual(model.params(), &pmf).max;
            Ok((pmf, res))
        })
        .collect();
    let mut status = EXIT_OK;
    let mut rows = Vec::with_capacity(points.len());
    for (&(l, k), r) in points.iter().zip(&results) {
        let mut row = vec![Cell::Float(l), Cell::Float(k)];
        match r {
            Ok((pmf, res)) => {
                row.extend([
                    Cell::Float(pmf.mean()),
                    Cell::Float(pmf.prob(0)),
                    Cell::Float(pmf.tail_bound()),
                    Cell::Float(*res),
                    Cell::Text("ok".into()),
                ]);
            }
            Err(e) => {
                if status == EXIT_OK {
                    status = e.exit_code();
                }
                row.extend(std::iter::repeat_n(Cell::Float(f64::NAN), 4));
                row.push(Cell::Text(e.to_string()));
            }
        }
        rows.push(row);
    }
    Ok(Outcome {
        report: Report {
            params: json!({"model": cfg.model, "lambdas": lambdas, "kappas": kappas, "mu": cfg.mu, "nu": cfg.nu, "r": cfg.r}),
            columns: vec!["lambda", "kappa", "mean", "pi_0", "tail", "pbe_residual", "status"],
            rows,
            tail_mass: None,
            tail: Value::Null,
            diagnostics: json!({"points": points.len()}),
        },
        status,
    })
}

/// Runs the command named in `cfg` without writing anything.
pub fn compute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    match cfg.command {
        Some(Command::Analytic) => analytic(cfg),
        Some(Command::Oracle) => oracle(cfg),
        Some(Command::Simulate) => simulate(cfg),
        Some(Command::Waiting) => waiting(cfg),
        Some(Command::Wh) => wh(cfg),
        Some(Command::Verify) => verify(cfg),
        Some(Command::Sweep) => sweep(cfg),
        None => Err(CliError::param("command", "no command given")),
    }
}

fn print_table(report: &Report, out: &mut dyn Write) -> std::io::Result<()> {
    writeln!(out, "{:<36} {:>12} {:>10} {:>7}  result", "check", "max_err", "tol", "points")?;
    for row in &report.rows {
        if let [Cell::Text(name), Cell::Float(err), Cell::Float(tol), Cell::Int(n), Cell::Text(res)] = &row[..] {
            writeln!(out, "{name:<36} {err:>12.3e} {tol:>10.1e} {n:>7}  {res}")?;
        }
    }
    Ok(())
}

/// Runs `cfg`, writes its output (to `cfg.output` or `stdout`) and returns
/// the exit status. Errors go to `stderr`.
pub fn run(cfg: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let outcome = match compute(cfg) {
        Ok(o) => o,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return e.exit_code();
        }
    };
    let format = cfg.format.unwrap_or_default();
    let written = match &cfg.output {
        Some(path) => std::fs::File::create(path)
            .map(std::io::BufWriter::new)
            .and_then(|mut f| {
                outcome.report.write(format, &mut f)?;
                f.flush()
            })
            .map_err(|e| CliError::Io {
                path: path.clone(),
                source: e,
            }),
        None if cfg.command == Some(Command::Verify) && format == Format::Csv => {
            print_table(&outcome.report, stdout).map_err(|e| CliError::Io {
                path: "<stdout>".into(),
                source: e,
            })
        }
        None => outcome.report.write(format, stdout).map_err(|e| CliError::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    };
    if let Err(e) = written {
        let _ = writeln!(stderr, "error: {e}");
        return e.exit_code();
    }
    if cfg.command == Some(Command::Verify) && cfg.output.is_some() {
        let _ = print_table(&outcome.report, stdout);
    }
    outcome.status
}
