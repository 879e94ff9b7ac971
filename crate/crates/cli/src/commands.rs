use std::fs;
use std::io::Write;

use anyhow::Context;
use serde::Serialize;
use wallstrip::analytic::regime_distance;
use wallstrip::descent::StopReason;
use wallstrip::energy::EnergyBreakdown;
use wallstrip::error::WallError;
use wallstrip::grid::StripGrid;
use wallstrip::io::{save_field, save_json};
use wallstrip::micro::{minimize_eeps, MicroParams};
use wallstrip::minimize::{minimize_wall, SolveOptions};
use wallstrip::params::WallParams;
use wallstrip::verify::{run_verification, Fault, VerifyOptions};

use crate::{SolveArgs, SolverArgs, SweepArgs, SweepParam, VerifyArgs};
use crate::{EXIT_NOT_CONVERGED, EXIT_OK, EXIT_VERIFY_FAILED};

pub enum Failure {
    /// Bad flags or parameters; reported with the usage line.
    Usage(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<WallError> for Failure {
    /// Parameter and grid errors raised inside a solver are still usage
    /// errors; everything else is a runtime failure.
    fn from(e: WallError) -> Self {
        match e {
            WallError::InvalidGrid(_) | WallError::InvalidParams(_) | WallError::Domain(_) => usage(e),
            other => Failure::Runtime(other.into()),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> Failure {
    Failure::Usage(e.to_string())
}

fn solve_options(a: &SolverArgs) -> Result<SolveOptions, Failure> {
    let mut opts = SolveOptions { init: a.init.parse().map_err(usage)?, ..Default::default() };
    if let Some(t) = a.tol {
        opts.grad_tol = t;
    }
    if let Some(t) = a.energy_tol {
        opts.energy_tol = t;
    }
    if let Some(n) = a.max_iters {
        opts.max_iters = n;
    }
    opts.validate().map_err(usage)?;
    Ok(opts)
}

fn print_breakdown(e: &EnergyBreakdown) {
    println!("energy     {:.12}", e.total);
    println!("  dirichlet  {:.12}", e.dirichlet);
    println!("  zeeman     {:.12}", e.zeeman);
    println!("  boundary   {:.12}", e.boundary);
    if e.nonlocal != 0.0 {
        println!("  nonlocal   {:.12}", e.nonlocal);
    }
}

pub fn solve(a: &SolveArgs) -> Result<u8, Failure> {
    let params = WallParams::new(a.gamma, a.h, a.k).map_err(usage)?;
    let grid = StripGrid::new(a.m, a.nx, a.ny).map_err(usage)?;
    let opts = solve_options(&a.solver)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let report = minimize_wall(&grid, &params, &opts)?;
    let profile = a.out.join("profile.csv");
    save_field(&profile, &report.field)?;
    save_json(&a.out.join("report.json"), &report.summary(&params))?;

    print_breakdown(&report.energy);
    println!(
        "{} after {} iterations ({:?}, gradient norm {:.3e})",
        if report.converged { "converged" } else { "NOT converged" },
        report.iterations,
        report.stop_reason,
        report.grad_norm
    );
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    println!("wrote {} and report.json", profile.display());
    Ok(if report.converged { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

#[derive(Serialize)]
struct SweepRow {
    param: &'static str,
    value: f64,
    nx: usize,
    energy: f64,
    dirichlet: f64,
    zeeman: f64,
    boundary: f64,
    nonlocal: f64,
    converged: bool,
    iterations: usize,
    stop_reason: StopReason,
    monotone: bool,
    y_mirror_err: f64,
    x_point_err: f64,
    decay_rate_left: Option<f64>,
    decay_rate_right: Option<f64>,
    analytic_profile: Option<String>,
    analytic_distance: Option<f64>,
}

fn parse_values(s: &str) -> Result<Vec<f64>, Failure> {
    let values = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| usage(format!("'{t}' in --values is not a number"))))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(usage("--values must list at least one value"));
    }
    Ok(values)
}

/// One fully validated sweep point.
struct Point {
    value: f64,
    params: WallParams,
    grid: StripGrid,
    micro: Option<MicroParams>,
}

pub fn sweep(a: &SweepArgs) -> Result<u8, Failure> {
    let values = parse_values(&a.values)?;
    let base = StripGrid::new(a.m, a.nx, a.ny).map_err(usage)?;
    let opts = solve_options(&a.solver)?;
    let points = values
        .iter()
        .map(|&v| {
            let (gamma, grid, micro) = match a.param {
                SweepParam::Gamma => (v, base, None),
                SweepParam::M => {
                    let nx = (2.0 * v / base.hx()).round() as usize + 1;
                    (a.gamma, StripGrid::new(v, nx, a.ny)?, None)
                }
                SweepParam::Eps => (a.gamma, base, Some(MicroParams::with_eps(v)?)),
            };
            Ok(Point { value: v, params: WallParams::new(gamma, a.h, a.k)?, grid, micro })
        })
        .collect::<Result<Vec<_>, WallError>>()
        .map_err(usage)?;

    let name = match a.param {
        SweepParam::Gamma => "gamma",
        SweepParam::Eps => "eps",
        SweepParam::M => "M",
    };
    let mut rows = Vec::new();
    for p in &points {
        eprintln!("{name} = {} ...", p.value);
        let row = match &p.micro {
            None => {
                let r = minimize_wall(&p.grid, &p.params, &opts)?;
                let dist = (a.param == SweepParam::Gamma && p.params.k == 1)
                    .then(|| regime_distance(&r.field, p.params.gamma));
                let props = &r.properties;
                SweepRow {
                    param: name,
                    value: p.value,
                    nx: p.grid.nx,
                    energy: r.energy.total,
                    dirichlet: r.energy.dirichlet,
                    zeeman: r.energy.zeeman,
                    boundary: r.energy.boundary,
                    nonlocal: r.energy.nonlocal,
                    converged: r.converged,
                    iterations: r.iterations,
                    stop_reason: r.stop_reason,
                    monotone: props.monotone.ok,
                    y_mirror_err: props.symmetry.y_mirror_err,
                    x_point_err: props.symmetry.x_point_err,
                    decay_rate_left: props.decay.map(|d| d.rate_left),
                    decay_rate_right: props.decay.map(|d| d.rate_right),
                    analytic_profile: dist.map(|d| profile_name(&d.profile)),
                    analytic_distance: dist.map(|d| d.distance),
                }
            }
            Some(micro) => {
                let r = minimize_eeps(&p.grid, &p.params, micro, &opts)?;
                SweepRow {
                    param: name,
                    value: p.value,
                    nx: p.grid.nx,
                    energy: r.energy.total,
                    dirichlet: r.energy.dirichlet,
                    zeeman: r.energy.zeeman,
                    boundary: r.energy.boundary,
                    nonlocal: r.energy.nonlocal,
                    converged: r.converged,
                    iterations: r.iterations,
                    stop_reason: r.stop_reason,
                    monotone: r.monotone.ok,
                    y_mirror_err: r.symmetry.y_mirror_err,
                    x_point_err: r.symmetry.x_point_err,
                    decay_rate_left: None,
                    decay_rate_right: None,
                    analytic_profile: None,
                    analytic_distance: None,
                }
            }
        };
        rows.push(row);
    }

    let sink: Box<dyn Write> = match &a.out {
        Some(path) => Box::new(fs::File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    for r in &rows {
        w.serialize(r).context("writing sweep table")?;
    }
    w.flush().context("writing sweep table")?;
    Ok(if rows.iter().all(|r| r.converged) { EXIT_OK } else { EXIT_NOT_CONVERGED })
}

fn profile_name(p: &wallstrip::analytic::Profile) -> String {
    serde_json::to_value(p)
        .ok()
        .and_then(|v| v.get("name").and_then(|n| n.as_str().map(String::from)))
        .unwrap_or_default()
}

pub fn verify(a: &VerifyArgs) -> Result<u8, Failure> {
    let fault = a.inject_fault.as_deref().map(str::parse::<Fault>).transpose().map_err(usage)?;
    let report = run_verification(&VerifyOptions { fast: a.fast, seed: a.seed, fault });
    let json = serde_json::to_string_pretty(&report).context("serializing report")?;
    println!("{json}");
    if let Some(path) = &a.out {
        save_json(path, &report)?;
    }
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAILED {} ({}): value {:e}, tolerance {:e}; {}", c.name, c.module, c.value, c.tolerance, c.detail);
    }
    Ok(if report.passed { EXIT_OK } else { EXIT_VERIFY_FAILED })
}
