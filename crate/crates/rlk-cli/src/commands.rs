//! The four workflows behind the subcommands. Every CSV starts with a
//! comment line carrying the config digest, so any output file can be traced
//! back to the exact configuration that produced it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rlk::stability::CrossingRow;
use rlk::{ConvergenceReport, CriticalDtReport, SchemeSpec, Termination};

use crate::config::{
    default_rect, ConvergeConfig, CriticalDtConfig, SolveConfig, StabilityConfig,
};
use crate::CliError;

/// Outcome the process exit code is derived from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    /// The solve terminated on the overflow signal (exit code 3), so scripts
    /// can bracket critical steps from the shell.
    OverflowTerminated,
}

fn write_csv(dir: &Path, name: &str, digest: &str, body: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    let content = format!("# config-digest: {digest}\n{body}");
    std::fs::write(&path, content)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
    println!("{}", path.display());
    Ok(path)
}

fn validated(schemes: &[SchemeSpec]) -> Result<(), CliError> {
    if schemes.is_empty() {
        return Err(CliError::Config("schemes: list must not be empty".into()));
    }
    for s in schemes {
        s.validate()
            .map_err(|e| CliError::Config(format!("schemes: {e}")))?;
    }
    Ok(())
}

pub fn cmd_solve(cfg: &SolveConfig, digest: &str, out: &Path) -> Result<Outcome, CliError> {
    cfg.scheme
        .validate()
        .map_err(|e| CliError::Config(format!("scheme: {e}")))?;
    let problem = cfg.problem.build()?;
    let t_end = cfg.t_end.unwrap_or_else(|| problem.horizon());
    let traj = rlk::integrate(&problem, &cfg.scheme, cfg.h, t_end)?;

    let mut body = String::from("t");
    for i in 1..=problem.dim() {
        write!(body, ",y_{i}").unwrap();
    }
    body.push('\n');
    for (t, y) in traj.times.iter().zip(&traj.states) {
        write!(body, "{t}").unwrap();
        for v in y {
            write!(body, ",{v}").unwrap();
        }
        body.push('\n');
    }
    write_csv(out, "trajectory.csv", digest, &body)?;

    match traj.termination {
        Termination::Completed => Ok(Outcome::Done),
        Termination::Overflow { step } => {
            eprintln!("overflow at step {step} (t = {})", step as f64 * cfg.h);
            Ok(Outcome::OverflowTerminated)
        }
    }
}

pub fn cmd_stability(cfg: &StabilityConfig, digest: &str, out: &Path) -> Result<Outcome, CliError> {
    validated(&cfg.schemes)?;
    if cfg.thetas.is_empty() {
        return Err(CliError::Config("thetas: list must not be empty".into()));
    }
    let mut crossing_rows: Vec<CrossingRow> = Vec::new();
    for scheme in &cfg.schemes {
        let rect = cfg
            .rect
            .map(rlk::GridRect::from)
            .unwrap_or_else(|| default_rect(scheme.order));
        for &theta in &cfg.thetas {
            let grid = rlk::scan(scheme, theta, rect, cfg.resolution.re, cfg.resolution.im)?;
            let name = format!("stability_{}_theta_{theta}.csv", scheme.label());
            write_csv(out, &name, digest, &grid.to_csv())?;
            if cfg.crossings {
                let crossing = rlk::real_axis_crossing(scheme, theta, cfg.search_limit)?;
                crossing_rows.push(CrossingRow {
                    scheme: scheme.label(),
                    k: scheme.order,
                    theta,
                    crossing,
                });
            }
        }
    }
    if cfg.crossings {
        write_csv(
            out,
            "crossings.csv",
            digest,
            &rlk::stability::crossings_to_csv(&crossing_rows),
        )?;
    }
    Ok(Outcome::Done)
}

pub fn cmd_converge(cfg: &ConvergeConfig, digest: &str, out: &Path) -> Result<Outcome, CliError> {
    validated(&cfg.schemes)?;
    let problem = cfg.problem.build()?;
    let reports: Vec<ConvergenceReport> = cfg
        .schemes
        .iter()
        .map(|scheme| rlk::convergence_study(&problem, scheme, cfg.h_ref, &cfg.m_list, cfg.t_end))
        .collect::<rlk::Result<_>>()?;
    write_csv(
        out,
        "convergence.csv",
        digest,
        &rlk::harness::convergence_csv(&reports),
    )?;
    Ok(Outcome::Done)
}

pub fn cmd_critical_dt(
    cfg: &CriticalDtConfig,
    digest: &str,
    out: &Path,
) -> Result<Outcome, CliError> {
    validated(&cfg.schemes)?;
    let problem = cfg.problem.build()?;
    let reports: Vec<CriticalDtReport> = cfg
        .schemes
        .iter()
        .map(|scheme| rlk::critical_dt(&problem, scheme, cfg.h_hi, cfg.tol, cfg.t_end))
        .collect::<rlk::Result<_>>()?;
    write_csv(
        out,
        "critical_dt.csv",
        digest,
        &rlk::harness::critical_dt_csv(&reports),
    )?;
    Ok(Outcome::Done)
}
