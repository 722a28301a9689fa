//! `hdqkd`: key rates, sweeps, self-checks, quadrature rules and program
//! export from the command line.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 solver failure,
//! 3 validation failure.

use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};

use hdqkd_cli::config::{RawConfig, ScenarioConfig};
use hdqkd_cli::output::{rate_report, write_csv};
use hdqkd_cli::validate;
use hdqkd_core::entropy::{assemble_sdp, gauss_radau};
use hdqkd_core::keyrate::{compute_rate, sweep, SweepRow};
use hdqkd_core::model::isotropic_time_state;
use hdqkd_core::noise::{per_frame_params, visibility};
use hdqkd_core::povm::constraints_from_state;

#[derive(Parser, Debug)]
#[command(name = "hdqkd", version, about = "Key-rate lower bounds for high-dimensional time-bin QKD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (flat `key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// p1, p2 or bbm92.
    #[arg(long, global = true)]
    protocol: Option<String>,
    /// Time bins per frame.
    #[arg(long, global = true)]
    d: Option<usize>,
    /// Gauss-Radau nodes.
    #[arg(long, global = true)]
    m: Option<usize>,
    #[arg(long, global = true)]
    solar_rate_hz: Option<f64>,
    #[arg(long, global = true)]
    loss_db: Option<f64>,
    /// Output file (CSV for `rate` and `sweep`, JSON for `export-sdp`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for `sweep`.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Key rate at a single point.
    Rate,
    /// Key rates along the configured sweep axis, as CSV.
    Sweep,
    /// Self-checks with a pass/fail table.
    Validate,
    /// Gauss-Radau nodes and weights.
    Quadrature,
    /// The entropy program of the scenario as JSON.
    ExportSdp,
}

/// Failure with its exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 1, error: error.into() }
}

fn solver(error: impl Into<anyhow::Error>) -> Failure {
    Failure { code: 2, error: error.into() }
}

fn scenario(cli: &Cli, need_scenario: bool) -> Result<ScenarioConfig, Failure> {
    let mut raw = match &cli.config {
        Some(path) => RawConfig::from_path(path).map_err(usage)?,
        None => RawConfig::default(),
    };
    if let Some(p) = &cli.protocol {
        raw.set("protocol", p.clone());
    }
    if let Some(d) = cli.d {
        raw.set("d", d.to_string());
    }
    if let Some(m) = cli.m {
        raw.set("quadrature_m", m.to_string());
    }
    if let Some(x) = cli.solar_rate_hz {
        raw.set("solar_rate_hz", x.to_string());
    }
    if let Some(x) = cli.loss_db {
        raw.set("loss_db", x.to_string());
    }
    if let Some(s) = cli.seed {
        raw.set("seed", s.to_string());
    }
    raw.resolve(need_scenario).map_err(usage)
}

fn output(cli: &Cli) -> Result<Box<dyn Write>, Failure> {
    match &cli.out {
        Some(path) => {
            let f = File::create(path).with_context(|| format!("cannot create {}", path.display())).map_err(usage)?;
            Ok(Box::new(io::BufWriter::new(f)))
        }
        None => Ok(Box::new(io::stdout().lock())),
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Rate => {
            let sc = scenario(cli, true)?;
            let cfg = sc.protocol_config();
            let result = compute_rate(&cfg, &sc.solver_options()).map_err(solver)?;
            print!("{}", rate_report(&cfg, &result));
            if cli.out.is_some() {
                let row = SweepRow { config: cfg, result: Ok(result.clone()) };
                write_csv(output(cli)?, &[row]).map_err(usage)?;
            }
            if !result.status.has_bound() {
                return Err(solver(anyhow::anyhow!("no entropy bound ({})", result.status.tag())));
            }
        }
        Command::Sweep => {
            let sc = scenario(cli, true)?;
            let spec = sc
                .sweep
                .clone()
                .ok_or_else(|| usage(anyhow::anyhow!("sweep needs 'sweep_axis', 'sweep_start' and 'sweep_stop'")))?;
            let rows = sweep(&sc.protocol_config(), spec.axis, &spec.grid(), &sc.solver_options(), cli.jobs)
                .map_err(usage)?;
            write_csv(output(cli)?, &rows).map_err(usage)?;
            let mut failed = 0;
            for row in &rows {
                let value = match spec.axis {
                    hdqkd_core::keyrate::SweepAxis::SolarRate => row.config.solar_rate_hz,
                    hdqkd_core::keyrate::SweepAxis::LossDb => row.config.loss.db(),
                };
                match &row.result {
                    Err(e) => {
                        failed += 1;
                        eprintln!("{} = {value}: {e}", spec.axis.tag());
                    }
                    Ok(r) if !r.status.has_bound() => {
                        failed += 1;
                        eprintln!("{} = {value}: no entropy bound ({})", spec.axis.tag(), r.status.tag());
                    }
                    Ok(_) => {}
                }
            }
            if failed > 0 {
                return Err(solver(anyhow::anyhow!("{failed} of {} sweep points failed", rows.len())));
            }
        }
        Command::Validate => {
            let sc = scenario(cli, false)?;
            let checks = validate::run_all(&sc).map_err(solver)?;
            print!("{}", validate::table(&checks));
            let failed = checks.iter().filter(|c| !c.passed()).count();
            println!("{} checks, {failed} failed", checks.len());
            if failed > 0 {
                return Err(Failure { code: 3, error: anyhow::anyhow!("{failed} validation checks failed") });
            }
        }
        Command::Quadrature => {
            let sc = scenario(cli, false)?;
            let q = gauss_radau(sc.quadrature_m).map_err(usage)?;
            let mut out = output(cli)?;
            let write = |out: &mut dyn Write| -> io::Result<()> {
                writeln!(out, "node,weight")?;
                for (t, w) in q.nodes.iter().zip(&q.weights) {
                    writeln!(out, "{t:.17},{w:.17}")?;
                }
                out.flush()
            };
            write(&mut out).map_err(usage)?;
        }
        Command::ExportSdp => {
            let sc = scenario(cli, true)?;
            let cfg = sc.protocol_config();
            cfg.validate().map_err(usage)?;
            let (d, _) = cfg.effective_dimension_and_frame();
            let v = visibility(cfg.protocol, &per_frame_params(&cfg)).map_err(usage)?.v.clamp(0.0, 1.0);
            let rho = isotropic_time_state(v, d).map_err(usage)?;
            let constraints = constraints_from_state(cfg.protocol.measurement_protocol(), &rho).map_err(usage)?;
            let problem = assemble_sdp(&constraints, gauss_radau(cfg.quadrature_m).map_err(usage)?).map_err(usage)?;
            let json = problem.export_json().map_err(usage)?;
            let mut out = output(cli)?;
            out.write_all(json.as_bytes()).and_then(|_| out.write_all(b"\n")).and_then(|_| out.flush()).map_err(usage)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
