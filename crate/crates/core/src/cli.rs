//! The four `wulffflow` commands, independent of argument parsing.
//!
//! Each command reads a [`RunConfig`], writes its files into the configured
//! output directory and returns a short human-readable summary. Nothing is
//! left behind when a command fails.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::flow::FlowSolver;
use crate::functionals::{first_variation_ladder, minkowski_check, wulff_volume, VariationReport};
use crate::geometry::compute_fields;
use crate::norm::{ValidityTolerances, MIN_VALIDATION_SAMPLES};
use crate::output::{self, OutputSet};

/// Environment variable that overrides the configured thread count.
pub const THREADS_ENV: &str = "WULFFFLOW_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Inequality,
    NormCheck,
    VariationCheck,
}

impl Command {
    pub const ALL: [Command; 4] = [Command::Simulate, Command::Inequality, Command::NormCheck, Command::VariationCheck];

    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Inequality => "inequality",
            Command::NormCheck => "norm-check",
            Command::VariationCheck => "variation-check",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown command `{s}`")))
    }
}

/// Result of a command that ran to completion.
#[derive(Clone, Debug)]
pub struct CommandOutput {
    pub files: Vec<PathBuf>,
    pub summary: String,
    /// `false` when the command's own check failed (norm invalid,
    /// inequality violated outside the equality band); the files are still
    /// written.
    pub passed: bool,
}

impl Error {
    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parse { .. } => 2,
            Error::Domain(_) | Error::Numeric(_) | Error::Degenerate { .. } | Error::FlowBreakdown { .. } => 3,
            Error::Io { .. } => 4,
        }
    }
}

/// Exit status when a command completed but its check failed.
pub const CHECK_FAILED_EXIT: i32 = 3;

/// Thread count from the environment value if set, else the configuration.
pub fn resolve_threads(configured: usize, env: Option<&str>) -> Result<usize> {
    match env {
        None => Ok(configured),
        Some(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a non-negative integer, got `{v}`"))),
    }
}

/// Runs a command in a thread pool of the resolved size.
pub fn execute(command: Command, config: &RunConfig) -> Result<CommandOutput> {
    let env = std::env::var(THREADS_ENV).ok();
    let threads = resolve_threads(config.threads, env.as_deref())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| match command {
        Command::Simulate => simulate(config),
        Command::Inequality => inequality(config),
        Command::NormCheck => norm_check(config),
        Command::VariationCheck => variation_check(config),
    })
}

pub fn simulate(config: &RunConfig) -> Result<CommandOutput> {
    let grid = config.build_grid()?;
    let norm = config.build_norm()?;
    let graph = config.build_initial(&grid, &norm)?;
    let solver = FlowSolver::new(norm, grid, config.flow.clone())?;
    let result = solver.run(graph)?;

    let mut out = OutputSet::new(&config.output_dir)?;
    out.write(output::TIMESERIES_FILE, &output::timeseries_csv(&result.records))?;
    out.write(output::LIMIT_REPORT_FILE, &result.limit_report.to_key_values())?;
    for s in &result.snapshots {
        out.write(&output::snapshot_file_name(s.t), &output::obj_text(&s.graph))?;
    }
    let last = result.records.last().expect("records are never empty");
    let first = &result.records[0];
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "t = {:.6} after {} steps ({} halved){}",
        result.final_state.t,
        result.final_state.step_index,
        result.retries,
        if result.stopped_early { ", stopped on umbilicity threshold" } else { "" }
    );
    let _ = writeln!(summary, "area_F ratio e^-t A(t)/A(0) = {:.12}", last.area_f / (first.area_f * last.t.exp()));
    let _ = writeln!(summary, "umb_deficit {:.3e} -> {:.3e}", first.umb_deficit, last.umb_deficit);
    let lr = &result.limit_report;
    let _ = writeln!(
        summary,
        "alpha = {:.10} (area prediction {:.10}), sup|u_hat - alpha| = {:.3e}, rate = {:.4}",
        lr.alpha, lr.alpha_area_prediction, lr.final_deviation, lr.rate
    );
    Ok(CommandOutput { files: out.commit(), summary, passed: true })
}

pub fn inequality(config: &RunConfig) -> Result<CommandOutput> {
    let grid = config.build_grid()?;
    let norm = config.build_norm()?;
    let graph = config.build_initial(&grid, &norm)?;
    let fields = compute_fields(&graph, &norm)?;
    let vol_l = wulff_volume(&norm, &grid)?;
    let report = minkowski_check(&fields, vol_l, config.check.tol_inequality, config.check.tol_equality);
    let mut out = OutputSet::new(&config.output_dir)?;
    let text = report.to_key_values();
    out.write(output::INEQUALITY_FILE, &text)?;
    // A discretized Wulff shape sits within round-off of equality on either
    // side; inside the equality band that is not a violation.
    let passed = report.holds || report.near_equality;
    Ok(CommandOutput { files: out.commit(), summary: text, passed })
}

pub fn norm_check(config: &RunConfig) -> Result<CommandOutput> {
    let norm = config.build_norm()?;
    let samples = config.check.samples.max(MIN_VALIDATION_SAMPLES);
    let validity = norm.validate(samples, &ValidityTolerances::default())?;
    let duality = norm.duality_check(samples)?;
    let duality_ok = duality.max_residual() <= 1e-8;
    let mut text = String::new();
    let _ = writeln!(text, "family={}", norm.family().name());
    let _ = writeln!(text, "samples={samples}");
    let _ = writeln!(text, "min_af_eigenvalue={:.16e}", validity.min_af_eigenvalue);
    let _ = writeln!(text, "max_af_eigenvalue={:.16e}", validity.max_af_eigenvalue);
    let _ = writeln!(text, "homogeneity_residual={:.16e}", validity.homogeneity_residual);
    let _ = writeln!(text, "gradient_check_residual={:.16e}", validity.gradient_check_residual);
    let _ = writeln!(text, "valid={}", validity.valid);
    let _ = writeln!(text, "dual_of_gradient_residual={:.16e}", duality.dual_of_gradient);
    let _ = writeln!(text, "dual_gradient_residual={:.16e}", duality.dual_gradient);
    let _ = writeln!(text, "bidual_residual={:.16e}", duality.bidual);
    match duality.analytic_vs_numeric {
        Some(v) => {
            let _ = writeln!(text, "analytic_vs_numeric_dual={v:.16e}");
        }
        None => text.push_str("analytic_vs_numeric_dual=n/a\n"),
    }
    let _ = writeln!(text, "duality_ok={duality_ok}");
    let mut out = OutputSet::new(&config.output_dir)?;
    out.write(output::NORM_CHECK_FILE, &text)?;
    Ok(CommandOutput { files: out.commit(), summary: text, passed: validity.valid && duality_ok })
}

pub fn variation_check(config: &RunConfig) -> Result<CommandOutput> {
    let grid = config.build_grid()?;
    let norm = config.build_norm()?;
    let graph = config.build_initial(&grid, &norm)?;
    let series = config.psi_series();
    let psi = grid.sample(|x| series.eval(config.dimension, x));
    let ladder = first_variation_ladder(&graph, &norm, &psi, &config.check.epsilons)?;
    let mut csv = String::new();
    csv.push_str(VariationReport::CSV_HEADER);
    csv.push('\n');
    for r in &ladder.reports {
        csv.push_str(&r.to_csv_row());
        csv.push('\n');
    }
    let mut summary = String::new();
    for r in &ladder.reports {
        let _ = writeln!(
            summary,
            "eps = {:.3e}: area residual {:.3e}, total H_F residual {:.3e}",
            r.epsilon, r.area_residual, r.total_hf_residual
        );
    }
    for (a, t) in &ladder.orders {
        let _ = writeln!(summary, "observed order in eps: area {a:.3}, total H_F {t:.3}");
    }
    let mut out = OutputSet::new(&config.output_dir)?;
    out.write(output::VARIATION_FILE, &csv)?;
    let passed = ladder.reports.iter().all(|r| r.admissible);
    Ok(CommandOutput { files: out.commit(), summary, passed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
        assert!("simulat".parse::<Command>().is_err());
    }

    #[test]
    fn threads_from_environment() {
        assert_eq!(resolve_threads(3, None).unwrap(), 3);
        assert_eq!(resolve_threads(3, Some("1")).unwrap(), 1);
        assert_eq!(resolve_threads(3, Some("x")).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn breakdown_leaves_no_files() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("out");
        let text = format!(
            "[grid]\nresolution = 24\n[initial]\nshape = harmonic\nradius = 1\nterms = 1:0:1.9\n[flow]\nt_max = 0.1\n\
             [output]\ndirectory = {}\n",
            dir.display()
        );
        let cfg = parse_config(&text).unwrap();
        let err = simulate(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 3, "{err}");
        assert!(!dir.exists());
    }
}
