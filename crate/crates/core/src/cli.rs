//! Command-line front end: `design`, `simulate`, `verify`, `reproduce`.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 1 | I/O failure (unreadable scenario, unwritable output) |
//! | 2 | usage or schema error, invalid model data |
//! | 3 | synthesis or simulation failure |
//! | 4 | `verify` found a failing check |
//!
//! Verbosity follows the `CBF_SERVO_LOG` environment variable
//! (`error`, `warn`, `info`, `debug`, `trace`, or a module filter).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::augmentation::{AugmentationConfig, MultiplierMode};
use crate::error::Error;
use crate::lqr::LqrDesign;
use crate::numerics::{eig_real_parts, Matrix};
use crate::presets::TradeStudyCase;
use crate::report::{summary_table, write_run};
use crate::scenario::{bundled_case_source, load_scenario, parse_scenario};
use crate::sim::{self, Scenario, SimulationResult};
use crate::verify::{run_verify, Fault, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;
pub const EXIT_VERIFY: i32 = 4;

pub const LOG_ENV: &str = "CBF_SERVO_LOG";

#[derive(Debug, Parser)]
#[command(name = "cbf-servo", version, about = "LQR PI servo-control with min-norm CBF augmentation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Design the baseline gains and print the derived constraint maps.
    Design {
        #[arg(long, value_name = "PATH")]
        scenario: PathBuf,
    },
    /// Simulate one scenario and write telemetry, metrics and plots.
    Simulate {
        #[arg(long, value_name = "PATH")]
        scenario: PathBuf,
        #[arg(long, value_name = "DIR", default_value = "out")]
        out: PathBuf,
        #[command(flatten)]
        run: RunOptions,
    },
    /// Cross-check the closed-form law against the QP oracle on random instances.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long, value_name = "MODE", value_parser = parse_mode)]
        multiplier_mode: Option<MultiplierMode>,
        /// Worker threads (0: all available).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long, hide = true, value_parser = parse_fault)]
        inject_fault: Option<Fault>,
    },
    /// Run the five bundled trade-study scenarios and write a summary table.
    Reproduce {
        #[arg(long, value_name = "DIR", default_value = "reproduce")]
        out: PathBuf,
        #[command(flatten)]
        run: RunOptions,
    },
}

/// Overrides applied on top of a scenario file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunOptions {
    /// `eq311` (full, default), `eq314` (scaled) or `exact`.
    #[arg(long, value_name = "MODE", value_parser = parse_mode)]
    pub multiplier_mode: Option<MultiplierMode>,
    #[arg(long)]
    pub no_augmentation: bool,
    #[arg(long)]
    pub no_hard_sat: bool,
    #[arg(long, value_name = "SECONDS")]
    pub dt: Option<f64>,
}

impl RunOptions {
    pub fn apply(&self, sc: &mut Scenario) -> crate::Result<()> {
        if let Some(mode) = self.multiplier_mode {
            sc.params.mode = mode;
        }
        if self.no_augmentation {
            sc.flags.augmentation = false;
        }
        if self.no_hard_sat {
            sc.flags.hard_saturation = false;
        }
        if let Some(dt) = self.dt {
            sc.dt = dt;
        }
        sc.validate()
    }
}

fn parse_mode(s: &str) -> Result<MultiplierMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_fault(s: &str) -> Result<Fault, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Csv(_) => EXIT_IO,
        Error::SingularMatrix
        | Error::NoConvergence(_)
        | Error::NotStabilizable
        | Error::Infeasible
        | Error::NumericBlowup { .. } => EXIT_FAILURE,
        Error::DimensionMismatch(_)
        | Error::NonFinite(_)
        | Error::InvalidPlant(_)
        | Error::UnsupportedOutput
        | Error::GainSingular
        | Error::SingularGain(_)
        | Error::BadLimits { .. }
        | Error::InvalidConfig(_)
        | Error::Parse(_) => EXIT_USAGE,
    }
}

/// Installs the `CBF_SERVO_LOG`-driven logger; later calls are no-ops.
pub fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run_from_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match execute(&cli.command, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Runs one command; `Ok` carries the exit code of a completed run.
pub fn execute(cmd: &Command, out: &mut dyn Write) -> crate::Result<i32> {
    match cmd {
        Command::Design { scenario } => {
            let sc = load_scenario(scenario)?;
            write!(out, "{}", design_report(&sc)?)?;
            Ok(EXIT_OK)
        }
        Command::Simulate { scenario, out: dir, run } => {
            let mut sc = load_scenario(scenario)?;
            run.apply(&mut sc)?;
            let res = sim::run(&sc)?;
            let files = write_run(dir, &sc, &res)?;
            writeln!(out, "{}: {} samples, wrote {} files to {}", sc.name, res.telemetry.records.len(), files.len(), dir.display())?;
            write!(out, "{}", res.metrics.to_key_value(&res.telemetry))?;
            Ok(EXIT_OK)
        }
        Command::Verify {
            seed,
            count,
            multiplier_mode,
            threads,
            inject_fault,
        } => {
            let mut cfg = VerifyConfig::new(*seed, *count as usize);
            cfg.mode = multiplier_mode.unwrap_or_default();
            cfg.fault = *inject_fault;
            cfg.threads = *threads;
            let report = run_verify(&cfg)?;
            write!(out, "{}", report.summary())?;
            Ok(if report.all_passed() { EXIT_OK } else { EXIT_VERIFY })
        }
        Command::Reproduce { out: dir, run } => {
            let start = Instant::now();
            let runs = reproduce(dir, run)?;
            let refs: Vec<_> = runs.iter().map(|(s, r)| (s, r)).collect();
            write!(out, "{}", summary_table(&refs))?;
            writeln!(out, "wrote {} in {:.2?}", dir.display(), start.elapsed())?;
            Ok(EXIT_OK)
        }
    }
}

/// Runs the bundled trade study into `dir/<case>/` and writes `dir/summary.md`.
pub fn reproduce(dir: &Path, opts: &RunOptions) -> crate::Result<Vec<(Scenario, SimulationResult)>> {
    let mut runs = Vec::new();
    for case in TradeStudyCase::ALL {
        let mut sc = parse_scenario(bundled_case_source(case))?;
        opts.apply(&mut sc)?;
        log::info!("running {}", sc.name);
        let res = sim::run(&sc)?;
        write_run(&dir.join(case.slug()), &sc, &res)?;
        runs.push((sc, res));
    }
    let refs: Vec<_> = runs.iter().map(|(s, r)| (s, r)).collect();
    std::fs::write(dir.join("summary.md"), summary_table(&refs))?;
    Ok(runs)
}

/// Text report of the baseline design and the constraint maps.
pub fn design_report(sc: &Scenario) -> crate::Result<String> {
    use std::fmt::Write as _;
    let ext = sc.plant.build_extended_system();
    let (care, real_parts) = match &sc.weights {
        Some(w) => {
            let d = LqrDesign::synthesize(&ext, w)?;
            (Some(d.care_residual), d.closed_loop_real_parts)
        }
        None => (None, eig_real_parts(&sc.gains.closed_loop_matrix(&ext))?),
    };
    let cfg = AugmentationConfig::new(&sc.plant, &sc.gains, sc.limits.clone(), &sc.params)?;
    let mut s = String::new();
    let mut mat = |name: &str, m: &Matrix| {
        let _ = writeln!(s, "{name} ({}x{}):", m.rows(), m.cols());
        for i in 0..m.rows() {
            let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:>13.6e}")).collect();
            let _ = writeln!(s, "  {}", row.join(" "));
        }
    };
    mat("K_I", sc.gains.k_i());
    mat("K_P", sc.gains.k_p());
    mat("G_v", &cfg.maps.g_v);
    mat("G_w", &cfg.maps.g_w);
    mat("H_w", &cfg.maps.h_w);
    mat("R_lambda", &cfg.maps.r_lambda);
    mat("R_gamma", &cfg.maps.r_gamma);
    let _ = writeln!(s, "scenario: {}", sc.name);
    let _ = writeln!(s, "limited output relative degree: {:?}", cfg.relative_degree);
    let _ = writeln!(
        s,
        "closed-loop eigenvalue real parts: [{}]",
        real_parts.iter().map(|x| format!("{x:.6e}")).collect::<Vec<_>>().join(", ")
    );
    match care {
        Some(r) => {
            let _ = writeln!(s, "CARE residual: {r:.3e}");
        }
        None => {
            let _ = writeln!(s, "CARE residual: n/a (explicit gains)");
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_from_args(std::iter::once("cbf-servo").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn count_zero_is_usage_error() {
        let (code, _, err) = run(&["verify", "--count", "0"]);
        assert_eq!(code, EXIT_USAGE, "{err}");
    }

    #[test]
    fn unknown_mode_is_usage_error() {
        assert_eq!(run(&["verify", "--multiplier-mode", "eq999"]).0, EXIT_USAGE);
    }

    #[test]
    fn verify_small_run() {
        let (code, out, _) = run(&["verify", "--seed", "3", "--count", "40"]);
        assert_eq!(code, EXIT_OK, "{out}");
        assert!(out.contains("40/40"));
    }

    #[test]
    fn injected_fault_exits_4() {
        let (code, out, _) = run(&["verify", "--count", "30", "--inject-fault", "halve-multipliers"]);
        assert_eq!(code, EXIT_VERIFY, "{out}");
    }

    #[test]
    fn missing_file_is_io_error() {
        assert_eq!(run(&["design", "--scenario", "/nonexistent/x.toml"]).0, EXIT_IO);
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::NotStabilizable), EXIT_FAILURE);
        assert_eq!(exit_code(&Error::NumericBlowup { t: 1.0, limit: 1e9 }), EXIT_FAILURE);
        assert_eq!(exit_code(&Error::Parse("x".into())), EXIT_USAGE);
        assert_eq!(exit_code(&Error::GainSingular), EXIT_USAGE);
    }

    #[test]
    fn overrides_apply() {
        let mut sc = parse_scenario(crate::scenario::bundled_source("scalar_demo").unwrap()).unwrap();
        let opts = RunOptions {
            multiplier_mode: Some(MultiplierMode::Scaled),
            no_augmentation: true,
            no_hard_sat: true,
            dt: Some(0.01),
        };
        opts.apply(&mut sc).unwrap();
        assert_eq!(sc.params.mode, MultiplierMode::Scaled);
        assert!(!sc.flags.augmentation && !sc.flags.hard_saturation);
        assert_eq!(sc.dt, 0.01);
        let bad = RunOptions { dt: Some(-1.0), ..Default::default() };
        assert!(bad.apply(&mut sc).is_err());
    }
}
