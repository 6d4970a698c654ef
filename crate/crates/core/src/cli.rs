//! Command-line interface.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::{GmwmxError, Result};
use crate::estimator::design::{ANNUAL, SEMIANNUAL};
use crate::estimator::{one_step_gmwmx, Correction, FitConfig, IntervalMethod, TrajectoryModel};
use crate::io::{format_fit, format_mom, format_wv_csv, read_mom, ReportOptions};
use crate::noise::NoiseModel;
use crate::sim::{missingness_row, run_setting, SettingSpec};
use crate::wavelet::empirical_wv;

#[derive(Debug, Parser)]
#[command(
    name = "gmwmx",
    version,
    about = "Trend estimation and inference for series with latent dependent noise and missing data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CorrectionArg {
    Residual,
    None,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum IntervalArg {
    Gaussian,
    LongMemory,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a trajectory and noise model to a series.
    Estimate {
        #[arg(long)]
        input: PathBuf,
        /// Noise model, e.g. "wn+pl"; only the component kinds are used.
        #[arg(long)]
        noise: String,
        /// Comma-separated subset of trend, annual, semiannual.
        #[arg(long, default_value = "trend,annual,semiannual")]
        trajectory: String,
        /// Number of wavelet scales or "auto".
        #[arg(long, default_value = "auto")]
        scales: String,
        #[arg(long, default_value_t = 0.95)]
        ci: f64,
        #[arg(long, value_enum, default_value = "residual")]
        correction: CorrectionArg,
        #[arg(long, value_enum, default_value = "gaussian")]
        intervals: IntervalArg,
        /// Seed for Monte Carlo interval quantiles.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Ignore offsets listed in the file header.
        #[arg(long)]
        no_offsets: bool,
        /// Leave stage timings out of the report.
        #[arg(long)]
        no_timings: bool,
        /// Report path; standard output when absent.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Simulate a series from a preset setting.
    Simulate {
        /// A1, A2, B1, B2, C1, C2 or custom.
        #[arg(long)]
        setting: String,
        /// Noise model for the custom setting.
        #[arg(long)]
        noise: Option<String>,
        #[arg(long)]
        n: Option<usize>,
        /// Missingness setting 1..=6.
        #[arg(long)]
        missing: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Empirical Haar wavelet variance of a series.
    Wv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "auto")]
        scales: String,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Monte Carlo study of a preset setting.
    Benchmark {
        #[arg(long)]
        setting: String,
        #[arg(long, default_value_t = 500)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        missing: Option<usize>,
        /// Directory receiving report.csv and report.json.
        #[arg(long)]
        output: PathBuf,
    },
}

fn parse_scales(s: &str) -> Result<Option<usize>> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    s.parse::<usize>()
        .map(Some)
        .map_err(|_| GmwmxError::InvalidParameter(format!("--scales must be a positive integer or 'auto', got '{s}'")))
}

fn parse_trajectory(s: &str) -> Result<TrajectoryModel> {
    let mut t = TrajectoryModel { include_trend: false, seasonal_frequencies: Vec::new(), ..Default::default() };
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.to_ascii_lowercase().as_str() {
            "trend" => t.include_trend = true,
            "annual" => t.seasonal_frequencies.push(ANNUAL),
            "semiannual" => t.seasonal_frequencies.push(SEMIANNUAL),
            "none" => {}
            other => return Err(GmwmxError::InvalidParameter(format!("unknown trajectory term '{other}'"))),
        }
    }
    Ok(t)
}

fn emit(output: &Option<PathBuf>, text: &str) -> Result<()> {
    match output {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Estimate {
            input,
            noise,
            trajectory,
            scales,
            ci,
            correction,
            intervals,
            seed,
            no_offsets,
            no_timings,
            output,
        } => {
            let template: NoiseModel = noise.parse()?;
            let mut traj = parse_trajectory(&trajectory)?;
            let ts = read_mom(&input)?;
            if !no_offsets {
                traj.offset_epochs = ts.offsets.clone();
            }
            let config = FitConfig {
                scales: parse_scales(&scales)?,
                ci_level: ci,
                correction: match correction {
                    CorrectionArg::Residual => Correction::Residual,
                    CorrectionArg::None => Correction::None,
                },
                intervals: match intervals {
                    IntervalArg::Gaussian => IntervalMethod::Gaussian,
                    IntervalArg::LongMemory => IntervalMethod::LongMemory,
                },
                seed,
                ..FitConfig::default()
            };
            let fit = one_step_gmwmx(&ts, &traj, &template, &config)?;
            let opts = ReportOptions {
                omit_timings: no_timings,
                config: vec![
                    ("input".into(), input.display().to_string()),
                    ("noise".into(), template.kinds().iter().map(|k| k.tag()).collect::<Vec<_>>().join("+")),
                    ("trajectory".into(), trajectory),
                    ("scales".into(), fit.wv_empirical.values.len().to_string()),
                    ("ci".into(), ci.to_string()),
                    ("correction".into(), format!("{correction:?}").to_ascii_lowercase()),
                    ("offsets".into(), traj.offset_epochs.len().to_string()),
                ],
            };
            emit(&output, &format_fit(&fit, &opts))
        }
        Command::Simulate { setting, noise, n, missing, seed, output } => {
            let spec = if setting.eq_ignore_ascii_case("custom") {
                let noise: NoiseModel = noise
                    .ok_or_else(|| GmwmxError::InvalidParameter("--noise is required for the custom setting".into()))?
                    .parse()?;
                let miss = missingness_row(missing.unwrap_or(1))?;
                SettingSpec::new("custom", noise, miss, n.unwrap_or(3650), 1, seed)
            } else {
                let mut spec = SettingSpec::preset(&setting, None, missing, 1, seed)?;
                if let Some(n) = n {
                    spec.n = n;
                }
                spec
            };
            emit(&output, &format_mom(&spec.replicate(0)?))
        }
        Command::Wv { input, scales, output } => {
            let ts = read_mom(&input)?;
            let wv = empirical_wv(&ts.values, parse_scales(&scales)?)?;
            emit(&output, &format_wv_csv(&wv.values, &wv.counts))
        }
        Command::Benchmark { setting, reps, seed, n, missing, output } => {
            let mut spec = SettingSpec::preset(&setting, None, missing, reps, seed)?;
            if let Some(n) = n {
                spec.n = n;
            }
            let report = run_setting(&spec, &FitConfig::default())?;
            fs::create_dir_all(&output)?;
            fs::write(output.join("report.csv"), report.to_csv())?;
            fs::write(output.join("report.json"), report.to_json())?;
            Ok(())
        }
    }
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("gmwmx: {e}");
            e.exit_code()
        }
    }
}
