use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gasnet_cli::commands::{
    self, CompareOptions, Format, GridOptions, InputAssignment, Report, TimeOptions,
};
use gasnet_cli::description::parse_network;
use gasnet_cli::{CliError, EXIT_INPUT_ERROR, EXIT_OK, EXIT_VERIFICATION_FAILED};

/// Linear models of gas flow in pipe networks. All model quantities are
/// deviations from the nominal operating point (absolute value = nominal +
/// deviation), in SI units.
#[derive(Parser)]
#[command(name = "gasnet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Matrix,
}

#[derive(Args)]
struct Common {
    /// Network description (JSON).
    #[arg(long)]
    network: PathBuf,
    /// Write the result here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Grid {
    /// Lowest angular frequency, rad/s.
    #[arg(long)]
    omega_min: Option<f64>,
    /// Highest angular frequency, rad/s.
    #[arg(long)]
    omega_max: Option<f64>,
    #[arg(long)]
    points_per_decade: Option<usize>,
}

impl Grid {
    fn options(&self) -> GridOptions {
        GridOptions {
            omega_min: self.omega_min,
            omega_max: self.omega_max,
            points_per_decade: self.points_per_decade,
        }
    }
}

#[derive(Args)]
struct Time {
    /// Simulated time span, s. Defaults to ten dominant time constants.
    #[arg(long)]
    horizon: Option<f64>,
    /// Output grid spacing, s.
    #[arg(long)]
    step: Option<f64>,
    /// Integrator substeps per grid interval.
    #[arg(long)]
    oversample: Option<usize>,
}

impl Time {
    fn options(&self) -> TimeOptions {
        TimeOptions {
            horizon: self.horizon,
            step: self.step,
            oversample: self.oversample,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print the labeled A, B, C matrices.
    Build {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "matrix")]
        format: FormatArg,
    },
    /// Bode magnitude and phase of every channel as CSV.
    Freqresp {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Time response from rest as CSV of states, outputs and eliminated
    /// boundary values.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        time: Time,
        /// Input waveform, LABEL=LEVEL | const:LEVEL | step:TIME:LEVEL |
        /// sin:AMP:OMEGA[:PHASE]; unset inputs stay at zero.
        #[arg(long = "input", value_name = "LABEL=WAVEFORM")]
        inputs: Vec<InputAssignment>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
    /// Compare the model against the differential-algebraic reference on a
    /// step response; exits with 1 when the comparison fails.
    Verify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        time: Time,
    },
    /// Frequency responses of one pipe cut into equal sections, side by side.
    CompareSeries {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
        /// Section counts, e.g. 1,2,3.
        #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
        splits: Vec<usize>,
        /// Overall length, m. Defaults to the described pipe's length.
        #[arg(long)]
        total_length: Option<f64>,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
    },
}

fn csv_only(format: FormatArg, command: &str) -> Result<(), CliError> {
    match format {
        FormatArg::Csv => Ok(()),
        FormatArg::Matrix => Err(CliError::Input(format!(
            "{command} writes CSV only; --format matrix applies to build"
        ))),
    }
}

fn run(cli: Cli) -> Result<(Report, Option<PathBuf>), CliError> {
    let load = |c: &Common| parse_network(&c.network).map_err(|e| CliError::Input(e.to_string()));
    match cli.command {
        Command::Build { common, format } => {
            let format = match format {
                FormatArg::Csv => Format::Csv,
                FormatArg::Matrix => Format::Matrix,
            };
            Ok((commands::build(&load(&common)?, format)?, common.out))
        }
        Command::Freqresp {
            common,
            grid,
            format,
        } => {
            csv_only(format, "freqresp")?;
            Ok((
                commands::freqresp(&load(&common)?, &grid.options())?,
                common.out,
            ))
        }
        Command::Simulate {
            common,
            time,
            inputs,
            format,
        } => {
            csv_only(format, "simulate")?;
            Ok((
                commands::simulate(&load(&common)?, &inputs, &time.options())?,
                common.out,
            ))
        }
        Command::Verify { common, time } => Ok((
            commands::verify(&load(&common)?, &time.options())?,
            common.out,
        )),
        Command::CompareSeries {
            common,
            grid,
            splits,
            total_length,
            format,
        } => {
            csv_only(format, "compare-series")?;
            let opts = CompareOptions {
                splits,
                total_length,
                grid: grid.options(),
            };
            Ok((
                commands::compare_series(&load(&common)?, &opts)?,
                common.out,
            ))
        }
    }
}

fn emit(report: &Report, out: Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(&path, &report.body).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?,
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout
                .write_all(report.body.as_bytes())
                .and_then(|_| stdout.flush())
            {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    return Err(CliError::Io {
                        path: "standard output".into(),
                        reason: e.to_string(),
                    })
                }
                _ => {}
            }
        }
    }
    if let Some(note) = &report.note {
        eprintln!("{note}");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli).and_then(|(report, out)| emit(&report, out).map(|_| report.passed)) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_VERIFICATION_FAILED,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT_ERROR
        }
    };
    ExitCode::from(code as u8)
}
